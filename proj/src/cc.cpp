#include "chunknet/cc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace chunknet {

namespace {

constexpr double kCubicC = 0.4;
constexpr double kCubicBeta = 0.7;
constexpr double kSwiftAi = 1.0;        // packets per RTT below target
constexpr double kSwiftMdScale = 0.8;
constexpr double kSwiftMaxMd = 0.5;     // floor of the decrease factor
constexpr double kMinCwndPkts = 1.0;
constexpr SimTime kNeverDecreased = std::numeric_limits<SimTime>::min() / 2;

class OpenLoop final : public CongestionControl {
  public:
    explicit OpenLoop(const CcConfig& cfg)
        : cwnd_(cfg.cap_bytes > 0 ? cfg.cap_bytes
                                  : std::numeric_limits<int64_t>::max() / 4) {}
    void on_ack(SimTime, int64_t, SimTime rtt, bool) override {
        if (rtt > 0) est_.sample(rtt);
    }
    void on_loss(SimTime) override {}
    void on_rto(SimTime) override {}
    int64_t cwnd_bytes() const override { return cwnd_; }
    const char* name() const override { return "none"; }

  private:
    int64_t cwnd_;
};

class Cubic final : public CongestionControl {
  public:
    explicit Cubic(const CcConfig& cfg)
        : mss_(cfg.mss),
          cap_pkts_(cfg.cap_bytes > 0 ? double(cfg.cap_bytes) / cfg.mss
                                      : std::numeric_limits<double>::infinity()),
          ecn_as_loss_(cfg.ecn_as_loss),
          w_(cfg.init_cwnd_pkts) {}

    void on_ack(SimTime now, int64_t acked, SimTime rtt, bool ecn_echo) override {
        if (rtt > 0) est_.sample(rtt);  // rtt 0 = suppressed sample (rtx'd chunk)
        if (ecn_echo && ecn_as_loss_) {
            decrease(now);
            return;
        }
        if (acked <= 0) return;
        double acked_pkts = double(acked) / mss_;
        if (w_ < ssthresh_) {
            w_ = std::min(w_ + acked_pkts, cap_pkts_);
            return;
        }
        if (epoch_start_ < 0) {
            epoch_start_ = now;
            if (w_max_ < w_) w_max_ = w_;
            k_ = std::cbrt(w_max_ * (1.0 - kCubicBeta) / kCubicC);
        }
        double t = double(now - epoch_start_) * 1e-9;
        double target = kCubicC * std::pow(t - k_, 3) + w_max_;
        if (target > w_) w_ += (target - w_) / w_ * acked_pkts;
        w_ = std::min(w_, cap_pkts_);
    }

    void on_loss(SimTime now) override { decrease(now); }

    void on_rto(SimTime now) override {
        ssthresh_ = std::max(w_ * kCubicBeta, kMinCwndPkts);
        w_max_ = w_;
        w_ = kMinCwndPkts;
        epoch_start_ = -1;
        last_decrease_ = now;
        decreases_++;
    }

    int64_t cwnd_bytes() const override {
        return static_cast<int64_t>(std::llround(w_ * mss_));
    }
    const char* name() const override { return "cubic"; }

  private:
    void decrease(SimTime now) {
        // One window reduction per round trip, however many signals arrive.
        if (est_.has_sample && now - last_decrease_ < est_.srtt) return;
        last_decrease_ = now;
        decreases_++;
        w_max_ = w_;
        w_ = std::max(w_ * kCubicBeta, kMinCwndPkts);
        ssthresh_ = w_;
        k_ = std::cbrt(w_max_ * (1.0 - kCubicBeta) / kCubicC);
        epoch_start_ = now;
    }

    int64_t mss_;
    double cap_pkts_;
    bool ecn_as_loss_;
    double w_;
    double w_max_ = 0;
    double ssthresh_ = std::numeric_limits<double>::infinity();
    double k_ = 0;
    SimTime epoch_start_ = -1;
    SimTime last_decrease_ = kNeverDecreased;
};

class Swift final : public CongestionControl {
  public:
    explicit Swift(const CcConfig& cfg)
        : mss_(cfg.mss),
          cap_pkts_(cfg.cap_bytes > 0 ? double(cfg.cap_bytes) / cfg.mss
                                      : std::numeric_limits<double>::infinity()),
          target_(cfg.swift_target_ns),
          w_(cfg.init_cwnd_pkts) {}

    void on_ack(SimTime now, int64_t acked, SimTime rtt, bool) override {
        if (rtt > 0) est_.sample(rtt);  // rtt 0 = suppressed sample (rtx'd chunk)
        if (rtt <= target_) {
            if (acked > 0)
                w_ = std::min(w_ + kSwiftAi * (double(acked) / mss_) / w_, cap_pkts_);
            return;
        }
        if (now - last_decrease_ < est_.srtt) return;
        double f = std::max(1.0 - kSwiftMdScale * double(rtt - target_) / double(rtt),
                            kSwiftMaxMd);
        w_ = std::max(w_ * f, kMinCwndPkts);
        last_decrease_ = now;
        decreases_++;
    }

    void on_loss(SimTime now) override {
        if (est_.has_sample && now - last_decrease_ < est_.srtt) return;
        w_ = std::max(w_ * kSwiftMaxMd, kMinCwndPkts);
        last_decrease_ = now;
        decreases_++;
    }

    void on_rto(SimTime now) override {
        w_ = kMinCwndPkts;
        last_decrease_ = now;
        decreases_++;
    }

    int64_t cwnd_bytes() const override {
        return static_cast<int64_t>(std::llround(w_ * mss_));
    }
    const char* name() const override { return "swift"; }

  private:
    int64_t mss_;
    double cap_pkts_;
    SimTime target_;
    double w_;
    SimTime last_decrease_ = kNeverDecreased;
};

}  // namespace

std::unique_ptr<CongestionControl> make_cc(const CcConfig& cfg) {
    switch (cfg.algo) {
        case CcConfig::Algo::cubic: return std::make_unique<Cubic>(cfg);
        case CcConfig::Algo::swift: return std::make_unique<Swift>(cfg);
        case CcConfig::Algo::none: break;
    }
    return std::make_unique<OpenLoop>(cfg);
}

}  // namespace chunknet
