#ifndef CHUNKNET_CC_HPP
#define CHUNKNET_CC_HPP

#include <cstdint>
#include <memory>

#include "chunknet/event_queue.hpp"

namespace chunknet {

// Standard smoothed RTT tracking (srtt 1/8, rttvar 1/4 gains).
struct RttEstimator {
    SimTime srtt = 0;
    SimTime rttvar = 0;
    bool has_sample = false;

    void sample(SimTime rtt) {
        if (!has_sample) {
            srtt = rtt;
            rttvar = rtt / 2;
            has_sample = true;
            return;
        }
        SimTime err = srtt > rtt ? srtt - rtt : rtt - srtt;
        rttvar = (3 * rttvar + err) / 4;
        srtt = (7 * srtt + rtt) / 8;
    }

    SimTime rto(SimTime rto_min, SimTime rto_max) const {
        SimTime r = srtt + 4 * rttvar;
        if (r < rto_min) return rto_min;
        if (r > rto_max) return rto_max;
        return r;
    }
};

struct CcConfig {
    enum class Algo { none, cubic, swift };
    // global: one window gates the connection's total inflight, whichever
    //         paths the chunks are sprayed over.
    // per_path: an independent window per path; the effective connection
    //           window is the sum of the per-path windows.
    enum class Scope { global, per_path };
    Algo algo = Algo::none;
    Scope scope = Scope::global;
    int64_t mss = 4032;        // max payload per packet
    int64_t cap_bytes = 0;     // hard cwnd cap, 0 = uncapped
    bool ecn_as_loss = false;  // cubic: treat ecn echo as a loss event
    SimTime swift_target_ns = 0;
    double init_cwnd_pkts = 2.0;
};

// Per-path congestion window state. The transport calls in with ack
// feedback and reads cwnd_bytes() when deciding whether to transmit.
class CongestionControl {
  public:
    virtual ~CongestionControl() = default;
    virtual void on_ack(SimTime now, int64_t acked_bytes, SimTime rtt, bool ecn_echo) = 0;
    virtual void on_loss(SimTime now) = 0;  // duplicate-ack style loss event
    virtual void on_rto(SimTime now) = 0;   // timeout: collapse the window
    virtual int64_t cwnd_bytes() const = 0;
    virtual const char* name() const = 0;

    uint64_t decreases() const { return decreases_; }
    const RttEstimator& rtt() const { return est_; }

  protected:
    uint64_t decreases_ = 0;
    RttEstimator est_;
};

std::unique_ptr<CongestionControl> make_cc(const CcConfig& cfg);

}  // namespace chunknet

#endif  // CHUNKNET_CC_HPP
