#ifndef CHUNKNET_LB_HPP
#define CHUNKNET_LB_HPP

#include <cstdint>
#include <vector>

#include "chunknet/event_queue.hpp"
#include "chunknet/rng.hpp"

namespace chunknet {

// Per-path quality estimates fed by ack feedback. New paths start from an
// optimistic prior (the unloaded round trip), so unprobed paths keep being
// explored instead of starving.
class PathScoreboard {
  public:
    PathScoreboard(int n_paths, SimTime base_rtt_ns)
        : rtt_(n_paths, double(base_rtt_ns)), ecn_(n_paths, 0.0) {}

    int n_paths() const { return static_cast<int>(rtt_.size()); }

    // EWMA with gain 1/8.
    void record_rtt(int path, SimTime rtt_ns) {
        rtt_[path] += (double(rtt_ns) - rtt_[path]) / 8.0;
    }
    void record_ecn(int path, bool marked) {
        ecn_[path] += ((marked ? 1.0 : 0.0) - ecn_[path]) / 8.0;
    }

    double rtt_score(int path) const { return rtt_[path]; }
    double ecn_score(int path) const { return ecn_[path]; }

  private:
    std::vector<double> rtt_;
    std::vector<double> ecn_;
};

enum class LbPolicy {
    oblivious,  // uniform random spraying
    p2_rtt,     // two random candidates, lower smoothed rtt wins
    p2_ecn,     // two random candidates, lower ecn fraction wins
};

// Picks a path among [0, board.n_paths()). Power-of-two-choices policies
// draw two distinct candidates; ties go to the lower path id.
int select_path(LbPolicy policy, const PathScoreboard& board, RngStream& rng);

}  // namespace chunknet

#endif  // CHUNKNET_LB_HPP
