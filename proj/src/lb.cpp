#include "chunknet/lb.hpp"

#include <utility>

namespace chunknet {

int select_path(LbPolicy policy, const PathScoreboard& board, RngStream& rng) {
    int n = board.n_paths();
    if (n == 1) return 0;
    if (policy == LbPolicy::oblivious)
        return static_cast<int>(rng.next_below(static_cast<uint64_t>(n)));

    int a = static_cast<int>(rng.next_below(static_cast<uint64_t>(n)));
    int b = static_cast<int>(rng.next_below(static_cast<uint64_t>(n - 1)));
    if (b >= a) b++;  // second draw without replacement
    if (a > b) std::swap(a, b);  // a < b so ties resolve to the lower id

    double sa, sb;
    if (policy == LbPolicy::p2_rtt) {
        sa = board.rtt_score(a);
        sb = board.rtt_score(b);
    } else {
        sa = board.ecn_score(a);
        sb = board.ecn_score(b);
    }
    return sb < sa ? b : a;
}

}  // namespace chunknet
