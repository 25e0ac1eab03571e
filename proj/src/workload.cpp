#include "chunknet/workload.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "chunknet/rng.hpp"

namespace chunknet {

std::vector<int> gen_permutation(int n_hosts, uint64_t seed) {
    if (n_hosts < 2)
        throw std::invalid_argument("permutation needs at least 2 hosts");
    std::vector<int> perm(n_hosts);
    std::iota(perm.begin(), perm.end(), 0);
    RngStream rng(seed, "workload");
    for (int i = n_hosts - 1; i > 0; --i) {
        int j = static_cast<int>(rng.next_below(static_cast<uint64_t>(i) + 1));
        std::swap(perm[i], perm[j]);
    }
    // Repair fixed points by swapping with the next slot. The partner's
    // value cannot equal i (i already holds it), so one pass suffices.
    for (int i = 0; i < n_hosts; ++i)
        if (perm[i] == i) std::swap(perm[i], perm[(i + 1) % n_hosts]);
    return perm;
}

std::vector<Stream> build_workload(const RunPlan& plan) {
    std::vector<Stream> out;
    int next_id = 0;
    auto add = [&](int src, int dst, Stream::Kind kind) {
        out.push_back({next_id++, src, dst, plan.bytes_per_host, kind});
    };

    switch (plan.pattern) {
        case RunPlan::Pattern::permutation: {
            auto perm = gen_permutation(plan.n_hosts, plan.seed);
            for (int i = 0; i < plan.n_hosts; ++i)
                add(i, perm[i], Stream::Kind::perm);
            break;
        }
        case RunPlan::Pattern::incast:
            for (int s = 1; s <= plan.fan_in; ++s)
                add(s, 0, Stream::Kind::incast);
            break;
        case RunPlan::Pattern::colocated: {
            auto perm = gen_permutation(plan.n_hosts, plan.seed);
            for (int i = 0; i < plan.n_hosts; ++i)
                add(i, perm[i], Stream::Kind::perm);
            for (int s = 1; s <= plan.fan_in; ++s)
                add(s, 0, Stream::Kind::incast);
            break;
        }
        case RunPlan::Pattern::fixed:
            add(plan.fixed_src, plan.fixed_dst, Stream::Kind::fixed);
            break;
    }
    return out;
}

}  // namespace chunknet
