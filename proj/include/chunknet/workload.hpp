#ifndef CHUNKNET_WORKLOAD_HPP
#define CHUNKNET_WORKLOAD_HPP

#include <cstdint>
#include <vector>

#include "chunknet/config.hpp"

namespace chunknet {

// One unidirectional byte stream, carried as a train of messages of the
// workload's msg_bytes granularity with at most max_inflight outstanding.
struct Stream {
    enum class Kind { perm, incast, fixed };
    int id;
    int src;
    int dst;
    uint64_t bytes;
    Kind kind;
};

// Fixed-point-free one-to-one mapping: perm[i] is host i's receiver,
// every host sends exactly once and receives exactly once, never itself.
// Deterministic per seed. Throws std::invalid_argument for n < 2.
std::vector<int> gen_permutation(int n_hosts, uint64_t seed);

// Expands the plan's workload pattern into streams, ids dense from 0:
//   permutation - one stream per host to its permutation target
//   incast      - fan_in streams from hosts 1..fan_in into host 0
//   colocated   - the permutation streams plus the incast streams
//   fixed       - a single src->dst stream
std::vector<Stream> build_workload(const RunPlan& plan);

}  // namespace chunknet

#endif  // CHUNKNET_WORKLOAD_HPP
