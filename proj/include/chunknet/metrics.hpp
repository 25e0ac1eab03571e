#ifndef CHUNKNET_METRICS_HPP
#define CHUNKNET_METRICS_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "chunknet/network.hpp"
#include "chunknet/transport.hpp"
#include "chunknet/workload.hpp"

namespace chunknet {

struct FlowStat {
    int id;
    int src;
    int dst;
    uint64_t bytes;
    SimTime start_ns;
    SimTime end_ns;  // completion of the stream's last message
    Stream::Kind kind;

    SimTime fct_ns() const { return end_ns - start_ns; }
    double goodput_bps() const {
        return fct_ns() > 0 ? double(bytes) * 8e9 / double(fct_ns()) : 0.0;
    }
};

struct MetricsReport {
    std::vector<FlowStat> flows;  // stream id order
    bool quiesced = true;         // every stream finished before the cutoff
    int unfinished = 0;
    SimTime makespan_ns = 0;  // latest stream completion
    SimTime ideal_ns = 0;     // per-host volume / host line rate
    double slowdown = 0.0;    // makespan / ideal
    SimTime cutoff_ns = 0;
    Transport::Stats transport;
    Network::Counters net;

    std::vector<SimTime> fcts(Stream::Kind kind) const;  // only that kind
    std::vector<SimTime> fcts_all() const;
};

// Complementary CDF: for each distinct FCT x ascending, P(FCT >= x).
// Probabilities are nonincreasing, starting at 1. Throws
// std::invalid_argument on an empty list.
std::vector<std::pair<SimTime, double>> fct_ccdf(std::vector<SimTime> fcts);

// Nearest-rank quantile (q in (0, 1]) of the empirical distribution.
SimTime fct_quantile(std::vector<SimTime> fcts, double q);

}  // namespace chunknet

#endif  // CHUNKNET_METRICS_HPP
