#ifndef CHUNKNET_CONFIG_HPP
#define CHUNKNET_CONFIG_HPP

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "chunknet/network.hpp"
#include "chunknet/topology.hpp"
#include "chunknet/transport.hpp"

namespace chunknet {

// Raised for unknown keys, malformed values, or invalid combinations.
struct SpecError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A fully validated, typed view of one experiment, produced by
// ExperimentSpec::plan(). Everything the runner needs, nothing stringly.
struct RunPlan {
    Topology topo;
    NetParams net;
    TransportConfig transport;

    enum class Pattern { permutation, incast, colocated, fixed };
    Pattern pattern = Pattern::permutation;
    uint64_t bytes_per_host = 0;  // volume each source moves
    uint64_t msg_bytes = 0;       // stream granularity
    int max_inflight = 0;         // messages a stream keeps outstanding
    int fan_in = 0;               // incast senders
    int fixed_src = 0, fixed_dst = 1;

    double drop_ratio = 0.0;  // injected at host egress
    uint64_t seed = 1;
    double cutoff_multiple = 100.0;  // give up at cutoff x ideal time
    bool trace = false;

    int n_hosts = 0;
    SimTime swift_auto_target(SimTime base_rtt) const {
        return base_rtt + base_rtt / 2;
    }
};

// One experiment definition: a flat set of namespaced key=value entries
// with defaults, parsed from a small INI-style text ([section] headers,
// key = value lines, # comments) and/or --set overrides. Values keep their
// literal spelling; the canonical form (every key in registry order) is
// what gets hashed and echoed into results.
class ExperimentSpec {
  public:
    ExperimentSpec();  // all defaults

    static ExperimentSpec from_text(const std::string& text);
    static ExperimentSpec from_file(const std::string& path);

    // Applies "section.key = value"; throws SpecError for unknown keys or
    // values that do not parse as the key's type.
    void set(const std::string& key, const std::string& value);
    void merge_text(const std::string& text);  // same grammar as from_text

    const std::string& get(const std::string& key) const;
    int64_t get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    // Every key in registry order, "key = value" per line.
    std::string canonical() const;
    uint64_t hash() const;
    std::string hash_hex() const;  // 16 lowercase hex digits

    // All entries in registry order (for echoing into summaries).
    std::vector<std::pair<std::string, std::string>> entries() const;

    // Validates cross-field invariants and produces the typed plan.
    RunPlan plan() const;

  private:
    std::map<std::string, std::string> values_;
};

}  // namespace chunknet

#endif  // CHUNKNET_CONFIG_HPP
