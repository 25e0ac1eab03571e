#ifndef CHUNKNET_TOPOLOGY_HPP
#define CHUNKNET_TOPOLOGY_HPP

#include <cstdint>
#include <vector>

namespace chunknet {

// Directed-link graph for the simulated fabric. Every physical cable is two
// directed links; queues and counters attach to directed links.
struct Topology {
    enum class Kind { fat_tree, star };

    Kind kind = Kind::star;
    int k = 0;        // fat-tree arity (0 for star)
    int n_hosts = 0;
    int n_nodes = 0;  // hosts first, then switches

    struct LinkDesc {
        int32_t from;
        int32_t to;
    };
    std::vector<LinkDesc> links;
    // out[node] = list of (peer node, directed link id)
    std::vector<std::vector<std::pair<int32_t, int32_t>>> out;
    std::vector<int> in_degree;

    bool is_host(int node) const { return node < n_hosts; }

    // -1 when no directed link exists.
    int link_between(int from, int to) const;

    // Number of distinct shortest paths route() can return for this pair.
    int path_count(int src, int dst) const;

    // Node sequence (src ... dst) of the shortest path selected by path_id.
    // path_id values 0..path_count-1 enumerate all shortest paths, offset by
    // a per-pair rotation so that identical path_ids on different pairs do
    // not collide on the same core.
    std::vector<int32_t> route(int src, int dst, int path_id) const;

    int host_egress_link(int host) const;

    // Link hops on the longest shortest path between any two hosts.
    int max_hops() const;
};

Topology build_fat_tree(int k);
Topology build_star(int n_hosts);

}  // namespace chunknet

#endif  // CHUNKNET_TOPOLOGY_HPP
