#include "chunknet/topology.hpp"

#include <stdexcept>

#include "chunknet/rng.hpp"

namespace chunknet {

namespace {

void add_duplex(Topology& t, int a, int b) {
    int ab = static_cast<int>(t.links.size());
    t.links.push_back({static_cast<int32_t>(a), static_cast<int32_t>(b)});
    t.out[a].push_back({b, ab});
    int ba = static_cast<int>(t.links.size());
    t.links.push_back({static_cast<int32_t>(b), static_cast<int32_t>(a)});
    t.out[b].push_back({a, ba});
    t.in_degree[b]++;
    t.in_degree[a]++;
}

// Per-pair rotation so path_id 0 on different pairs lands on different
// cores, approximating hash-based path dispersion while keeping full
// coverage as path_id sweeps 0..path_count-1.
uint64_t pair_mix(int src, int dst) {
    return splitmix64((static_cast<uint64_t>(static_cast<uint32_t>(src)) << 32) |
                      static_cast<uint32_t>(dst));
}

}  // namespace

int Topology::link_between(int from, int to) const {
    for (auto [peer, id] : out[from])
        if (peer == to) return id;
    return -1;
}

int Topology::host_egress_link(int host) const {
    if (!is_host(host)) throw std::invalid_argument("not a host");
    return out[host].at(0).second;
}

int Topology::max_hops() const {
    return kind == Kind::star ? 2 : (k == 0 ? 0 : 6);
}

int Topology::path_count(int src, int dst) const {
    if (src == dst) throw std::invalid_argument("path_count: src == dst");
    if (kind == Kind::star) return 1;
    int per_pod = k * k / 4;
    int spod = src / per_pod, dpod = dst / per_pod;
    int sedge = (src % per_pod) / (k / 2), dedge = (dst % per_pod) / (k / 2);
    if (spod == dpod && sedge == dedge) return 1;
    if (spod == dpod) return k / 2;
    return k * k / 4;
}

std::vector<int32_t> Topology::route(int src, int dst, int path_id) const {
    if (src == dst || !is_host(src) || !is_host(dst))
        throw std::invalid_argument("route: bad host pair");
    if (path_id < 0) throw std::invalid_argument("route: negative path_id");

    if (kind == Kind::star) {
        int center = n_hosts;
        return {static_cast<int32_t>(src), static_cast<int32_t>(center),
                static_cast<int32_t>(dst)};
    }

    int half = k / 2;
    int per_pod = k * k / 4;
    int hosts = n_hosts;
    int n_edge = k * half;  // k pods * k/2 edge switches

    int spod = src / per_pod, dpod = dst / per_pod;
    int sedge_i = (src % per_pod) / half, dedge_i = (dst % per_pod) / half;
    int sedge = hosts + spod * half + sedge_i;
    int dedge = hosts + dpod * half + dedge_i;

    if (sedge == dedge)
        return {static_cast<int32_t>(src), static_cast<int32_t>(sedge),
                static_cast<int32_t>(dst)};

    uint64_t rot = pair_mix(src, dst);
    if (spod == dpod) {
        int j = static_cast<int>((static_cast<uint64_t>(path_id) + rot) % half);
        int agg = hosts + n_edge + spod * half + j;
        return {static_cast<int32_t>(src), static_cast<int32_t>(sedge),
                static_cast<int32_t>(agg), static_cast<int32_t>(dedge),
                static_cast<int32_t>(dst)};
    }

    int n_core = half * half;
    int c = static_cast<int>((static_cast<uint64_t>(path_id) + rot) % n_core);
    int j = c / half;  // aggregation tier index wired to core c in every pod
    int sagg = hosts + n_edge + spod * half + j;
    int dagg = hosts + n_edge + dpod * half + j;
    int core = hosts + 2 * n_edge + c;
    return {static_cast<int32_t>(src),  static_cast<int32_t>(sedge),
            static_cast<int32_t>(sagg), static_cast<int32_t>(core),
            static_cast<int32_t>(dagg), static_cast<int32_t>(dedge),
            static_cast<int32_t>(dst)};
}

Topology build_fat_tree(int k) {
    if (k < 2 || k % 2 != 0) throw std::invalid_argument("fat tree arity must be even and >= 2");
    Topology t;
    t.kind = Topology::Kind::fat_tree;
    t.k = k;
    int half = k / 2;
    int hosts = k * k * k / 4;
    int n_edge = k * half, n_agg = k * half, n_core = half * half;
    t.n_hosts = hosts;
    t.n_nodes = hosts + n_edge + n_agg + n_core;
    t.out.resize(t.n_nodes);
    t.in_degree.assign(t.n_nodes, 0);

    int per_pod = half * half;  // hosts per pod
    for (int h = 0; h < hosts; ++h) {
        int pod = h / per_pod;
        int e = (h % per_pod) / half;
        add_duplex(t, h, hosts + pod * half + e);
    }
    for (int pod = 0; pod < k; ++pod)
        for (int e = 0; e < half; ++e)
            for (int j = 0; j < half; ++j)
                add_duplex(t, hosts + pod * half + e, hosts + n_edge + pod * half + j);
    for (int pod = 0; pod < k; ++pod)
        for (int j = 0; j < half; ++j)
            for (int c = j * half; c < (j + 1) * half; ++c)
                add_duplex(t, hosts + n_edge + pod * half + j, hosts + 2 * n_edge + c);
    return t;
}

Topology build_star(int n_hosts) {
    if (n_hosts < 2) throw std::invalid_argument("star needs >= 2 hosts");
    Topology t;
    t.kind = Topology::Kind::star;
    t.n_hosts = n_hosts;
    t.n_nodes = n_hosts + 1;
    t.out.resize(t.n_nodes);
    t.in_degree.assign(t.n_nodes, 0);
    for (int h = 0; h < n_hosts; ++h) add_duplex(t, h, n_hosts);
    return t;
}

}  // namespace chunknet
