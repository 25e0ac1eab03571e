#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <vector>

#include "chunknet/event_queue.hpp"
#include "chunknet/network.hpp"
#include "chunknet/topology.hpp"
#include "doctest.h"

using namespace chunknet;

namespace {

Packet mk_data(int src, int dst, uint32_t payload, int path = 0) {
    Packet p;
    p.kind = PacketKind::data;
    p.src = src;
    p.dst = dst;
    p.path_id = path;
    p.payload_len = payload;
    return p;
}

Packet mk_ack(int src, int dst) {
    Packet p;
    p.kind = PacketKind::ack;
    p.src = src;
    p.dst = dst;
    return p;
}

struct Arrival {
    SimTime t;
    Packet pkt;
};

void capture_all(Network& net, const Topology& topo, std::vector<Arrival>& out) {
    for (int h = 0; h < topo.n_hosts; ++h)
        net.set_host_handler(h, [&out](Packet&& p) { out.push_back({-1, std::move(p)}); });
}

// Handler capturing arrival times needs the queue clock.
void capture_timed(Network& net, EventQueue& eq, const Topology& topo,
                   std::vector<Arrival>& out) {
    for (int h = 0; h < topo.n_hosts; ++h)
        net.set_host_handler(h, [&out, &eq](Packet&& p) {
            out.push_back({eq.now(), std::move(p)});
        });
}

void check_conserved(const Network& net) {
    CHECK(net.in_flight_pkts() == 0);
    CHECK(net.in_flight_payload() == 0);
    const auto& c = net.counters();
    CHECK(c.injected_pkts == c.delivered_pkts + c.dropped_pkts);
    CHECK(c.injected_payload == c.delivered_payload + c.dropped_payload);
}

// Breadth-first distances and shortest-path multiplicities, used as the
// reference the route enumerator must agree with.
void bfs_count(const Topology& t, int src, std::vector<int>& dist,
               std::vector<long>& count) {
    dist.assign(t.n_nodes, -1);
    count.assign(t.n_nodes, 0);
    std::queue<int> q;
    dist[src] = 0;
    count[src] = 1;
    q.push(src);
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        for (auto [v, link] : t.out[u]) {
            if (dist[v] < 0) {
                dist[v] = dist[u] + 1;
                q.push(v);
            }
            if (dist[v] == dist[u] + 1) count[v] += count[u];
        }
    }
}

}  // namespace

TEST_CASE("events run in time order with stable ties") {
    EventQueue eq;
    std::vector<int> order;
    eq.schedule(30, [&] { order.push_back(3); });
    eq.schedule(10, [&] { order.push_back(1); });
    eq.schedule(20, [&] { order.push_back(20); });
    eq.schedule(20, [&] { order.push_back(21); });  // same time, later insertion
    eq.schedule(20, [&] { order.push_back(22); });
    uint64_t n = eq.run_until(25);
    CHECK(order == std::vector<int>{1, 20, 21, 22});
    CHECK(n == 4u);
    CHECK(eq.now() == 25);
    eq.run_until(100);
    CHECK(order.back() == 3);
}

TEST_CASE("handlers may schedule at now but never earlier") {
    EventQueue eq;
    int fired = 0;
    eq.schedule(5, [&] {
        eq.schedule(5, [&] { fired++; });             // same-time follow-up is fine
        CHECK_THROWS_AS(eq.schedule(4, [] {}), std::logic_error);
    });
    eq.run_until(10);
    CHECK(fired == 1);
    CHECK_THROWS_AS(eq.run_until(3), std::logic_error);
}

TEST_CASE("run_until_idle reports drain vs cutoff") {
    EventQueue eq;
    eq.schedule(10, [] {});
    CHECK(eq.run_until_idle(1000));
    eq.schedule(2000, [] {});
    eq.schedule(900000, [] {});
    CHECK_FALSE(eq.run_until_idle(5000));
}

TEST_CASE("fat tree has the canonical shape") {
    for (int k : {2, 4, 8}) {
        Topology t = build_fat_tree(k);
        CHECK(t.n_hosts == k * k * k / 4);
        CHECK(t.n_nodes == k * k * k / 4 + k * k + k * k / 4);
        // duplex cables: host-edge + edge-agg + agg-core
        int cables = k * k * k / 4 + k * (k / 2) * (k / 2) * 2;
        CHECK(static_cast<int>(t.links.size()) == 2 * cables);
        for (int h = 0; h < t.n_hosts; ++h) CHECK(t.in_degree[h] == 1);
    }
}

TEST_CASE("route enumeration matches breadth-first shortest paths") {
    Topology t = build_fat_tree(4);
    struct Pair {
        int src, dst, want_links;
        long want_paths;
    };
    // host 1 shares host 0's edge switch; host 2 shares the pod only;
    // host 15 lives in the last pod.
    std::vector<Pair> pairs = {{0, 1, 2, 1}, {0, 2, 4, 2}, {0, 15, 6, 4}};
    for (const auto& pr : pairs) {
        std::vector<int> dist;
        std::vector<long> count;
        bfs_count(t, pr.src, dist, count);
        CHECK(dist[pr.dst] == pr.want_links);
        CHECK(count[pr.dst] == pr.want_paths);
        CHECK(t.path_count(pr.src, pr.dst) == pr.want_paths);

        std::set<std::vector<int32_t>> routes;
        for (int pid = 0; pid < t.path_count(pr.src, pr.dst); ++pid) {
            auto r = t.route(pr.src, pr.dst, pid);
            CHECK(static_cast<int>(r.size()) == pr.want_links + 1);
            CHECK(r.front() == pr.src);
            CHECK(r.back() == pr.dst);
            for (size_t i = 0; i + 1 < r.size(); ++i)
                CHECK(t.link_between(r[i], r[i + 1]) >= 0);
            routes.insert(r);
        }
        // path_ids enumerate every shortest path exactly once
        CHECK(static_cast<long>(routes.size()) == pr.want_paths);
    }
}

TEST_CASE("path_id beyond path_count wraps onto the same route set") {
    Topology t = build_fat_tree(4);
    CHECK(t.route(0, 15, 0) == t.route(0, 15, 4));
    CHECK(t.route(0, 15, 3) == t.route(0, 15, 7));
}

TEST_CASE("star routes through the hub") {
    Topology t = build_star(16);
    CHECK(t.n_nodes == 17);
    CHECK(t.path_count(3, 9) == 1);
    CHECK(t.route(3, 9, 0) == std::vector<int32_t>{3, 16, 9});
    CHECK(t.route(3, 9, 5) == std::vector<int32_t>{3, 16, 9});
    CHECK(t.in_degree[16] == 16);
}

TEST_CASE("store-and-forward latency is exact") {
    Topology t = build_star(3);
    NetParams p;
    p.rate_bps = 1e9;  // 4096B serializes in exactly 32768 ns
    p.link_delay_ns = 1000;
    p.qcap_bytes = 1 << 20;
    EventQueue eq;
    Network net(t, p, eq, 1);
    std::vector<Arrival> got;
    capture_timed(net, eq, t, got);

    net.inject(mk_data(0, 1, net.max_payload()));
    eq.run_until_idle(1'000'000'000);
    REQUIRE(got.size() == 1);
    CHECK(got[0].t == 2 * (32768 + 1000));
    check_conserved(net);
}

TEST_CASE("data lane is FIFO with back-to-back spacing") {
    Topology t = build_star(3);
    NetParams p;
    p.rate_bps = 1e9;
    p.link_delay_ns = 1000;
    p.qcap_bytes = 1 << 20;
    EventQueue eq;
    Network net(t, p, eq, 1);
    std::vector<Arrival> got;
    capture_timed(net, eq, t, got);

    for (int i = 0; i < 10; ++i) {
        Packet pk = mk_data(0, 1, net.max_payload());
        pk.hdr.csn = static_cast<uint8_t>(i);
        net.inject(pk);
    }
    eq.run_until_idle(1'000'000'000);
    REQUIRE(got.size() == 10);
    for (int i = 0; i < 10; ++i) CHECK(got[i].pkt.hdr.csn == i);
    for (int i = 1; i < 10; ++i) CHECK(got[i].t - got[i - 1].t == 32768);
    check_conserved(net);
}

TEST_CASE("control packets overtake queued data") {
    Topology t = build_star(3);
    NetParams p;
    p.rate_bps = 1e9;
    p.link_delay_ns = 1000;
    p.qcap_bytes = 1 << 20;
    EventQueue eq;
    Network net(t, p, eq, 1);
    std::vector<Arrival> got;
    capture_timed(net, eq, t, got);

    for (int i = 0; i < 8; ++i) net.inject(mk_data(0, 1, net.max_payload()));
    net.inject(mk_ack(0, 1));  // injected last, should arrive second
    eq.run_until_idle(1'000'000'000);
    REQUIRE(got.size() == 9);
    CHECK(got[0].pkt.kind == PacketKind::data);  // was already serializing
    CHECK(got[1].pkt.kind == PacketKind::ack);
    check_conserved(net);
}

TEST_CASE("drop tail sheds the overflow and nothing else") {
    Topology t = build_star(3);
    NetParams p;
    p.rate_bps = 1e9;
    p.link_delay_ns = 1000;
    p.qcap_bytes = 5 * 4096;
    EventQueue eq;
    Network net(t, p, eq, 1);
    std::vector<Arrival> got;
    capture_all(net, t, got);

    // Two senders overdrive the hub-to-receiver link at 2:1.
    for (int i = 0; i < 40; ++i) {
        net.inject(mk_data(1, 0, net.max_payload()));
        net.inject(mk_data(2, 0, net.max_payload()));
    }
    eq.run_until_idle(100'000'000'000);
    const auto& c = net.counters();
    CHECK(c.dropped_pkts > 0);
    CHECK(got.size() == c.delivered_pkts);
    CHECK(c.injected_pkts == 80u);
    // The congested queue admits about qcap worth and keeps draining at
    // half the arrival rate while the burst lasts.
    CHECK(c.delivered_pkts >= 40u);
    check_conserved(net);
}

TEST_CASE("ecn marks when occupancy sits above the threshold") {
    Topology t = build_star(3);
    NetParams p;
    p.rate_bps = 1e9;
    p.link_delay_ns = 1000;
    p.qcap_bytes = 40 * 4096;
    p.ecn_frac = 0.20;  // threshold = 8 packets
    EventQueue eq;
    Network net(t, p, eq, 1);
    std::vector<Arrival> got;
    capture_all(net, t, got);

    for (int i = 0; i < 20; ++i) {
        net.inject(mk_data(1, 0, net.max_payload()));
        net.inject(mk_data(2, 0, net.max_payload()));
    }
    eq.run_until_idle(100'000'000'000);
    REQUIRE(got.size() == 40);
    uint64_t marked = 0;
    for (auto& a : got) marked += a.pkt.ecn ? 1 : 0;
    CHECK_FALSE(got[0].pkt.ecn);   // hub queue was empty on first arrival
    CHECK(got[39].pkt.ecn);        // hub queue was deep on last arrival
    CHECK(marked == net.counters().ecn_marked_pkts);
    CHECK(marked > 0u);
    CHECK(marked < 40u);
    check_conserved(net);
}

TEST_CASE("trim forwards headers ahead of the standing queue") {
    Topology t = build_star(3);
    NetParams p;
    p.rate_bps = 1e9;
    p.link_delay_ns = 1000;
    p.qcap_bytes = 8 * 4096;
    p.mode = QueueMode::trim;
    EventQueue eq;
    Network net(t, p, eq, 1);
    std::vector<Arrival> got;
    capture_timed(net, eq, t, got);

    for (int i = 0; i < 15; ++i) {
        for (int s : {1, 2}) {
            Packet pk = mk_data(s, 0, net.max_payload());
            pk.hdr.csn = static_cast<uint8_t>(i);
            net.inject(pk);
        }
    }
    eq.run_until_idle(100'000'000'000);
    const auto& c = net.counters();
    CHECK(c.trimmed_pkts > 0);
    CHECK(c.dropped_pkts == 0);  // every packet survives at least as a header
    REQUIRE(got.size() == 30);

    // Trimmed headers of late packets must land before earlier full packets
    // still waiting in the data queue.
    std::vector<int> trimmed_pos, full_pos;
    for (size_t i = 0; i < got.size(); ++i)
        (got[i].pkt.trimmed ? trimmed_pos : full_pos).push_back(static_cast<int>(i));
    REQUIRE_FALSE(trimmed_pos.empty());
    CHECK(trimmed_pos.front() < full_pos.back());
    for (auto idx : trimmed_pos) {
        CHECK(got[idx].pkt.payload_len == net.max_payload());  // length survives
        CHECK(got[idx].pkt.trimmed);
    }
    check_conserved(net);
}

TEST_CASE("trim lane admits a bounded number of headers") {
    // A synchronized wave from many senders hits the hub in one
    // serialization window, overwhelming the header sub-queue.
    Topology t = build_star(24);
    NetParams p;
    p.rate_bps = 1e9;
    p.link_delay_ns = 1000;
    p.qcap_bytes = 2 * 4096;
    p.mode = QueueMode::trim;
    p.trim_queue_depth = 4;
    EventQueue eq;
    Network net(t, p, eq, 1);
    std::vector<Arrival> got;
    capture_all(net, t, got);

    for (int s = 1; s < 24; ++s)
        for (int i = 0; i < 5; ++i) net.inject(mk_data(s, 0, net.max_payload()));
    eq.run_until_idle(100'000'000'000);
    const auto& c = net.counters();
    CHECK(c.trimmed_pkts > 0);
    CHECK(c.dropped_pkts > 0);  // headers beyond the sub-queue depth die
    CHECK(c.delivered_pkts + c.dropped_pkts == 23u * 5u);
    check_conserved(net);
}

TEST_CASE("pause keeps every switch queue within capacity") {
    Topology t = build_star(4);
    NetParams p;
    p.rate_bps = 1e9;
    p.link_delay_ns = 1000;
    p.qcap_bytes = 16 * 4096;
    p.mode = QueueMode::pause;
    EventQueue eq;
    Network net(t, p, eq, 1);
    std::vector<Arrival> got;
    capture_all(net, t, got);

    // three hosts blast the same victim at once
    for (int s = 1; s <= 3; ++s)
        for (int i = 0; i < 100; ++i) net.inject(mk_data(s, 0, net.max_payload()));
    eq.run_until_idle(100'000'000'000);
    const auto& c = net.counters();
    CHECK(c.dropped_pkts == 0);
    CHECK(c.delivered_pkts == 300u);
    CHECK(c.pause_events > 0);
    for (int l = 0; l < net.n_links(); ++l)
        if (!t.is_host(t.links[l].from))  // host egress models the NIC buffer
            CHECK(net.line_max_occupancy(l) <= net.qcap_bytes());
    check_conserved(net);
}

TEST_CASE("injected loss is per packet and statistically honest") {
    Topology t = build_star(3);
    NetParams p;
    p.rate_bps = 100e9;
    p.link_delay_ns = 100;
    p.qcap_bytes = 1 << 24;
    EventQueue eq;
    Network net(t, p, eq, 42);
    std::vector<Arrival> got;
    capture_all(net, t, got);
    net.inject_loss_at_host_egress(0.25);

    const int n = 10000;
    for (int i = 0; i < n; ++i) net.inject(mk_data(0, 1, net.max_payload()));
    eq.run_until_idle(1'000'000'000'000);
    const auto& c = net.counters();
    CHECK(c.loss_dropped_pkts == c.dropped_pkts);
    double mean = n * 0.25, sd = std::sqrt(n * 0.25 * 0.75);
    CHECK(std::abs(static_cast<double>(c.dropped_pkts) - mean) < 3 * sd);
    check_conserved(net);

    // acks are exempt
    std::vector<Arrival> got2;
    capture_all(net, t, got2);
    for (int i = 0; i < 100; ++i) net.inject(mk_ack(0, 1));
    eq.run_until_idle(2'000'000'000'000);
    CHECK(got2.size() == 100);
}

TEST_CASE("identical seeds replay identical loss patterns") {
    auto run = [](uint64_t seed) {
        Topology t = build_star(3);
        NetParams p;
        p.rate_bps = 100e9;
        p.link_delay_ns = 100;
        p.qcap_bytes = 1 << 24;
        EventQueue eq;
        Network net(t, p, eq, seed);
        net.inject_loss_at_host_egress(0.1);
        std::vector<uint8_t> delivered_csn;
        net.set_host_handler(1, [&](Packet&& pk) { delivered_csn.push_back(pk.hdr.csn); });
        for (int i = 0; i < 2000; ++i) {
            Packet pk = mk_data(0, 1, net.max_payload());
            pk.hdr.csn = static_cast<uint8_t>(i);
            net.inject(pk);
        }
        eq.run_until_idle(1'000'000'000'000);
        return delivered_csn;
    };
    auto a = run(7), b = run(7), c = run(8);
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("local transfers bypass the fabric") {
    Topology t = build_star(3);
    NetParams p;
    p.qcap_bytes = 1 << 20;
    EventQueue eq;
    Network net(t, p, eq, 1);
    std::vector<Arrival> got;
    capture_timed(net, eq, t, got);
    net.inject(mk_data(2, 2, 512));
    eq.run_until_idle(1000);
    REQUIRE(got.size() == 1);
    CHECK(got[0].t == 0);
    check_conserved(net);
}
