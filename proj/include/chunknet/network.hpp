#ifndef CHUNKNET_NETWORK_HPP
#define CHUNKNET_NETWORK_HPP

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "chunknet/event_queue.hpp"
#include "chunknet/packet.hpp"
#include "chunknet/rng.hpp"
#include "chunknet/topology.hpp"

namespace chunknet {

enum class QueueMode { drop_tail, trim, pause };

struct NetParams {
    double rate_bps = 100e9;
    SimTime link_delay_ns = 1000;
    int64_t qcap_bytes = 0;  // 0 = auto: one BDP of the longest path
    QueueMode mode = QueueMode::drop_tail;
    double ecn_frac = 0.20;     // mark threshold as a fraction of queue capacity
    uint32_t mtu = 4096;        // wire bytes per packet including overhead
    uint32_t hdr_overhead = 64; // per-packet header bytes
    int trim_queue_depth = 16;  // trimmed headers admitted per queue
};

struct TraceEvent {
    SimTime t;
    const char* event;  // deliver | drop | trim | loss | hdr_drop
    int32_t link_id;    // -1 for host delivery
    const Packet* pkt;
};

// Output-queued store-and-forward fabric. Each directed link has a FIFO data
// lane plus a strict-priority control lane; control packets and trimmed
// headers use the latter and are exempt from capacity limits, random loss,
// and pause. Host egress queues stage traffic from host memory: they are
// unbounded and never drop, trim, or mark, though downstream pause still
// gates them. Semantics per queue mode (switch queues):
//   drop_tail - data packet that would exceed capacity is discarded
//   trim      - its payload is discarded and the header forwarded with high
//               priority (up to trim_queue_depth headers per queue)
//   pause     - upstream links into the congested node hold data traffic
//               before the queue can overflow (lossless)
class Network {
  public:
    using Handler = std::function<void(Packet&&)>;
    using TraceSink = std::function<void(const TraceEvent&)>;

    Network(const Topology& topo, const NetParams& p, EventQueue& eq, uint64_t seed);

    void set_host_handler(int host, Handler h);
    void set_trace(TraceSink sink) { trace_ = std::move(sink); }

    // Routes the packet from pkt.src and enqueues it at the source egress.
    // src == dst delivers locally without touching any link.
    void inject(Packet pkt);

    // Every data packet entering this link is independently dropped with
    // probability drop_ratio (control and trimmed headers exempt).
    void inject_loss(int link_id, double drop_ratio);
    // Applies inject_loss to every host egress link: one loss lottery per
    // packet regardless of hop count.
    void inject_loss_at_host_egress(double drop_ratio);

    SimTime ser_ns(uint32_t wire_bytes) const;
    uint32_t max_payload() const { return p_.mtu - p_.hdr_overhead; }
    // Longest-path round trip: full-MTU data out, header-size ack back.
    SimTime base_rtt_ns() const;
    int64_t bdp_bytes() const;
    int64_t qcap_bytes() const { return qcap_; }

    struct Counters {
        uint64_t injected_pkts = 0;
        uint64_t delivered_pkts = 0;  // includes trimmed-header deliveries
        uint64_t dropped_pkts = 0;    // full drops + trim-queue header drops
        uint64_t loss_dropped_pkts = 0;
        uint64_t trimmed_pkts = 0;
        uint64_t ecn_marked_pkts = 0;
        uint64_t pause_events = 0;
        int64_t injected_payload = 0;
        int64_t delivered_payload = 0;
        int64_t dropped_payload = 0;  // full drops + payload cut by trimming
    };
    const Counters& counters() const { return c_; }
    int64_t in_flight_payload() const {
        return c_.injected_payload - c_.delivered_payload - c_.dropped_payload;
    }
    uint64_t in_flight_pkts() const {
        return c_.injected_pkts - c_.delivered_pkts - c_.dropped_pkts;
    }

    int64_t line_occupancy(int link_id) const { return lines_[link_id].data_bytes; }
    int64_t line_max_occupancy(int link_id) const { return lines_[link_id].max_bytes; }
    int n_links() const { return static_cast<int>(lines_.size()); }

    const Topology& topo() const { return topo_; }
    const NetParams& params() const { return p_; }

  private:
    struct Line {
        int32_t from;
        int32_t to;
        std::deque<Packet> data;
        std::deque<Packet> prio;
        int64_t data_bytes = 0;  // queued + in-serialization wire bytes
        int64_t max_bytes = 0;
        int trim_hdrs = 0;
        bool busy = false;
        bool paused_self = false;
        int64_t pause_thresh = 0;  // depends on the from-node's in-degree
        int64_t resume_thresh = 0;
        double loss_ratio = 0;
        std::optional<RngStream> loss_rng;
    };

    void enqueue(int link_id, Packet&& pkt);
    void try_start(int link_id);
    void finish(int link_id, int64_t wire, bool from_data, Packet&& pkt);
    void arrival(int node, Packet&& pkt);
    void deliver(Packet&& pkt);
    void drop(const Packet& pkt, const char* why, int link_id);
    void emit(const char* ev, int link_id, const Packet& pkt);

    const Topology topo_;
    NetParams p_;
    EventQueue& eq_;
    uint64_t seed_;
    int64_t qcap_;
    int64_t ecn_thresh_;
    std::vector<Line> lines_;
    std::vector<std::vector<int>> lines_into_;  // per node: ingress link ids
    std::vector<int> pause_count_;  // per node: # of its egress queues asserting pause
    std::vector<Handler> handlers_;
    Counters c_;
    TraceSink trace_;
    uint64_t next_uid_ = 0;
};

}  // namespace chunknet

#endif  // CHUNKNET_NETWORK_HPP
