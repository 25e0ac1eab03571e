#ifndef CHUNKNET_TRANSPORT_HPP
#define CHUNKNET_TRANSPORT_HPP

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "chunknet/cc.hpp"
#include "chunknet/event_queue.hpp"
#include "chunknet/network.hpp"
#include "chunknet/policy.hpp"
#include "chunknet/wire.hpp"

namespace chunknet {

class EqdsReceiver;

struct TransportConfig {
    int engines = 1;      // transmit engines per host
    bool conn_split = false;  // spread one connection's paths over all engines
    int paths = 1;            // sprayable paths per connection
    uint32_t chunk_bytes = 32768;
    LbPolicy lb = LbPolicy::oblivious;
    CcConfig cc;  // per-path congestion control

    // selective: out-of-order chunks accepted, lost chunks retransmitted
    //            individually (dup-ack fast retransmit + RTO backstop)
    // ordered:   connection-wide packet sequence, receiver discards any
    //            out-of-order packet and the sender rewinds (go-back-N)
    enum class Reliability { selective, ordered };
    Reliability reliability = Reliability::selective;

    bool receiver_driven = false;  // credit-gated egress fed by receiver pulls
    SimTime rto_min = 0;  // 0 = 4x (base rtt + one chunk's serialization)
    SimTime rto_max = 0;           // 0 = 64x rto_min
    int max_inflight_msgs = 128;   // per engine, backpressure beyond
    uint32_t drr_quantum = 32768;
    bool rtx_avoid_prev_path = true;
    int dupack_threshold = 8;
    bool carry_payload = false;  // reassemble and hand real bytes to the callback
    // Unsolicited credit a fresh connection may spend before the first
    // grant arrives (receiver-driven mode). -1 = one BDP.
    int64_t initial_credit = -1;
    uint32_t credit_quantum = 32768;  // receiver grant unit
    int credit_bank_quanta = 4;       // unused credit a sender may bank
};

// Chunked multipath transport over a simulated fabric. One instance manages
// every host endpoint: messages are cut into chunks (one control word per
// chunk), sprayed over paths per the policy, and tracked with per-message
// cumulative + selective acknowledgment or a connection-ordered go-back-N
// baseline. Each host runs one or more engines; messages are dispatched to
// the least-loaded eligible engine and each engine serves its
// sub-connections with deficit round robin.
class Transport {
  public:
    struct Stats {
        uint64_t msgs_sent = 0;
        uint64_t msgs_completed = 0;
        uint64_t backpressured = 0;
        uint64_t chunks_sent = 0;
        uint64_t chunk_rtx = 0;
        int64_t rtx_payload_bytes = 0;
        uint64_t fast_rtx = 0;
        uint64_t rtos = 0;
        uint64_t acks_sent = 0;
        uint64_t nacks_sent = 0;
        uint64_t rts_sent = 0;
        uint64_t credit_pkts = 0;
    };

    using CompleteFn =
        std::function<void(uint64_t tag, int src, int dst, uint64_t len,
                           SimTime t, const std::vector<uint8_t>* data)>;
    using PolicyFactory =
        std::function<std::unique_ptr<TransportPolicy>(int src, int dst)>;

    Transport(Network& net, EventQueue& eq, const TransportConfig& cfg,
              uint64_t seed);
    ~Transport();

    // False = backpressured (no free message id / engine at capacity).
    bool send_message(int src, int dst, uint64_t len, uint64_t tag);
    bool send_message_data(int src, int dst,
                           std::shared_ptr<const std::vector<uint8_t>> data,
                           uint64_t tag);

    void set_on_complete(CompleteFn fn) { on_complete_ = std::move(fn); }
    // Replaces the config-derived policy for connections created afterwards.
    void set_policy_factory(PolicyFactory f) { policy_factory_ = std::move(f); }

    const Stats& stats() const { return stats_; }
    const TransportConfig& config() const { return cfg_; }

    // --- introspection (tests, experiment probes) ---
    int64_t path_inflight(int src, int dst, int path) const;
    int64_t outstanding_bytes(int src, int dst) const;  // sum over paths
    int64_t window_available(int src, int dst, int path) const;
    int engine_inflight_msgs(int host, int engine) const;
    uint64_t engine_dispatched(int host, int engine) const;
    int64_t engine_gauge(int host, int engine) const;
    int64_t conn_credit(int src, int dst) const;

  private:
    struct ChunkTx {
        uint32_t index = 0;  // unwrapped chunk sequence within the message
        uint64_t offset = 0;
        uint32_t len = 0;
        bool last = false;
        int path = -1;
        int n_pkts = 0;
        uint64_t psn_base = 0;  // ordered mode
        SimTime tx_time = 0;
        SimTime deadline = 0;
        SimTime not_before = 0;  // pacing hold
        int attempts = 0;
        bool sent = false;
        bool acked = false;
        bool rtx_pending = false;
        int dup_acks = 0;
    };

    struct MsgSend {
        bool live = false;
        uint8_t msg_id = 0;
        uint64_t seq = 0;
        uint64_t tag = 0;
        uint64_t len = 0;
        std::shared_ptr<const std::vector<uint8_t>> data;
        uint64_t chunked = 0;
        std::vector<ChunkTx> chunks;
        uint32_t base_unacked = 0;
        uint32_t acked_chunks = 0;
        int engine = 0;
        bool in_factory = false;  // queued for chunk creation
    };

    struct PendingRef {
        uint8_t msg_id;
        uint32_t chunk;
    };

    struct SubConn {
        int path = 0;
        int engine = 0;
        CongestionControl* cc = nullptr;  // owned by Connection::cc_store
        int64_t inflight = 0;
        std::deque<PendingRef> txq;   // committed chunks awaiting egress
        std::deque<PendingRef> rtxq;  // retransmissions, drained first
        int64_t txq_bytes = 0;
        int64_t deficit = 0;
        int conn = -1;  // back-reference
        bool in_ring = false;
    };

    struct Connection {
        int idx = 0;
        int src = 0, dst = 0;
        uint8_t conn_id = 0;
        // One instance shared by every sub-connection under global CC
        // scope, one per path under per-path scope.
        std::vector<std::unique_ptr<CongestionControl>> cc_store;
        std::vector<SubConn> subs;
        PathScoreboard board{1, 0};
        RngStream rng;
        std::unique_ptr<TransportPolicy> policy;
        std::array<MsgSend, 128> msgs;
        std::vector<uint8_t> free_ids;
        uint64_t next_seq = 1;
        int home_engine = 0;
        // retransmission timing
        int backoff = 1;
        bool timer_armed = false;
        SimTime armed_at = 0;
        // ordered (go-back-N) state
        uint64_t next_psn = 0;
        std::deque<PendingRef> sent_order;
        std::deque<std::pair<PendingRef, uint64_t>> gbn_rtxq;  // (chunk, from psn)
        uint64_t last_rewind_psn = ~uint64_t{0};
        // receiver-driven credit state
        int64_t credit = 0;
        bool rts_outstanding = false;
        bool rts_acked = false;
    };

    struct ChunkRx {
        bool init = false;
        uint32_t len = 0;
        uint64_t offset = 0;
        uint32_t pkts_seen = 0;  // bitmask
        int pkts_expected = 0;
        bool complete = false;
        bool last = false;
        bool nacked = false;  // trim nack sent, not yet answered
        bool ecn = false;
        bool any_rtx = false;
        SimTime tx_time = 0;
        int path = 0;
    };

    struct MsgRecv {
        bool live = false;
        uint64_t seq = 0;
        uint64_t tag = 0;
        uint64_t len = 0;
        std::vector<ChunkRx> chunks;
        uint32_t cum = 0;  // chunks [0, cum) complete
        bool has_last = false;
        uint32_t last_index = 0;
        std::vector<uint8_t> buf;
        uint64_t bytes = 0;
    };

    struct RecvConn {
        int src = 0, dst = 0;
        uint8_t conn_id = 0;
        std::array<MsgRecv, 128> msgs;
        std::array<uint64_t, 128> completed_seq{};  // stale-duplicate guard
        std::unique_ptr<TransportPolicy> policy;    // receiver-side hooks
        // ordered mode
        uint64_t expected_psn = 0;
        bool gap_nacked = false;
    };

    struct Engine {
        std::vector<std::pair<int, int>> ring;  // (conn idx, sub idx)
        size_t ring_pos = 0;
        std::deque<std::pair<int, uint8_t>> factory;  // (conn idx, msg id)
        int inflight_msgs = 0;
        bool pump_scheduled = false;
        uint64_t dispatched = 0;
        int64_t gauge = 0;  // unchunked bytes across dispatched messages
        int64_t committed_unsent = 0;
    };

    struct HostState {
        std::vector<Engine> engines;
        std::map<int, int> conn_by_dst;
        std::map<std::pair<int, uint8_t>, int> rconn_by_src;
    };

    Connection& conn_to(int src, int dst);
    const Connection* find_conn(int src, int dst) const;
    RecvConn& rconn_at(int dst, int src, uint8_t conn_id);
    bool dispatch(Connection& c, MsgSend& m);
    void pump(int host, int engine);
    void schedule_pump(int host, int engine);
    void commit_chunks(int host, Engine& e);
    void egress(int host, Engine& e);
    bool can_send(Connection& c, SubConn& s) const;
    int64_t gated_inflight(const Connection& c, const SubConn& s) const;
    void send_chunk(Connection& c, MsgSend& m, ChunkTx& ch, SubConn& s,
                    bool rtx, uint64_t from_psn);
    void queue_rtx(Connection& c, MsgSend& m, ChunkTx& ch);
    ChunkView view_of(const Connection& c, const MsgSend& m, const ChunkTx& ch) const;

    void handle_packet(int host, Packet&& pkt);
    void handle_data(RecvConn& rc, Packet&& pkt);
    void handle_data_ordered(RecvConn& rc, Packet&& pkt);
    void accept_payload(RecvConn& rc, MsgRecv& mr, const Packet& pkt);
    void chunk_completed(RecvConn& rc, MsgRecv& mr, uint32_t idx, uint8_t msg_id);
    void maybe_deliver(RecvConn& rc, MsgRecv& mr, uint8_t msg_id);
    void send_ack(RecvConn& rc, const MsgRecv& mr, uint8_t msg_id, uint32_t cause);
    void handle_ack(Packet&& pkt);
    void handle_nack(Packet&& pkt);
    void handle_credit(Packet&& pkt);
    void handle_rts(Packet&& pkt);
    void release_chunk(Connection& c, MsgSend& m, ChunkTx& ch, SimTime rtt,
                       bool ecn);
    void msg_finished(Connection& c, MsgSend& m);
    void try_advance_base(Connection& c, MsgSend& m);
    void gbn_rewind(Connection& c, uint64_t expected);

    void arm_rto(Connection& c);
    void rto_fire(int conn_idx, SimTime armed_at);
    SimTime cur_rto(const Connection& c, const SubConn& s) const;
    void maybe_send_rts(Connection& c);
    int64_t pending_bytes(const Connection& c) const;

    Network& net_;
    EventQueue& eq_;
    TransportConfig cfg_;
    uint64_t seed_;
    SimTime rto_min_, rto_max_;
    uint32_t max_pl_;  // payload bytes per packet
    std::vector<HostState> hosts_;
    std::deque<Connection> conns_;
    std::deque<RecvConn> rconns_;
    std::vector<std::unique_ptr<EqdsReceiver>> pacers_;  // per host, eqds mode
    CompleteFn on_complete_;
    PolicyFactory policy_factory_;
    Stats stats_;
    int64_t commit_ahead_;

    friend class EqdsReceiver;
};

}  // namespace chunknet

#endif  // CHUNKNET_TRANSPORT_HPP
