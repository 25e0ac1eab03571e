#include "chunknet/transport.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <stdexcept>
#include <string>

#include "chunknet/eqds.hpp"

namespace chunknet {

namespace {
constexpr int kCsnWindow = 128;  // max unacked chunks per message
constexpr int kBackoffCap = 64;
}  // namespace

Transport::Transport(Network& net, EventQueue& eq, const TransportConfig& cfg,
                     uint64_t seed)
    : net_(net), eq_(eq), cfg_(cfg), seed_(seed) {
    if (cfg_.engines < 1) throw std::invalid_argument("engines must be >= 1");
    if (cfg_.paths < 1) throw std::invalid_argument("paths must be >= 1");
    if (cfg_.reliability == TransportConfig::Reliability::ordered &&
        (cfg_.paths != 1 || cfg_.engines != 1 || cfg_.conn_split))
        throw std::logic_error(
            "ordered delivery needs a single path and a single engine");
    max_pl_ = net_.max_payload();
    // Default timeout floor: an unloaded round trip plus the serialization
    // of one whole chunk, which dominates the first-chunk ack latency on
    // slow links. One MTU's worth alone fires spuriously.
    uint32_t chunk_pkts = (cfg_.chunk_bytes + max_pl_ - 1) / max_pl_;
    SimTime chunk_ser = net_.ser_ns(cfg_.chunk_bytes +
                                    chunk_pkts * net_.params().hdr_overhead);
    rto_min_ = cfg_.rto_min > 0 ? cfg_.rto_min
                                : 4 * (net_.base_rtt_ns() + chunk_ser);
    rto_max_ = cfg_.rto_max > 0 ? cfg_.rto_max : 64 * rto_min_;
    commit_ahead_ = std::max<int64_t>(
        {2 * int64_t{cfg_.chunk_bytes}, 2 * int64_t{cfg_.drr_quantum},
         net_.bdp_bytes()});

    int n = net_.topo().n_hosts;
    hosts_.resize(n);
    for (auto& h : hosts_) h.engines.resize(cfg_.engines);

    if (cfg_.receiver_driven) {
        EqdsParams ep;
        ep.quantum = cfg_.credit_quantum;
        uint32_t pkts = (ep.quantum + max_pl_ - 1) / max_pl_;
        ep.tick_ns =
            net_.ser_ns(ep.quantum + pkts * net_.params().hdr_overhead);
        ep.bank_cap = cfg_.credit_bank_quanta * int64_t{ep.quantum};
        pacers_.resize(n);
        for (int hst = 0; hst < n; ++hst) {
            pacers_[hst] = std::make_unique<EqdsReceiver>(
                eq_, ep,
                [this, hst](int sender, uint32_t bytes) {
                    Packet p;
                    p.kind = PacketKind::credit;
                    p.src = hst;
                    p.dst = sender;
                    p.credit_bytes = bytes;
                    ++stats_.credit_pkts;
                    net_.inject(std::move(p));
                },
                [this, hst](int sender) {
                    Packet p;
                    p.kind = PacketKind::rts_ack;
                    p.src = hst;
                    p.dst = sender;
                    net_.inject(std::move(p));
                });
        }
    }

    for (int hst = 0; hst < n; ++hst)
        net_.set_host_handler(
            hst, [this, hst](Packet&& p) { handle_packet(hst, std::move(p)); });
}

Transport::~Transport() = default;

// ---------------------------------------------------------------- senders

Transport::Connection& Transport::conn_to(int src, int dst) {
    auto& by_dst = hosts_[src].conn_by_dst;
    auto it = by_dst.find(dst);
    if (it != by_dst.end()) return conns_[it->second];

    int idx = static_cast<int>(conns_.size());
    conns_.emplace_back();
    Connection& c = conns_.back();
    c.idx = idx;
    c.src = src;
    c.dst = dst;
    c.conn_id = static_cast<uint8_t>(idx & 0xFF);

    int n_paths = 1;
    if (src != dst)
        n_paths = std::min(cfg_.paths, net_.topo().path_count(src, dst));
    c.board = PathScoreboard(n_paths, net_.base_rtt_ns());
    c.rng = RngStream(seed_, "transport.conn", static_cast<uint64_t>(idx));
    c.policy = policy_factory_
                   ? policy_factory_(src, dst)
                   : std::make_unique<DefaultPolicy>(cfg_.chunk_bytes, cfg_.lb,
                                                     cfg_.rtx_avoid_prev_path);

    // Home engine: least-loaded at creation, ties to the lowest id.
    int home = 0;
    for (int e = 1; e < cfg_.engines; ++e)
        if (hosts_[src].engines[e].gauge < hosts_[src].engines[home].gauge)
            home = e;
    c.home_engine = home;

    bool global_cc = cfg_.cc.scope == CcConfig::Scope::global;
    c.cc_store.reserve(global_cc ? 1 : n_paths);
    c.cc_store.push_back(make_cc(cfg_.cc));
    c.subs.resize(n_paths);
    for (int p = 0; p < n_paths; ++p) {
        SubConn& s = c.subs[p];
        s.path = p;
        s.engine = cfg_.conn_split ? p % cfg_.engines : home;
        if (!global_cc && p > 0) c.cc_store.push_back(make_cc(cfg_.cc));
        s.cc = global_cc ? c.cc_store[0].get() : c.cc_store[p].get();
        s.conn = idx;
    }

    c.free_ids.reserve(128);
    for (int i = 127; i >= 0; --i)
        c.free_ids.push_back(static_cast<uint8_t>(i));

    if (cfg_.receiver_driven)
        c.credit = cfg_.initial_credit >= 0 ? cfg_.initial_credit
                                            : net_.bdp_bytes();

    by_dst.emplace(dst, idx);
    return c;
}

const Transport::Connection* Transport::find_conn(int src, int dst) const {
    auto it = hosts_[src].conn_by_dst.find(dst);
    return it == hosts_[src].conn_by_dst.end() ? nullptr : &conns_[it->second];
}

bool Transport::send_message(int src, int dst, uint64_t len, uint64_t tag) {
    if (len == 0) throw std::invalid_argument("empty message");
    Connection& c = conn_to(src, dst);
    if (c.free_ids.empty()) {
        ++stats_.backpressured;
        return false;
    }
    uint8_t id = c.free_ids.back();

    MsgSend& m = c.msgs[id];
    m = MsgSend{};
    m.msg_id = id;
    m.seq = c.next_seq++;
    m.tag = tag;
    m.len = len;
    if (!dispatch(c, m)) {
        ++stats_.backpressured;
        return false;
    }
    c.free_ids.pop_back();
    m.live = true;
    ++stats_.msgs_sent;
    pump(src, m.engine);
    return true;
}

bool Transport::send_message_data(
    int src, int dst, std::shared_ptr<const std::vector<uint8_t>> data,
    uint64_t tag) {
    if (!data || data->empty()) throw std::invalid_argument("empty message");
    Connection& c = conn_to(src, dst);
    if (c.free_ids.empty()) {
        ++stats_.backpressured;
        return false;
    }
    uint8_t id = c.free_ids.back();
    MsgSend& m = c.msgs[id];
    m = MsgSend{};
    m.msg_id = id;
    m.seq = c.next_seq++;
    m.tag = tag;
    m.len = data->size();
    m.data = std::move(data);
    if (!dispatch(c, m)) {
        ++stats_.backpressured;
        return false;
    }
    c.free_ids.pop_back();
    m.live = true;
    ++stats_.msgs_sent;
    pump(src, m.engine);
    return true;
}

bool Transport::dispatch(Connection& c, MsgSend& m) {
    auto& engines = hosts_[c.src].engines;
    int pick;
    if (cfg_.conn_split) {
        pick = 0;
        for (int e = 1; e < cfg_.engines; ++e)
            if (engines[e].gauge < engines[pick].gauge) pick = e;
    } else {
        pick = c.home_engine;
    }
    Engine& e = engines[pick];
    if (e.inflight_msgs >= cfg_.max_inflight_msgs) return false;
    m.engine = pick;
    ++e.inflight_msgs;
    ++e.dispatched;
    e.gauge += static_cast<int64_t>(m.len);
    e.factory.push_back({c.idx, m.msg_id});
    m.in_factory = true;
    if (cfg_.receiver_driven) maybe_send_rts(c);
    return true;
}

// ------------------------------------------------------------- the pump

void Transport::schedule_pump(int host, int engine) {
    Engine& e = hosts_[host].engines[engine];
    if (e.pump_scheduled) return;
    e.pump_scheduled = true;
    eq_.schedule_in(0, [this, host, engine] {
        hosts_[host].engines[engine].pump_scheduled = false;
        pump(host, engine);
    });
}

void Transport::pump(int host, int engine) {
    Engine& e = hosts_[host].engines[engine];
    for (;;) {
        commit_chunks(host, e);
        uint64_t before = stats_.chunks_sent + stats_.chunk_rtx;
        egress(host, e);
        if (stats_.chunks_sent + stats_.chunk_rtx == before) break;
    }
}

// Stage A: cut queued messages into chunks and bind each chunk to a path.
// One chunk per message per rotation keeps concurrent messages interleaved.
void Transport::commit_chunks(int host, Engine& e) {
    size_t stalled = 0;
    while (!e.factory.empty() && stalled < e.factory.size() &&
           e.committed_unsent < commit_ahead_) {
        auto [ci, mid] = e.factory.front();
        e.factory.pop_front();
        Connection& c = conns_[ci];
        MsgSend& m = c.msgs[mid];
        if (!m.live || m.chunked >= m.len) {
            m.in_factory = false;
            stalled = 0;
            continue;
        }
        // Chunk sequence window: at most 128 unacked chunks per message.
        if (m.chunks.size() - m.base_unacked >= kCsnWindow) {
            e.factory.push_back({ci, mid});
            ++stalled;
            continue;
        }

        uint64_t remaining = m.len - m.chunked;
        uint32_t sz = c.policy->on_chunk_size(remaining);
        if (sz < 1 || sz > remaining)
            throw std::logic_error("policy chunk size " + std::to_string(sz) +
                                   " outside [1, " + std::to_string(remaining) +
                                   "]");

        m.chunks.emplace_back();
        ChunkTx& ch = m.chunks.back();
        ch.index = static_cast<uint32_t>(m.chunks.size() - 1);
        ch.offset = m.chunked;
        ch.len = sz;
        ch.last = (m.chunked + sz == m.len);
        ch.n_pkts = static_cast<int>((sz + max_pl_ - 1) / max_pl_);
        m.chunked += sz;
        e.gauge -= sz;

        ChunkView v = view_of(c, m, ch);
        int p = c.policy->on_select_path(v, c.board, c.rng);
        if (p < 0 || p >= static_cast<int>(c.subs.size()))
            throw std::logic_error("policy path " + std::to_string(p) +
                                   " outside [0, " +
                                   std::to_string(c.subs.size()) + ")");
        ch.path = p;
        SimTime pace = c.policy->on_pacing_chunk(v);
        if (pace < 0) throw std::logic_error("negative pacing delay");
        ch.not_before = eq_.now() + pace;

        SubConn& s = c.subs[p];
        s.txq.push_back({mid, ch.index});
        s.txq_bytes += sz;
        e.committed_unsent += sz;
        if (!s.in_ring) {
            s.in_ring = true;
            hosts_[host].engines[s.engine].ring.push_back(
                {ci, p});
        }
        if (s.engine != static_cast<int>(&e - hosts_[host].engines.data()))
            schedule_pump(host, s.engine);

        if (m.chunked < m.len)
            e.factory.push_back({ci, mid});
        else
            m.in_factory = false;
        stalled = 0;
    }
}

bool Transport::can_send(Connection& c, SubConn& s) const {
    if (gated_inflight(c, s) >= s.cc->cwnd_bytes()) return false;
    if (cfg_.receiver_driven && c.credit <= 0) return false;
    return true;
}

// The inflight volume the congestion window gates: the whole connection's
// under global scope, one path's under per-path scope.
int64_t Transport::gated_inflight(const Connection& c, const SubConn& s) const {
    if (cfg_.cc.scope != CcConfig::Scope::global) return s.inflight;
    int64_t total = 0;
    for (const SubConn& sub : c.subs) total += sub.inflight;
    return total;
}

// Stage B: retransmissions first, then deficit round robin over the
// sub-connections this engine owns.
void Transport::egress(int host, Engine& e) {
    SimTime now = eq_.now();

    // Retransmission pass, exempt from the round-robin deficit.
    for (auto [ci, si] : e.ring) {
        Connection& c = conns_[ci];
        SubConn& s = c.subs[si];
        if (cfg_.reliability == TransportConfig::Reliability::ordered &&
            si == 0) {
            while (!c.gbn_rtxq.empty() && can_send(c, s)) {
                auto [ref, from] = c.gbn_rtxq.front();
                MsgSend& m = c.msgs[ref.msg_id];
                if (!m.live || ref.chunk >= m.chunks.size()) {
                    c.gbn_rtxq.pop_front();
                    continue;
                }
                ChunkTx& ch = m.chunks[ref.chunk];
                if (ch.acked || !ch.rtx_pending) {
                    c.gbn_rtxq.pop_front();
                    continue;
                }
                c.gbn_rtxq.pop_front();
                send_chunk(c, m, ch, s, true, from);
            }
        }
        while (!s.rtxq.empty() && can_send(c, s)) {
            PendingRef ref = s.rtxq.front();
            MsgSend& m = c.msgs[ref.msg_id];
            if (!m.live || ref.chunk >= m.chunks.size()) {
                s.rtxq.pop_front();
                continue;
            }
            ChunkTx& ch = m.chunks[ref.chunk];
            if (ch.acked || !ch.rtx_pending) {
                s.rtxq.pop_front();
                continue;
            }
            s.rtxq.pop_front();
            send_chunk(c, m, ch, s, true, 0);
        }
    }

    size_t n = e.ring.size();
    if (n == 0) {
        if (cfg_.receiver_driven)
            for (auto& c : conns_)
                if (c.src == host) maybe_send_rts(c);
        return;
    }
    size_t idle_visits = 0;
    while (idle_visits < n) {
        auto [ci, si] = e.ring[e.ring_pos % n];
        ++e.ring_pos;
        Connection& c = conns_[ci];
        SubConn& s = c.subs[si];

        if (s.txq.empty()) {
            s.deficit = 0;
            ++idle_visits;
            continue;
        }
        s.deficit = std::min<int64_t>(s.deficit + cfg_.drr_quantum,
                                      cfg_.drr_quantum);
        bool sent_any = false;
        while (!s.txq.empty() && s.deficit > 0 && can_send(c, s)) {
            PendingRef ref = s.txq.front();
            MsgSend& m = c.msgs[ref.msg_id];
            if (!m.live || ref.chunk >= m.chunks.size()) {
                s.txq.pop_front();
                continue;
            }
            ChunkTx& ch = m.chunks[ref.chunk];
            if (ch.sent) {  // superseded (should not happen for fresh chunks)
                s.txq.pop_front();
                s.txq_bytes -= ch.len;
                continue;
            }
            if (ch.not_before > now) {
                eq_.schedule(ch.not_before, [this, host, eng = s.engine] {
                    pump(host, eng);
                });
                break;
            }
            s.txq.pop_front();
            s.txq_bytes -= ch.len;
            hosts_[host].engines[m.engine].committed_unsent -= ch.len;
            s.deficit -= ch.len;
            send_chunk(c, m, ch, s, false, 0);
            sent_any = true;
        }
        if (s.txq.empty()) s.deficit = 0;
        if (sent_any)
            idle_visits = 0;
        else
            ++idle_visits;
    }

    if (cfg_.receiver_driven)
        for (auto [ci, si] : e.ring) {
            (void)si;
            maybe_send_rts(conns_[ci]);
        }
}

void Transport::send_chunk(Connection& c, MsgSend& m, ChunkTx& ch, SubConn& s,
                           bool rtx, uint64_t from_psn) {
    SimTime now = eq_.now();
    bool ordered = cfg_.reliability == TransportConfig::Reliability::ordered;

    int start_pkt = 0;
    if (ordered) {
        if (ch.attempts == 0) {
            ch.psn_base = c.next_psn;
            c.next_psn += static_cast<uint64_t>(ch.n_pkts);
            c.sent_order.push_back({m.msg_id, ch.index});
        } else if (from_psn > ch.psn_base) {
            start_pkt = static_cast<int>(from_psn - ch.psn_base);
        }
    }

    ++ch.attempts;
    ch.sent = true;
    ch.rtx_pending = false;
    ch.dup_acks = 0;
    ch.tx_time = now;
    ch.deadline = now + cur_rto(c, s) * c.backoff;
    ch.path = s.path;

    int64_t bytes = 0;
    for (int pi = start_pkt; pi < ch.n_pkts; ++pi) {
        Packet p;
        p.kind = PacketKind::data;
        p.src = c.src;
        p.dst = c.dst;
        p.path_id = s.path;
        p.hdr.conn_id = c.conn_id;
        p.hdr.msg_id = m.msg_id;
        p.hdr.csn = static_cast<uint8_t>(ch.index & 0xFF);
        p.hdr.last_chunk = ch.last;
        p.chunk_offset = ch.offset;
        p.chunk_len = ch.len;
        p.seq_in_chunk = static_cast<uint32_t>(pi);
        uint64_t off = static_cast<uint64_t>(pi) * max_pl_;
        p.payload_len = static_cast<uint32_t>(
            std::min<uint64_t>(max_pl_, ch.len - off));
        if (ordered) p.conn_psn = ch.psn_base + static_cast<uint64_t>(pi);
        p.tx_time = now;
        p.is_rtx = rtx || ch.attempts > 1;
        p.msg_seq = m.seq;
        p.msg_tag = m.tag;
        p.msg_len = m.len;
        p.msg_data = m.data;
        bytes += p.payload_len;
        net_.inject(std::move(p));
    }

    s.inflight += ch.len;
    if (cfg_.receiver_driven) c.credit -= bytes;
    if (rtx) {
        ++stats_.chunk_rtx;
        stats_.rtx_payload_bytes += bytes;
    } else {
        ++stats_.chunks_sent;
    }
    arm_rto(c);
}

ChunkView Transport::view_of(const Connection& c, const MsgSend& m,
                             const ChunkTx& ch) const {
    ChunkView v;
    v.src = c.src;
    v.dst = c.dst;
    v.msg_id = m.msg_id;
    v.msg_seq = m.seq;
    v.msg_len = m.len;
    v.offset = ch.offset;
    v.len = ch.len;
    v.csn = static_cast<uint8_t>(ch.index & 0xFF);
    v.last = ch.last;
    v.attempts = ch.attempts;
    v.prev_path = ch.attempts > 0 ? ch.path : -1;
    v.remaining = m.len - m.chunked;
    return v;
}

// Take a lost chunk out of flight and queue it for retransmission on a
// policy-chosen path.
void Transport::queue_rtx(Connection& c, MsgSend& m, ChunkTx& ch) {
    if (ch.acked || ch.rtx_pending || !ch.sent) return;
    ch.rtx_pending = true;
    ch.dup_acks = 0;
    SubConn& old_sub = c.subs[ch.path];
    old_sub.inflight -= ch.len;
    if (old_sub.inflight < 0) old_sub.inflight = 0;
    old_sub.cc->on_loss(eq_.now());

    ChunkView v = view_of(c, m, ch);
    int p = c.policy->on_tx_rtx_chunk(v, c.board, c.rng);
    if (p == -1) p = c.policy->on_select_path(v, c.board, c.rng);
    if (p < 0 || p >= static_cast<int>(c.subs.size()))
        throw std::logic_error("policy rtx path " + std::to_string(p) +
                               " outside [0, " + std::to_string(c.subs.size()) +
                               ")");
    ch.path = p;
    SubConn& ns = c.subs[p];
    ns.rtxq.push_back({m.msg_id, ch.index});
    // The retransmit path may be one that never carried a fresh chunk, so
    // make sure its sub-connection is visible to the egress loop.
    if (!ns.in_ring) {
        ns.in_ring = true;
        hosts_[c.src].engines[ns.engine].ring.push_back({c.idx, p});
    }
    schedule_pump(c.src, ns.engine);
}

// --------------------------------------------------------------- receive

Transport::RecvConn& Transport::rconn_at(int dst, int src, uint8_t conn_id) {
    auto& by_src = hosts_[dst].rconn_by_src;
    auto key = std::make_pair(src, conn_id);
    auto it = by_src.find(key);
    if (it != by_src.end()) return rconns_[it->second];
    int idx = static_cast<int>(rconns_.size());
    rconns_.emplace_back();
    RecvConn& rc = rconns_.back();
    rc.src = src;
    rc.dst = dst;
    rc.conn_id = conn_id;
    rc.policy = policy_factory_
                    ? policy_factory_(src, dst)
                    : std::make_unique<DefaultPolicy>(
                          cfg_.chunk_bytes, cfg_.lb, cfg_.rtx_avoid_prev_path);
    by_src.emplace(key, idx);
    return rc;
}

void Transport::handle_packet(int host, Packet&& pkt) {
    switch (pkt.kind) {
        case PacketKind::data: {
            RecvConn& rc = rconn_at(host, pkt.src, pkt.hdr.conn_id);
            if (cfg_.reliability == TransportConfig::Reliability::ordered)
                handle_data_ordered(rc, std::move(pkt));
            else
                handle_data(rc, std::move(pkt));
            break;
        }
        case PacketKind::ack:
            handle_ack(std::move(pkt));
            break;
        case PacketKind::nack:
            handle_nack(std::move(pkt));
            break;
        case PacketKind::credit:
            handle_credit(std::move(pkt));
            break;
        case PacketKind::rts:
            handle_rts(std::move(pkt));
            break;
        case PacketKind::rts_ack: {
            auto it = hosts_[host].conn_by_dst.find(pkt.src);
            if (it != hosts_[host].conn_by_dst.end())
                conns_[it->second].rts_acked = true;
            break;
        }
    }
}

void Transport::handle_data(RecvConn& rc, Packet&& pkt) {
    uint8_t mid = pkt.hdr.msg_id;
    MsgRecv& mr = rc.msgs[mid];

    // Duplicate of an already-delivered message: re-ack so the sender can
    // release its copy (the acks that completed it may have been lost).
    if (pkt.msg_seq <= rc.completed_seq[mid]) {
        if (pkt.trimmed) return;
        Packet ack;
        ack.kind = PacketKind::ack;
        ack.src = rc.dst;
        ack.dst = rc.src;
        ack.hdr = pkt.hdr;
        ack.msg_seq = pkt.msg_seq;
        ack.cum_valid = true;
        ack.cum_csn = pkt.hdr.csn;
        ++stats_.acks_sent;
        net_.inject(std::move(ack));
        return;
    }
    if (mr.live && pkt.msg_seq < mr.seq) return;  // obsolete generation
    if (mr.live && pkt.msg_seq > mr.seq)
        throw std::logic_error("message id reused before completion");

    if (!mr.live) {
        mr = MsgRecv{};
        mr.live = true;
        mr.seq = pkt.msg_seq;
        mr.tag = pkt.msg_tag;
        mr.len = pkt.msg_len;
    }

    // Unwrap the 8-bit csn against the receive cursor.
    uint8_t rel = static_cast<uint8_t>(pkt.hdr.csn -
                                       static_cast<uint8_t>(mr.cum & 0xFF));
    if (rel >= kCsnWindow) {
        // Behind the cursor: duplicate of a chunk already consumed in order.
        if (!pkt.trimmed) send_ack(rc, mr, mid, pkt.hdr.csn);
        return;
    }
    uint32_t idx = mr.cum + rel;
    if (idx >= mr.chunks.size()) mr.chunks.resize(idx + 1);
    ChunkRx& cr = mr.chunks[idx];
    if (!cr.init) {
        cr.init = true;
        cr.len = pkt.chunk_len;
        cr.offset = pkt.chunk_offset;
        cr.pkts_expected =
            static_cast<int>((pkt.chunk_len + max_pl_ - 1) / max_pl_);
    }
    if (pkt.hdr.last_chunk && !mr.has_last) {
        mr.has_last = true;
        mr.last_index = idx;
    }

    if (cr.complete) {
        // Stale retransmission of a finished chunk.
        if (!pkt.trimmed) send_ack(rc, mr, mid, pkt.hdr.csn);
        return;
    }

    if (pkt.trimmed) {
        if (!cr.nacked) {
            cr.nacked = true;
            Packet nk;
            nk.kind = PacketKind::nack;
            nk.src = rc.dst;
            nk.dst = rc.src;
            nk.hdr = pkt.hdr;
            nk.msg_seq = pkt.msg_seq;
            nk.nack_csn = pkt.hdr.csn;
            nk.nack_trim = true;
            ++stats_.nacks_sent;
            net_.inject(std::move(nk));
            if (cfg_.receiver_driven)
                pacers_[rc.dst]->on_trim(rc.src, pkt.chunk_len);
        }
        return;
    }

    uint32_t bit = uint32_t{1} << pkt.seq_in_chunk;
    if (cr.pkts_seen & bit) return;  // duplicate packet of a live chunk
    cr.pkts_seen |= bit;
    cr.nacked = false;
    cr.ecn |= pkt.ecn;
    cr.any_rtx |= pkt.is_rtx;
    cr.tx_time = pkt.tx_time;
    cr.path = pkt.path_id;
    accept_payload(rc, mr, pkt);

    if (std::popcount(cr.pkts_seen) == cr.pkts_expected)
        chunk_completed(rc, mr, idx, mid);
}

void Transport::handle_data_ordered(RecvConn& rc, Packet&& pkt) {
    if (pkt.conn_psn > rc.expected_psn ||
        (pkt.trimmed && pkt.conn_psn == rc.expected_psn)) {
        // Gap (or a trimmed head-of-line packet): everything from the
        // expected sequence onward must be resent.
        if (!rc.gap_nacked) {
            rc.gap_nacked = true;
            Packet nk;
            nk.kind = PacketKind::nack;
            nk.src = rc.dst;
            nk.dst = rc.src;
            nk.hdr = pkt.hdr;
            nk.nack_psn = rc.expected_psn;
            nk.nack_trim = pkt.trimmed;
            ++stats_.nacks_sent;
            net_.inject(std::move(nk));
        }
        return;
    }
    if (pkt.trimmed) return;  // stale trimmed duplicate below the cursor
    if (pkt.conn_psn == rc.expected_psn) {
        ++rc.expected_psn;
        rc.gap_nacked = false;
    }
    // In-order packet, or a duplicate below the cursor (handle_data re-acks
    // its chunk if it was already completed).
    handle_data(rc, std::move(pkt));
}

void Transport::accept_payload(RecvConn& rc, MsgRecv& mr, const Packet& pkt) {
    (void)rc;
    mr.bytes += pkt.payload_len;
    if (!cfg_.carry_payload || !pkt.msg_data) return;
    if (mr.buf.size() != mr.len) mr.buf.resize(mr.len);
    uint64_t off =
        pkt.chunk_offset + uint64_t{pkt.seq_in_chunk} * max_pl_;
    if (off + pkt.payload_len > pkt.msg_data->size())
        throw std::logic_error("payload slice outside message bounds");
    std::memcpy(mr.buf.data() + off, pkt.msg_data->data() + off,
                pkt.payload_len);
}

void Transport::chunk_completed(RecvConn& rc, MsgRecv& mr, uint32_t idx,
                                uint8_t msg_id) {
    ChunkRx& cr = mr.chunks[idx];
    cr.complete = true;
    while (mr.cum < mr.chunks.size() && mr.chunks[mr.cum].init &&
           mr.chunks[mr.cum].complete)
        ++mr.cum;

    if (rc.policy) {
        ChunkView v;
        v.src = rc.src;
        v.dst = rc.dst;
        v.msg_id = msg_id;
        v.msg_seq = mr.seq;
        v.msg_len = mr.len;
        v.offset = cr.offset;
        v.len = cr.len;
        v.csn = static_cast<uint8_t>(idx & 0xFF);
        v.last = idx == mr.last_index && mr.has_last;
        if (cr.any_rtx)
            rc.policy->on_rx_rtx_chunk(v);
        else
            rc.policy->on_rx_chunk(v);
    }
    if (cfg_.receiver_driven)
        pacers_[rc.dst]->on_chunk(rc.src, cr.len, cr.any_rtx);

    send_ack(rc, mr, msg_id, static_cast<uint8_t>(idx & 0xFF));
    maybe_deliver(rc, mr, msg_id);
}

void Transport::send_ack(RecvConn& rc, const MsgRecv& mr, uint8_t msg_id,
                         uint32_t cause) {
    Packet ack;
    ack.kind = PacketKind::ack;
    ack.src = rc.dst;
    ack.dst = rc.src;
    ack.hdr.conn_id = rc.conn_id;
    ack.hdr.msg_id = msg_id;
    ack.hdr.csn = static_cast<uint8_t>(cause & 0xFF);
    ack.msg_seq = mr.seq;
    ack.cum_valid = mr.cum > 0;
    ack.cum_csn = static_cast<uint8_t>((mr.cum - 1) & 0xFF);
    for (int j = 0; j < 128; ++j) {
        uint64_t i = mr.cum + static_cast<uint64_t>(j);
        if (i < mr.chunks.size() && mr.chunks[i].complete)
            sack_set(ack.sack, j);
    }
    // Echo state of the chunk named by the cause csn, when it is live.
    uint8_t rel = static_cast<uint8_t>(static_cast<uint8_t>(cause) -
                                       static_cast<uint8_t>(mr.cum & 0xFF));
    uint32_t idx = mr.cum + rel;
    if (rel < kCsnWindow && idx < mr.chunks.size() && mr.chunks[idx].init) {
        const ChunkRx& cr = mr.chunks[idx];
        ack.echo_tx_time = cr.tx_time;
        ack.echo_path_id = cr.path;
        ack.ecn_echo = cr.ecn;
    }
    ++stats_.acks_sent;
    net_.inject(std::move(ack));
}

void Transport::maybe_deliver(RecvConn& rc, MsgRecv& mr, uint8_t msg_id) {
    if (!mr.has_last || mr.cum != mr.last_index + 1) return;
    if (on_complete_) {
        const std::vector<uint8_t>* data =
            (cfg_.carry_payload && mr.buf.size() == mr.len) ? &mr.buf : nullptr;
        on_complete_(mr.tag, rc.src, rc.dst, mr.len, eq_.now(), data);
    }
    rc.completed_seq[msg_id] = mr.seq;
    mr = MsgRecv{};
}

// ------------------------------------------------------------ sender acks

void Transport::release_chunk(Connection& c, MsgSend& m, ChunkTx& ch,
                              SimTime rtt, bool ecn) {
    if (ch.acked || !ch.sent) return;
    ch.acked = true;
    ++m.acked_chunks;
    SubConn& s = c.subs[ch.path];
    if (!ch.rtx_pending) {
        s.inflight -= ch.len;
        if (s.inflight < 0) s.inflight = 0;
    }
    ch.rtx_pending = false;
    s.cc->on_ack(eq_.now(), ch.len, rtt, ecn);
    if (rtt > 0) {
        c.board.record_rtt(ch.path, rtt);
        c.board.record_ecn(ch.path, ecn);
    }
}

void Transport::try_advance_base(Connection& c, MsgSend& m) {
    (void)c;
    while (m.base_unacked < m.chunks.size() && m.chunks[m.base_unacked].acked)
        ++m.base_unacked;
}

void Transport::msg_finished(Connection& c, MsgSend& m) {
    uint8_t mid = m.msg_id;
    Engine& e = hosts_[c.src].engines[m.engine];
    --e.inflight_msgs;
    ++stats_.msgs_completed;
    // Purge any stale queue references before the id can be reused.
    for (auto& s : c.subs)
        std::erase_if(s.rtxq,
                      [mid](const PendingRef& r) { return r.msg_id == mid; });
    std::erase_if(c.sent_order,
                  [mid](const PendingRef& r) { return r.msg_id == mid; });
    std::erase_if(c.gbn_rtxq, [mid](const auto& pr) {
        return pr.first.msg_id == mid;
    });
    m = MsgSend{};
    c.free_ids.push_back(mid);
}

void Transport::handle_ack(Packet&& pkt) {
    int host = pkt.dst;
    auto it = hosts_[host].conn_by_dst.find(pkt.src);
    if (it == hosts_[host].conn_by_dst.end()) return;
    Connection& c = conns_[it->second];
    MsgSend& m = c.msgs[pkt.hdr.msg_id];
    if (!m.live || m.seq != pkt.msg_seq) return;

    SimTime now = eq_.now();
    uint8_t base_csn = static_cast<uint8_t>(m.base_unacked & 0xFF);
    uint32_t nchunks = static_cast<uint32_t>(m.chunks.size());
    int newly = 0;

    // The cause chunk carries the only trustworthy RTT echo.
    int cause_idx = -1;
    {
        uint8_t rel = static_cast<uint8_t>(pkt.hdr.csn - base_csn);
        if (rel < kCsnWindow && m.base_unacked + rel < nchunks)
            cause_idx = static_cast<int>(m.base_unacked + rel);
    }
    if (cause_idx >= 0) {
        ChunkTx& ch = m.chunks[cause_idx];
        if (ch.sent && !ch.acked) {
            SimTime rtt = 0;
            if (ch.attempts == 1 && pkt.echo_tx_time == ch.tx_time &&
                now > pkt.echo_tx_time)
                rtt = now - pkt.echo_tx_time;
            release_chunk(c, m, ch, rtt, pkt.ecn_echo);
            ++newly;
            if (c.policy) {
                AckView av;
                av.path = ch.path;
                av.rtt = rtt;
                av.ecn = pkt.ecn_echo;
                av.acked_bytes = ch.len;
                c.policy->on_rx_ack(av);
            }
        }
    }

    // Cumulative prefix, then the selective bitmap relative to it.
    uint32_t rcum = m.base_unacked;
    if (pkt.cum_valid) {
        uint8_t rel1 = static_cast<uint8_t>(
            static_cast<uint8_t>(pkt.cum_csn + 1) - base_csn);
        if (rel1 <= kCsnWindow) rcum = m.base_unacked + rel1;
    } else {
        rcum = 0;
    }
    for (uint32_t i = m.base_unacked; i < std::min(rcum, nchunks); ++i) {
        ChunkTx& ch = m.chunks[i];
        if (ch.sent && !ch.acked) {
            release_chunk(c, m, ch, 0, false);
            ++newly;
        }
    }
    for (int j = 0; j < 128; ++j) {
        if (!sack_get(pkt.sack, j)) continue;
        uint64_t i = uint64_t{rcum} + static_cast<uint64_t>(j);
        if (i >= nchunks) break;
        ChunkTx& ch = m.chunks[i];
        if (ch.sent && !ch.acked) {
            release_chunk(c, m, ch, 0, false);
            ++newly;
        }
    }

    // A later chunk completing is evidence earlier outstanding chunks went
    // missing: count a duplicate hint per still-unacked predecessor.
    if (cfg_.reliability == TransportConfig::Reliability::selective &&
        cause_idx >= 0) {
        for (uint32_t i = m.base_unacked; i < static_cast<uint32_t>(cause_idx);
             ++i) {
            ChunkTx& ch = m.chunks[i];
            if (!ch.sent || ch.acked || ch.rtx_pending) continue;
            if (++ch.dup_acks >= cfg_.dupack_threshold) {
                ++stats_.fast_rtx;
                queue_rtx(c, m, ch);
            }
        }
    }

    try_advance_base(c, m);
    bool done = m.chunked >= m.len && nchunks > 0 &&
                m.acked_chunks == nchunks && !m.in_factory;
    if (done) msg_finished(c, m);

    if (newly > 0) {
        c.backoff = 1;
        c.timer_armed = false;
        arm_rto(c);
    }
    for (int e = 0; e < cfg_.engines; ++e) pump(host, e);
}

void Transport::handle_nack(Packet&& pkt) {
    int host = pkt.dst;
    auto it = hosts_[host].conn_by_dst.find(pkt.src);
    if (it == hosts_[host].conn_by_dst.end()) return;
    Connection& c = conns_[it->second];

    if (cfg_.reliability == TransportConfig::Reliability::ordered) {
        gbn_rewind(c, pkt.nack_psn);
        for (int e = 0; e < cfg_.engines; ++e) pump(host, e);
        return;
    }

    // Trimmed-header nack: the named chunk never arrived, resend now.
    MsgSend& m = c.msgs[pkt.hdr.msg_id];
    if (!m.live || m.seq != pkt.msg_seq) return;
    uint8_t base_csn = static_cast<uint8_t>(m.base_unacked & 0xFF);
    uint8_t rel = static_cast<uint8_t>(pkt.nack_csn - base_csn);
    if (rel >= kCsnWindow || m.base_unacked + rel >= m.chunks.size()) return;
    ChunkTx& ch = m.chunks[m.base_unacked + rel];
    if (ch.sent && !ch.acked) queue_rtx(c, m, ch);
    for (int e = 0; e < cfg_.engines; ++e) pump(host, e);
}

// Re-queue every unacked chunk whose packets reach the receiver's expected
// sequence; earlier delivered-but-unacked chunks stay counted in flight.
void Transport::gbn_rewind(Connection& c, uint64_t expected) {
    if (expected == c.last_rewind_psn) return;  // duplicate gap report
    c.last_rewind_psn = expected;
    SubConn& s = c.subs[0];
    s.cc->on_loss(eq_.now());

    c.gbn_rtxq.clear();
    for (const PendingRef& ref : c.sent_order) {
        MsgSend& m = c.msgs[ref.msg_id];
        if (!m.live || ref.chunk >= m.chunks.size()) continue;
        ChunkTx& ch = m.chunks[ref.chunk];
        if (!ch.sent || ch.acked) continue;
        uint64_t psn_end = ch.psn_base + static_cast<uint64_t>(ch.n_pkts);
        if (psn_end <= expected) {
            // Fully delivered, just unacked: keep it in flight.
            if (ch.rtx_pending) {
                ch.rtx_pending = false;
                s.inflight += ch.len;
            }
            continue;
        }
        if (!ch.rtx_pending) {
            ch.rtx_pending = true;
            s.inflight -= ch.len;
            if (s.inflight < 0) s.inflight = 0;
        }
        ch.dup_acks = 0;
        c.gbn_rtxq.push_back({ref, std::max(ch.psn_base, expected)});
    }
    schedule_pump(c.src, s.engine);
}

// ------------------------------------------------------- receiver driving

int64_t Transport::pending_bytes(const Connection& c) const {
    int64_t total = 0;
    for (const MsgSend& m : c.msgs)
        if (m.live) total += static_cast<int64_t>(m.len - m.chunked);
    for (const SubConn& s : c.subs) {
        total += s.txq_bytes;
        for (const PendingRef& r : s.rtxq) {
            const MsgSend& m = c.msgs[r.msg_id];
            if (m.live && r.chunk < m.chunks.size() &&
                m.chunks[r.chunk].rtx_pending)
                total += m.chunks[r.chunk].len;
        }
    }
    for (const auto& [ref, from] : c.gbn_rtxq) {
        (void)from;
        const MsgSend& m = c.msgs[ref.msg_id];
        if (m.live && ref.chunk < m.chunks.size() &&
            m.chunks[ref.chunk].rtx_pending)
            total += m.chunks[ref.chunk].len;
    }
    return total;
}

void Transport::maybe_send_rts(Connection& c) {
    if (!cfg_.receiver_driven || c.rts_outstanding) return;
    int64_t pending = pending_bytes(c);
    if (pending <= 0 || c.credit > 0) return;
    c.rts_outstanding = true;
    c.rts_acked = false;

    bool has_rtx = !c.gbn_rtxq.empty();
    for (const SubConn& s : c.subs) has_rtx = has_rtx || !s.rtxq.empty();
    Packet p;
    p.kind = PacketKind::rts;
    p.src = c.src;
    p.dst = c.dst;
    p.hdr.conn_id = c.conn_id;
    p.demand_bytes = static_cast<uint64_t>(pending);
    p.is_rtx = has_rtx;
    ++stats_.rts_sent;
    net_.inject(std::move(p));

    // Retry with fresh demand until the receiver confirms registration.
    eq_.schedule_in(rto_min_, [this, idx = c.idx] {
        Connection& cc = conns_[idx];
        if (cc.rts_outstanding && !cc.rts_acked) {
            cc.rts_outstanding = false;
            maybe_send_rts(cc);
        }
    });
}

void Transport::handle_rts(Packet&& pkt) {
    int host = pkt.dst;
    if (!cfg_.receiver_driven || !pacers_[host]) return;
    pacers_[host]->on_rts(pkt.src, pkt.demand_bytes, pkt.is_rtx);
}

void Transport::handle_credit(Packet&& pkt) {
    int host = pkt.dst;
    auto it = hosts_[host].conn_by_dst.find(pkt.src);
    if (it == hosts_[host].conn_by_dst.end()) return;
    Connection& c = conns_[it->second];
    int64_t cap = cfg_.credit_bank_quanta * int64_t{cfg_.credit_quantum};
    if (c.credit < cap)
        c.credit = std::min<int64_t>(c.credit + pkt.credit_bytes, cap);
    // Credit above the bank cap expires silently.
    c.rts_outstanding = false;
    if (c.policy) c.policy->on_rx_credit(pkt.credit_bytes);
    for (int e = 0; e < cfg_.engines; ++e) pump(host, e);
    maybe_send_rts(c);
}

// ------------------------------------------------------------------- rto

SimTime Transport::cur_rto(const Connection& c, const SubConn& s) const {
    (void)c;
    return s.cc->rtt().rto(rto_min_, rto_max_);
}

void Transport::arm_rto(Connection& c) {
    if (c.src == 69 && c.dst == 78) fprintf(stderr, "[%llu] arm_rto armed=%d backoff=%d cur_rto=%llu\n", (unsigned long long)eq_.now(), (int)c.timer_armed, c.backoff, (unsigned long long)cur_rto(c, c.subs[0]));
    if (c.timer_armed) return;
    SimTime period = cur_rto(c, c.subs[0]) * c.backoff;
    c.timer_armed = true;
    c.armed_at = eq_.now();
    eq_.schedule_in(period, [this, idx = c.idx, at = c.armed_at] {
        rto_fire(idx, at);
    });
}

void Transport::rto_fire(int conn_idx, SimTime armed_at) {
    Connection& c = conns_[conn_idx];
    if (c.src == 69 && c.dst == 78) fprintf(stderr, "[%llu] rto_fire armed=%d match=%d\n", (unsigned long long)eq_.now(), (int)c.timer_armed, (int)(c.armed_at == armed_at));
    if (!c.timer_armed || c.armed_at != armed_at) return;  // superseded
    c.timer_armed = false;

    // Collect every chunk whose deadline has passed, plus the oldest overall
    // for go-back-N and the earliest future deadline for re-arming.
    SimTime now = eq_.now();
    MsgSend* om = nullptr;
    ChunkTx* oc = nullptr;
    std::vector<std::pair<MsgSend*, ChunkTx*>> expired;
    for (MsgSend& m : c.msgs) {
        if (!m.live) continue;
        for (uint32_t i = m.base_unacked; i < m.chunks.size(); ++i) {
            ChunkTx& ch = m.chunks[i];
            if (!ch.sent || ch.acked || ch.rtx_pending) continue;
            if (!oc || ch.deadline < oc->deadline) {
                om = &m;
                oc = &ch;
            }
            if (ch.deadline <= now) expired.push_back({&m, &ch});
        }
    }
    if (c.src == 69 && c.dst == 78 && !oc) {
        fprintf(stderr, "[%llu] DEAD FIRE: dumping all live chunks\n", (unsigned long long)eq_.now());
        for (MsgSend& m : c.msgs) {
            if (!m.live) continue;
            for (uint32_t i = m.base_unacked; i < m.chunks.size(); ++i) {
                ChunkTx& ch = m.chunks[i];
                fprintf(stderr, "  msg=%llu idx=%u sent=%d acked=%d rtxp=%d path=%d att=%d len=%u\n",
                        (unsigned long long)m.msg_id, i, (int)ch.sent, (int)ch.acked, (int)ch.rtx_pending, ch.path, ch.attempts, ch.len);
            }
        }
        for (size_t p = 0; p < c.subs.size(); ++p)
            fprintf(stderr, "  sub%zu inflight=%lld rtxq=%zu in_ring=%d\n", p, (long long)c.subs[p].inflight, c.subs[p].rtxq.size(), (int)c.subs[p].in_ring);
    }
    if (!oc) return;  // nothing outstanding
    if (expired.empty()) {
        // Re-arm for the earliest pending deadline.
        c.timer_armed = true;
        c.armed_at = now;
        eq_.schedule_in(oc->deadline - now, [this, conn_idx, at = now] {
            rto_fire(conn_idx, at);
        });
        return;
    }

    ++stats_.rtos;
    c.backoff = std::min(c.backoff * 2, kBackoffCap);
    if (cfg_.reliability == TransportConfig::Reliability::ordered) {
        c.subs[0].cc->on_rto(now);
        c.last_rewind_psn = ~uint64_t{0};
        gbn_rewind(c, oc->psn_base);
    } else {
        // Declare every overdue chunk lost in one shot.  Expiring them one
        // timer period at a time would leave the rest counted as inflight,
        // holding the window shut so even the expired chunk's retransmit
        // cannot leave — recovery would serialize into a chain of timeouts
        // with doubling backoff instead of resuming within one RTT.
        std::vector<CongestionControl*> punished;
        punished.reserve(c.subs.size());
        for (auto& [m, ch] : expired) {
            CongestionControl* cc = c.subs[ch->path].cc;
            if (std::find(punished.begin(), punished.end(), cc) ==
                punished.end()) {
                punished.push_back(cc);
                cc->on_rto(now);
            }
            queue_rtx(c, *m, *ch);
        }
    }
    if (cfg_.receiver_driven) maybe_send_rts(c);
    arm_rto(c);
    for (int e = 0; e < cfg_.engines; ++e) pump(c.src, e);
}

// ---------------------------------------------------------- introspection

int64_t Transport::path_inflight(int src, int dst, int path) const {
    const Connection* c = find_conn(src, dst);
    if (!c || path < 0 || path >= static_cast<int>(c->subs.size())) return 0;
    return c->subs[path].inflight;
}

int64_t Transport::outstanding_bytes(int src, int dst) const {
    const Connection* c = find_conn(src, dst);
    if (!c) return 0;
    int64_t total = 0;
    for (const auto& s : c->subs) total += s.inflight;
    return total;
}

int64_t Transport::window_available(int src, int dst, int path) const {
    const Connection* c = find_conn(src, dst);
    if (!c || path < 0 || path >= static_cast<int>(c->subs.size())) return 0;
    const SubConn& s = c->subs[path];
    return s.cc->cwnd_bytes() - gated_inflight(*c, s);
}

int Transport::engine_inflight_msgs(int host, int engine) const {
    return hosts_[host].engines[engine].inflight_msgs;
}

uint64_t Transport::engine_dispatched(int host, int engine) const {
    return hosts_[host].engines[engine].dispatched;
}

int64_t Transport::engine_gauge(int host, int engine) const {
    return hosts_[host].engines[engine].gauge;
}

int64_t Transport::conn_credit(int src, int dst) const {
    const Connection* c = find_conn(src, dst);
    return c ? c->credit : 0;
}

}  // namespace chunknet
