#include "chunknet/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace chunknet {

Network::Network(const Topology& topo, const NetParams& p, EventQueue& eq,
                 uint64_t seed)
    : topo_(topo), p_(p), eq_(eq), seed_(seed) {
    if (p_.mtu <= p_.hdr_overhead)
        throw std::invalid_argument("mtu must exceed header overhead");
    qcap_ = p_.qcap_bytes > 0 ? p_.qcap_bytes : bdp_bytes();

    // Per-packet slack an upstream link may still commit after pause asserts:
    // one packet serializing, one accepted just before the pause arrives,
    // plus the bytes in flight on the cable.
    int64_t link_slack = 2 * static_cast<int64_t>(p_.mtu) +
                         static_cast<int64_t>(std::llround(
                             p_.rate_bps * p_.link_delay_ns / 8e9));
    if (p_.mode == QueueMode::pause) {
        int max_in = *std::max_element(topo_.in_degree.begin(), topo_.in_degree.end());
        qcap_ = std::max(qcap_, 2 * max_in * link_slack);
    }
    ecn_thresh_ = static_cast<int64_t>(std::llround(p_.ecn_frac * qcap_));

    lines_.resize(topo_.links.size());
    lines_into_.resize(topo_.n_nodes);
    for (size_t i = 0; i < topo_.links.size(); ++i) {
        Line& L = lines_[i];
        L.from = topo_.links[i].from;
        L.to = topo_.links[i].to;
        if (p_.mode == QueueMode::pause) {
            L.pause_thresh = qcap_ - topo_.in_degree[L.from] * link_slack;
            L.resume_thresh = L.pause_thresh / 2;
        }
        lines_into_[L.to].push_back(static_cast<int>(i));
    }
    pause_count_.assign(topo_.n_nodes, 0);
    handlers_.resize(topo_.n_hosts);
}

void Network::set_host_handler(int host, Handler h) {
    handlers_.at(host) = std::move(h);
}

SimTime Network::ser_ns(uint32_t wire_bytes) const {
    return static_cast<SimTime>(std::llround(wire_bytes * 8e9 / p_.rate_bps));
}

SimTime Network::base_rtt_ns() const {
    int hops = topo_.max_hops();
    return hops * (ser_ns(p_.mtu) + p_.link_delay_ns) +
           hops * (ser_ns(p_.hdr_overhead) + p_.link_delay_ns);
}

int64_t Network::bdp_bytes() const {
    return static_cast<int64_t>(std::llround(p_.rate_bps * base_rtt_ns() / 8e9));
}

void Network::inject_loss(int link_id, double drop_ratio) {
    Line& L = lines_.at(link_id);
    L.loss_ratio = drop_ratio;
    if (!L.loss_rng) L.loss_rng.emplace(seed_, "loss", static_cast<uint64_t>(link_id));
}

void Network::inject_loss_at_host_egress(double drop_ratio) {
    for (int h = 0; h < topo_.n_hosts; ++h)
        inject_loss(topo_.host_egress_link(h), drop_ratio);
}

void Network::inject(Packet pkt) {
    pkt.uid = next_uid_++;
    c_.injected_pkts++;
    if (!pkt.trimmed) c_.injected_payload += pkt.payload_len;
    if (pkt.src == pkt.dst) {  // local transfer, no fabric involved
        eq_.schedule_in(0, [this, p = std::move(pkt)]() mutable { deliver(std::move(p)); });
        return;
    }
    pkt.route = topo_.route(pkt.src, pkt.dst, pkt.path_id);
    pkt.hop = 0;
    int first = topo_.link_between(pkt.route[0], pkt.route[1]);
    enqueue(first, std::move(pkt));
}

void Network::enqueue(int link_id, Packet&& pkt) {
    Line& L = lines_[link_id];
    bool ctrl = is_control(pkt.kind) || pkt.trimmed;

    if (!ctrl && L.loss_ratio > 0 && L.loss_rng->next_bernoulli(L.loss_ratio)) {
        c_.loss_dropped_pkts++;
        drop(pkt, "loss", link_id);
        return;
    }

    if (ctrl) {
        if (pkt.trimmed) {
            if (L.trim_hdrs >= p_.trim_queue_depth) {
                drop(pkt, "hdr_drop", link_id);
                return;
            }
            L.trim_hdrs++;
        }
        L.prio.push_back(std::move(pkt));
        try_start(link_id);
        return;
    }

    int64_t wire = pkt.wire_bytes(p_.hdr_overhead);
    // Host egress is staging for the local NIC: it drains from host memory,
    // so it never drops, trims, marks, or asserts pause on its own behalf.
    // Capacity semantics apply to switch queues.
    bool at_host = topo_.is_host(L.from);
    if (!at_host && L.data_bytes > ecn_thresh_ && !pkt.ecn) {
        pkt.ecn = true;
        c_.ecn_marked_pkts++;
    }
    if (!at_host && L.data_bytes + wire > qcap_ && p_.mode != QueueMode::pause) {
        if (p_.mode == QueueMode::drop_tail) {
            drop(pkt, "drop", link_id);
            return;
        }
        // Trim: the payload dies here, the header races ahead as a loss signal.
        c_.trimmed_pkts++;
        c_.dropped_payload += pkt.payload_len;
        emit("trim", link_id, pkt);
        pkt.trimmed = true;
        if (L.trim_hdrs >= p_.trim_queue_depth) {
            drop(pkt, "hdr_drop", link_id);
            return;
        }
        L.trim_hdrs++;
        L.prio.push_back(std::move(pkt));
        try_start(link_id);
        return;
    }

    L.data_bytes += wire;
    L.max_bytes = std::max(L.max_bytes, L.data_bytes);
    L.data.push_back(std::move(pkt));
    if (!at_host && p_.mode == QueueMode::pause && !L.paused_self &&
        L.data_bytes > L.pause_thresh) {
        L.paused_self = true;
        c_.pause_events++;
        pause_count_[L.from]++;
    }
    try_start(link_id);
}

void Network::try_start(int link_id) {
    Line& L = lines_[link_id];
    if (L.busy) return;
    Packet pkt;
    bool from_data = false;
    if (!L.prio.empty()) {
        pkt = std::move(L.prio.front());
        L.prio.pop_front();
        if (pkt.trimmed) L.trim_hdrs--;
    } else if (!L.data.empty() && pause_count_[L.to] == 0) {
        pkt = std::move(L.data.front());
        L.data.pop_front();
        from_data = true;
    } else {
        return;
    }
    L.busy = true;
    int64_t wire = pkt.wire_bytes(p_.hdr_overhead);
    eq_.schedule_in(ser_ns(static_cast<uint32_t>(wire)),
                    [this, link_id, wire, from_data, p = std::move(pkt)]() mutable {
                        finish(link_id, wire, from_data, std::move(p));
                    });
}

void Network::finish(int link_id, int64_t wire, bool from_data, Packet&& pkt) {
    Line& L = lines_[link_id];
    L.busy = false;
    if (from_data) {
        L.data_bytes -= wire;
        if (L.paused_self && L.data_bytes < L.resume_thresh) {
            L.paused_self = false;
            if (--pause_count_[L.from] == 0)
                for (int in : lines_into_[L.from]) try_start(in);
        }
    }
    int to = L.to;
    eq_.schedule_in(p_.link_delay_ns,
                    [this, to, p = std::move(pkt)]() mutable { arrival(to, std::move(p)); });
    try_start(link_id);
}

void Network::arrival(int node, Packet&& pkt) {
    if (node == pkt.dst) {
        deliver(std::move(pkt));
        return;
    }
    pkt.hop++;
    int next = pkt.route[pkt.hop + 1];
    int link = topo_.link_between(node, next);
    enqueue(link, std::move(pkt));
}

void Network::deliver(Packet&& pkt) {
    c_.delivered_pkts++;
    if (!pkt.trimmed) c_.delivered_payload += pkt.payload_len;
    emit("deliver", -1, pkt);
    if (handlers_[pkt.dst]) handlers_[pkt.dst](std::move(pkt));
}

void Network::drop(const Packet& pkt, const char* why, int link_id) {
    c_.dropped_pkts++;
    if (!pkt.trimmed) c_.dropped_payload += pkt.payload_len;
    emit(why, link_id, pkt);
}

void Network::emit(const char* ev, int link_id, const Packet& pkt) {
    if (trace_) trace_(TraceEvent{eq_.now(), ev, link_id, &pkt});
}

}  // namespace chunknet
