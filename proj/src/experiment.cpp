#include "chunknet/experiment.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "chunknet/event_queue.hpp"
#include "json.hpp"

namespace chunknet {

namespace {

void trace_line(std::string& out, const TraceEvent& te) {
    const Packet& p = *te.pkt;
    char buf[160];
    const char* kind = "data";
    switch (p.kind) {
        case PacketKind::data: kind = "data"; break;
        case PacketKind::ack: kind = "ack"; break;
        case PacketKind::nack: kind = "nack"; break;
        case PacketKind::credit: kind = "credit"; break;
        case PacketKind::rts: kind = "rts"; break;
        case PacketKind::rts_ack: kind = "rts_ack"; break;
    }
    int n = std::snprintf(buf, sizeof buf,
                          "%" PRId64 "\t%s\t%d\t%d>%d:%d\t%u\t%s", te.t,
                          te.event, te.link_id, p.src, p.dst, p.path_id,
                          unsigned(p.hdr.csn), kind);
    out.append(buf, static_cast<size_t>(n));
    if (p.is_rtx) out += ",rtx";
    if (p.ecn) out += ",ecn";
    if (p.trimmed) out += ",trim";
    if (p.hdr.last_chunk) out += ",last";
    out += '\n';
}

}  // namespace

RunOutput run_experiment(const RunPlan& plan) {
    RunOutput out;
    EventQueue eq;
    Network net(plan.topo, plan.net, eq, plan.seed);
    if (plan.drop_ratio > 0.0)
        net.inject_loss_at_host_egress(plan.drop_ratio);
    if (plan.trace) {
        out.trace_tsv.reserve(1 << 20);
        net.set_trace([&out](const TraceEvent& te) {
            trace_line(out.trace_tsv, te);
        });
    }

    TransportConfig tcfg = plan.transport;
    if (tcfg.cc.algo == CcConfig::Algo::swift && tcfg.cc.swift_target_ns == 0)
        tcfg.cc.swift_target_ns = plan.swift_auto_target(net.base_rtt_ns());
    Transport tr(net, eq, tcfg, plan.seed);

    auto streams = build_workload(plan);
    struct StreamState {
        Stream s;
        uint64_t offered = 0;    // bytes handed to the transport
        uint64_t finished = 0;   // bytes whose messages completed
        int outstanding = 0;
        SimTime end = -1;
    };
    std::vector<StreamState> st;
    st.reserve(streams.size());
    for (const auto& s : streams) st.push_back({s, 0, 0, 0, -1});

    auto pump = [&](StreamState& x) {
        while (x.outstanding < plan.max_inflight && x.offered < x.s.bytes) {
            uint64_t next =
                std::min<uint64_t>(plan.msg_bytes, x.s.bytes - x.offered);
            if (!tr.send_message(x.s.src, x.s.dst, next,
                                 static_cast<uint64_t>(x.s.id)))
                return;  // backpressured; completions re-pump
            x.offered += next;
            ++x.outstanding;
        }
    };

    tr.set_on_complete([&](uint64_t tag, int, int, uint64_t len, SimTime t,
                           const std::vector<uint8_t>*) {
        StreamState& x = st[tag];
        --x.outstanding;
        x.finished += len;
        if (x.finished == x.s.bytes) {
            x.end = t;
            // A finished stream frees engine slots its host peers may be
            // waiting on, so revisit everyone.
            for (auto& y : st) pump(y);
        } else {
            pump(x);
        }
    });
    for (auto& x : st) pump(x);

    MetricsReport& rep = out.report;
    rep.ideal_ns = static_cast<SimTime>(
        std::llround(double(plan.bytes_per_host) * 8e9 / plan.net.rate_bps));
    rep.cutoff_ns = static_cast<SimTime>(
        std::llround(plan.cutoff_multiple * double(rep.ideal_ns)));
    eq.run_until_idle(rep.cutoff_ns);

    rep.flows.reserve(st.size());
    for (const auto& x : st) {
        if (x.end < 0) {
            ++rep.unfinished;
            rep.quiesced = false;
            continue;
        }
        rep.flows.push_back({x.s.id, x.s.src, x.s.dst, x.s.bytes, 0, x.end,
                             x.s.kind});
        rep.makespan_ns = std::max(rep.makespan_ns, x.end);
    }
    rep.slowdown = rep.quiesced && rep.ideal_ns > 0
                       ? double(rep.makespan_ns) / double(rep.ideal_ns)
                       : 0.0;
    rep.transport = tr.stats();
    rep.net = net.counters();
    return out;
}

std::string flows_csv(const MetricsReport& report) {
    std::string out = "flow_id,src,dst,bytes,fct_ns\n";
    char buf[128];
    for (const auto& f : report.flows) {
        int n = std::snprintf(buf, sizeof buf,
                              "%d,%d,%d,%" PRIu64 ",%" PRId64 "\n", f.id,
                              f.src, f.dst, f.bytes, f.fct_ns());
        out.append(buf, static_cast<size_t>(n));
    }
    return out;
}

std::string summary_json(const ExperimentSpec& spec,
                         const MetricsReport& report) {
    nlohmann::ordered_json j;
    j["spec_hash"] = spec.hash_hex();
    auto& cfg = j["config"];
    for (const auto& [k, v] : spec.entries()) cfg[k] = v;

    j["quiesced"] = report.quiesced;
    j["unfinished_flows"] = report.unfinished;
    j["flow_count"] = report.flows.size();
    j["ideal_ns"] = report.ideal_ns;
    j["cutoff_ns"] = report.cutoff_ns;
    j["makespan_ns"] = report.makespan_ns;
    j["slowdown"] = report.slowdown;

    auto quants = [](std::vector<SimTime> f) {
        nlohmann::ordered_json q;
        if (!f.empty()) {
            q["p50_ns"] = fct_quantile(f, 0.50);
            q["p99_ns"] = fct_quantile(f, 0.99);
            q["p999_ns"] = fct_quantile(f, 0.999);
            q["max_ns"] = *std::max_element(f.begin(), f.end());
        }
        return q;
    };
    j["fct"] = quants(report.fcts_all());
    auto perm = report.fcts(Stream::Kind::perm);
    auto inc = report.fcts(Stream::Kind::incast);
    if (!perm.empty()) j["fct_perm"] = quants(perm);
    if (!inc.empty()) j["fct_incast"] = quants(inc);

    auto& flows = j["flows"];
    for (const auto& f : report.flows) {
        nlohmann::ordered_json r;
        r["id"] = f.id;
        r["src"] = f.src;
        r["dst"] = f.dst;
        r["bytes"] = f.bytes;
        r["fct_ns"] = f.fct_ns();
        r["goodput_bps"] = f.goodput_bps();
        flows.push_back(std::move(r));
    }

    const auto& t = report.transport;
    auto& jt = j["transport"];
    jt["msgs_sent"] = t.msgs_sent;
    jt["msgs_completed"] = t.msgs_completed;
    jt["backpressured"] = t.backpressured;
    jt["chunks_sent"] = t.chunks_sent;
    jt["chunk_rtx"] = t.chunk_rtx;
    jt["rtx_payload_bytes"] = t.rtx_payload_bytes;
    jt["fast_rtx"] = t.fast_rtx;
    jt["rtos"] = t.rtos;
    jt["acks_sent"] = t.acks_sent;
    jt["nacks_sent"] = t.nacks_sent;
    jt["rts_sent"] = t.rts_sent;
    jt["credit_pkts"] = t.credit_pkts;

    const auto& n = report.net;
    auto& jn = j["net"];
    jn["injected_pkts"] = n.injected_pkts;
    jn["delivered_pkts"] = n.delivered_pkts;
    jn["dropped_pkts"] = n.dropped_pkts;
    jn["loss_dropped_pkts"] = n.loss_dropped_pkts;
    jn["trimmed_pkts"] = n.trimmed_pkts;
    jn["ecn_marked_pkts"] = n.ecn_marked_pkts;
    jn["pause_events"] = n.pause_events;
    jn["injected_payload"] = n.injected_payload;
    jn["delivered_payload"] = n.delivered_payload;
    jn["dropped_payload"] = n.dropped_payload;

    return j.dump(2) + "\n";
}

namespace {

void write_atomic(const std::filesystem::path& path,
                  const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
        f.write(content.data(),
                static_cast<std::streamsize>(content.size()));
        if (!f) throw std::runtime_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

std::string emit_results(const ExperimentSpec& spec, const RunOutput& out,
                         const std::string& out_dir) {
    std::filesystem::path dir =
        std::filesystem::path(out_dir) / spec.hash_hex();
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw std::runtime_error("cannot create " + dir.string() + ": " +
                                 ec.message());
    write_atomic(dir / "flows.csv", flows_csv(out.report));
    write_atomic(dir / "summary.json", summary_json(spec, out.report));
    if (!out.trace_tsv.empty()) write_atomic(dir / "trace.tsv", out.trace_tsv);
    return dir.string();
}

}  // namespace chunknet
