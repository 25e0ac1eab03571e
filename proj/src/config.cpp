#include "chunknet/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "chunknet/rng.hpp"

namespace chunknet {

namespace {

enum class Kind { integer, real, boolean, choice };

struct KeyDesc {
    const char* name;
    Kind kind;
    const char* def;
    std::vector<const char*> choices;  // for Kind::choice
};

// Registry order is canonical order: grouped by section, stable forever.
const std::vector<KeyDesc>& registry() {
    static const std::vector<KeyDesc> r = {
        {"topology.kind", Kind::choice, "fat_tree", {"fat_tree", "star"}},
        {"topology.k", Kind::integer, "8", {}},
        {"topology.hosts", Kind::integer, "16", {}},
        {"net.rate_gbps", Kind::real, "100", {}},
        {"net.link_delay_ns", Kind::integer, "1000", {}},
        {"net.qcap_bytes", Kind::integer, "0", {}},
        {"net.queue", Kind::choice, "drop_tail", {"drop_tail", "trim", "pause"}},
        {"net.ecn_frac", Kind::real, "0.2", {}},
        {"net.mtu", Kind::integer, "4096", {}},
        {"net.trim_depth", Kind::integer, "16", {}},
        {"transport.chunk_bytes", Kind::integer, "32768", {}},
        {"transport.reliability", Kind::choice, "selective",
         {"selective", "ordered"}},
        {"transport.paths", Kind::integer, "64", {}},
        {"transport.engines", Kind::integer, "1", {}},
        {"transport.conn_split", Kind::boolean, "false", {}},
        {"transport.receiver_driven", Kind::boolean, "false", {}},
        {"transport.rto_min_ns", Kind::integer, "0", {}},
        {"transport.rto_max_ns", Kind::integer, "0", {}},
        {"transport.max_inflight_msgs", Kind::integer, "128", {}},
        {"transport.drr_quantum", Kind::integer, "32768", {}},
        {"transport.dupack_threshold", Kind::integer, "8", {}},
        {"transport.rtx_avoid_prev_path", Kind::boolean, "true", {}},
        {"cc.algo", Kind::choice, "cubic", {"none", "cubic", "swift"}},
        {"cc.scope", Kind::choice, "global", {"global", "per_path"}},
        {"cc.cap_bytes", Kind::integer, "0", {}},
        {"cc.ecn_as_loss", Kind::boolean, "true", {}},
        {"cc.swift_target_ns", Kind::integer, "0", {}},
        {"cc.init_cwnd_pkts", Kind::real, "2", {}},
        {"lb.policy", Kind::choice, "p2_ecn", {"oblivious", "p2_rtt", "p2_ecn"}},
        {"eqds.quantum", Kind::integer, "32768", {}},
        {"eqds.bank_quanta", Kind::integer, "4", {}},
        {"eqds.initial_credit", Kind::integer, "-1", {}},
        {"workload.pattern", Kind::choice, "permutation",
         {"permutation", "incast", "colocated", "fixed"}},
        {"workload.bytes_per_host", Kind::integer, "8388608", {}},
        {"workload.msg_bytes", Kind::integer, "1048576", {}},
        {"workload.max_inflight", Kind::integer, "4", {}},
        {"workload.fan_in", Kind::integer, "15", {}},
        {"workload.src", Kind::integer, "0", {}},
        {"workload.dst", Kind::integer, "1", {}},
        {"loss.drop_ratio", Kind::real, "0", {}},
        {"run.seed", Kind::integer, "1", {}},
        {"run.cutoff_multiple", Kind::real, "100", {}},
        {"run.trace", Kind::boolean, "false", {}},
    };
    return r;
}

const KeyDesc* find_key(std::string_view name) {
    for (const auto& d : registry())
        if (name == d.name) return &d;
    return nullptr;
}

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

int64_t parse_int(const std::string& key, const std::string& v) {
    int64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw SpecError(key + ": '" + v + "' is not an integer");
    return out;
}

double parse_real(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw SpecError(key + ": '" + v + "' is not a number");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw SpecError(key + ": '" + v + "' is not a boolean");
}

// Validates v against the descriptor and returns its canonical spelling.
std::string canon_value(const KeyDesc& d, const std::string& raw) {
    std::string v = trim(raw);
    switch (d.kind) {
        case Kind::integer:
            return std::to_string(parse_int(d.name, v));
        case Kind::real: {
            double x = parse_real(d.name, v);
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.17g", x);
            return buf;
        }
        case Kind::boolean:
            return parse_bool(d.name, v) ? "true" : "false";
        case Kind::choice:
            for (const char* c : d.choices)
                if (v == c) return v;
            {
                std::string msg = std::string(d.name) + ": '" + v +
                                  "' is not one of {";
                for (size_t i = 0; i < d.choices.size(); ++i)
                    msg += std::string(i ? ", " : "") + d.choices[i];
                throw SpecError(msg + "}");
            }
    }
    throw SpecError("unreachable");
}

}  // namespace

ExperimentSpec::ExperimentSpec() {
    for (const auto& d : registry()) values_[d.name] = canon_value(d, d.def);
}

void ExperimentSpec::set(const std::string& key, const std::string& value) {
    const KeyDesc* d = find_key(key);
    if (!d) throw SpecError("unknown config key '" + key + "'");
    values_[key] = canon_value(*d, value);
}

void ExperimentSpec::merge_text(const std::string& text) {
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw SpecError("line " + std::to_string(lineno) +
                                ": unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw SpecError("line " + std::to_string(lineno) +
                            ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        if (key.find('.') == std::string::npos && !section.empty())
            key = section + "." + key;
        try {
            set(key, t.substr(eq + 1));
        } catch (const SpecError& e) {
            throw SpecError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

ExperimentSpec ExperimentSpec::from_text(const std::string& text) {
    ExperimentSpec s;
    s.merge_text(text);
    return s;
}

ExperimentSpec ExperimentSpec::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot read spec file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
}

const std::string& ExperimentSpec::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end())
        throw SpecError("unknown config key '" + key + "'");
    return it->second;
}

int64_t ExperimentSpec::get_int(const std::string& key) const {
    return parse_int(key, get(key));
}
double ExperimentSpec::get_double(const std::string& key) const {
    return parse_real(key, get(key));
}
bool ExperimentSpec::get_bool(const std::string& key) const {
    return get(key) == "true";
}

std::string ExperimentSpec::canonical() const {
    std::string out;
    for (const auto& d : registry()) {
        out += d.name;
        out += " = ";
        out += values_.at(d.name);
        out += '\n';
    }
    return out;
}

uint64_t ExperimentSpec::hash() const { return fnv1a64(canonical()); }

std::string ExperimentSpec::hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(hash()));
    return buf;
}

std::vector<std::pair<std::string, std::string>> ExperimentSpec::entries()
    const {
    std::vector<std::pair<std::string, std::string>> out;
    out.reserve(registry().size());
    for (const auto& d : registry()) out.emplace_back(d.name, values_.at(d.name));
    return out;
}

RunPlan ExperimentSpec::plan() const {
    RunPlan p;
    auto fail = [](const std::string& why) { throw SpecError(why); };

    const std::string& kind = get("topology.kind");
    if (kind == "fat_tree") {
        int64_t k = get_int("topology.k");
        if (k < 2 || k % 2 != 0) fail("topology.k must be even and >= 2");
        p.topo = build_fat_tree(static_cast<int>(k));
    } else {
        int64_t n = get_int("topology.hosts");
        if (n < 2) fail("topology.hosts must be >= 2");
        p.topo = build_star(static_cast<int>(n));
    }
    p.n_hosts = p.topo.n_hosts;

    double gbps = get_double("net.rate_gbps");
    if (gbps <= 0) fail("net.rate_gbps must be positive");
    p.net.rate_bps = gbps * 1e9;
    p.net.link_delay_ns = get_int("net.link_delay_ns");
    if (p.net.link_delay_ns < 0) fail("net.link_delay_ns must be >= 0");
    p.net.qcap_bytes = get_int("net.qcap_bytes");
    if (p.net.qcap_bytes < 0) fail("net.qcap_bytes must be >= 0");
    const std::string& q = get("net.queue");
    p.net.mode = q == "trim"    ? QueueMode::trim
                 : q == "pause" ? QueueMode::pause
                                : QueueMode::drop_tail;
    p.net.ecn_frac = get_double("net.ecn_frac");
    if (p.net.ecn_frac < 0 || p.net.ecn_frac > 1)
        fail("net.ecn_frac must be in [0, 1]");
    int64_t mtu = get_int("net.mtu");
    if (mtu <= p.net.hdr_overhead)
        fail("net.mtu must exceed the 64-byte header overhead");
    p.net.mtu = static_cast<uint32_t>(mtu);
    p.net.trim_queue_depth = static_cast<int>(get_int("net.trim_depth"));
    if (p.net.trim_queue_depth < 1) fail("net.trim_depth must be >= 1");

    TransportConfig& t = p.transport;
    int64_t cb = get_int("transport.chunk_bytes");
    uint32_t max_pl = p.net.mtu - p.net.hdr_overhead;
    if (cb < 1) fail("transport.chunk_bytes must be >= 1");
    if ((cb + max_pl - 1) / max_pl > 32)
        fail("transport.chunk_bytes exceeds 32 packets per chunk");
    t.chunk_bytes = static_cast<uint32_t>(cb);
    t.reliability = get("transport.reliability") == "ordered"
                        ? TransportConfig::Reliability::ordered
                        : TransportConfig::Reliability::selective;
    t.paths = static_cast<int>(get_int("transport.paths"));
    t.engines = static_cast<int>(get_int("transport.engines"));
    if (t.paths < 1) fail("transport.paths must be >= 1");
    if (t.engines < 1) fail("transport.engines must be >= 1");
    t.conn_split = get_bool("transport.conn_split");
    t.receiver_driven = get_bool("transport.receiver_driven");
    if (t.reliability == TransportConfig::Reliability::ordered &&
        (t.paths != 1 || t.engines != 1 || t.conn_split))
        fail("transport.reliability=ordered needs paths=1, engines=1, "
             "conn_split=false");
    t.rto_min = get_int("transport.rto_min_ns");
    t.rto_max = get_int("transport.rto_max_ns");
    if (t.rto_min < 0 || t.rto_max < 0) fail("rto bounds must be >= 0");
    t.max_inflight_msgs =
        static_cast<int>(get_int("transport.max_inflight_msgs"));
    if (t.max_inflight_msgs < 1) fail("transport.max_inflight_msgs must be >= 1");
    int64_t dq = get_int("transport.drr_quantum");
    if (dq < 1) fail("transport.drr_quantum must be >= 1");
    t.drr_quantum = static_cast<uint32_t>(dq);
    t.dupack_threshold =
        static_cast<int>(get_int("transport.dupack_threshold"));
    if (t.dupack_threshold < 1) fail("transport.dupack_threshold must be >= 1");
    t.rtx_avoid_prev_path = get_bool("transport.rtx_avoid_prev_path");

    const std::string& algo = get("cc.algo");
    t.cc.algo = algo == "cubic"   ? CcConfig::Algo::cubic
                : algo == "swift" ? CcConfig::Algo::swift
                                  : CcConfig::Algo::none;
    t.cc.scope = get("cc.scope") == "per_path" ? CcConfig::Scope::per_path
                                               : CcConfig::Scope::global;
    t.cc.mss = static_cast<int64_t>(max_pl);
    t.cc.cap_bytes = get_int("cc.cap_bytes");
    if (t.cc.cap_bytes < 0) fail("cc.cap_bytes must be >= 0");
    t.cc.ecn_as_loss = get_bool("cc.ecn_as_loss");
    t.cc.swift_target_ns = get_int("cc.swift_target_ns");
    if (t.cc.swift_target_ns < 0) fail("cc.swift_target_ns must be >= 0");
    t.cc.init_cwnd_pkts = get_double("cc.init_cwnd_pkts");
    if (t.cc.init_cwnd_pkts <= 0) fail("cc.init_cwnd_pkts must be positive");

    const std::string& lbp = get("lb.policy");
    t.lb = lbp == "p2_rtt"   ? LbPolicy::p2_rtt
           : lbp == "p2_ecn" ? LbPolicy::p2_ecn
                             : LbPolicy::oblivious;

    int64_t quantum = get_int("eqds.quantum");
    if (quantum < 1) fail("eqds.quantum must be >= 1");
    t.credit_quantum = static_cast<uint32_t>(quantum);
    t.credit_bank_quanta = static_cast<int>(get_int("eqds.bank_quanta"));
    if (t.credit_bank_quanta < 1) fail("eqds.bank_quanta must be >= 1");
    t.initial_credit = get_int("eqds.initial_credit");
    if (t.initial_credit < -1) fail("eqds.initial_credit must be >= -1");

    const std::string& pat = get("workload.pattern");
    p.pattern = pat == "incast"      ? RunPlan::Pattern::incast
                : pat == "colocated" ? RunPlan::Pattern::colocated
                : pat == "fixed"     ? RunPlan::Pattern::fixed
                                     : RunPlan::Pattern::permutation;
    int64_t bph = get_int("workload.bytes_per_host");
    int64_t mb = get_int("workload.msg_bytes");
    if (bph < 1) fail("workload.bytes_per_host must be >= 1");
    if (mb < 1) fail("workload.msg_bytes must be >= 1");
    p.bytes_per_host = static_cast<uint64_t>(bph);
    p.msg_bytes = static_cast<uint64_t>(mb);
    p.max_inflight = static_cast<int>(get_int("workload.max_inflight"));
    if (p.max_inflight < 1) fail("workload.max_inflight must be >= 1");
    p.fan_in = static_cast<int>(get_int("workload.fan_in"));
    p.fixed_src = static_cast<int>(get_int("workload.src"));
    p.fixed_dst = static_cast<int>(get_int("workload.dst"));
    if (p.pattern == RunPlan::Pattern::permutation ||
        p.pattern == RunPlan::Pattern::colocated) {
        if (p.n_hosts < 2) fail("permutation needs at least 2 hosts");
    }
    if (p.pattern == RunPlan::Pattern::incast ||
        p.pattern == RunPlan::Pattern::colocated) {
        if (p.fan_in < 1) fail("workload.fan_in must be >= 1");
        if (p.fan_in + 1 > p.n_hosts)
            fail("workload.fan_in + 1 exceeds the host count");
    }
    if (p.pattern == RunPlan::Pattern::fixed) {
        if (p.fixed_src < 0 || p.fixed_src >= p.n_hosts || p.fixed_dst < 0 ||
            p.fixed_dst >= p.n_hosts)
            fail("workload.src/dst out of host range");
    }

    p.drop_ratio = get_double("loss.drop_ratio");
    if (p.drop_ratio < 0 || p.drop_ratio > 1)
        fail("loss.drop_ratio must be in [0, 1]");
    p.seed = static_cast<uint64_t>(get_int("run.seed"));
    p.cutoff_multiple = get_double("run.cutoff_multiple");
    if (p.cutoff_multiple < 1) fail("run.cutoff_multiple must be >= 1");
    p.trace = get_bool("run.trace");
    return p;
}

}  // namespace chunknet
