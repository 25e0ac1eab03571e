// chunknet: run and post-process fabric experiments.
//
// Subcommands:
//   run    one experiment from a spec file plus --set overrides
//   sweep  cross-product of --vary value lists, optionally parallel
//   ccdf   print the FCT complementary CDF of a finished run directory
//   trace  like run, with the per-packet trace forced on
//   keys   list every config key with its current/default value
//
// Exit codes: 0 success, 2 invalid spec, 3 simulation did not quiesce,
// 1 anything else (I/O failures and the like).

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "chunknet/experiment.hpp"

using namespace chunknet;

namespace {

constexpr int kExitInvalidSpec = 2;
constexpr int kExitNonquiescent = 3;

struct CommonOpts {
    std::string spec_file;
    std::vector<std::string> sets;
    std::string out_dir = "results";
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--spec", o.spec_file, "spec file (INI-style)");
    cmd->add_option("--set", o.sets,
                    "override, key=value (repeatable)");
    cmd->add_option("--out", o.out_dir, "results root directory");
}

ExperimentSpec load_spec(const CommonOpts& o) {
    ExperimentSpec spec = o.spec_file.empty()
                              ? ExperimentSpec()
                              : ExperimentSpec::from_file(o.spec_file);
    for (const auto& s : o.sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw SpecError("--set needs key=value, got '" + s + "'");
        spec.set(s.substr(0, eq), s.substr(eq + 1));
    }
    return spec;
}

// Runs one spec and emits its results; returns false on nonquiescence.
bool run_one(const ExperimentSpec& spec, const std::string& out_dir,
             std::string* line) {
    RunOutput out = run_experiment(spec.plan());
    std::string dir = emit_results(spec, out, out_dir);
    const MetricsReport& r = out.report;
    std::ostringstream os;
    os << spec.hash_hex() << "  ";
    if (r.quiesced) {
        os << "slowdown=" << r.slowdown << "  makespan_ns=" << r.makespan_ns
           << "  flows=" << r.flows.size();
    } else {
        os << "DID NOT QUIESCE  unfinished=" << r.unfinished << "/"
           << (r.unfinished + r.flows.size())
           << "  cutoff_ns=" << r.cutoff_ns;
    }
    os << "  -> " << dir;
    *line = os.str();
    return r.quiesced;
}

int cmd_run(const CommonOpts& o, bool force_trace) {
    ExperimentSpec spec = load_spec(o);
    if (force_trace) spec.set("run.trace", "true");
    std::string line;
    bool ok = run_one(spec, o.out_dir, &line);
    std::cout << line << "\n";
    return ok ? 0 : kExitNonquiescent;
}

struct Axis {
    std::string key;
    std::vector<std::string> values;
};

int cmd_sweep(const CommonOpts& o, const std::vector<std::string>& vary,
              int jobs) {
    ExperimentSpec base = load_spec(o);
    std::vector<Axis> axes;
    for (const auto& v : vary) {
        auto eq = v.find('=');
        if (eq == std::string::npos)
            throw SpecError("--vary needs key=v1,v2,..., got '" + v + "'");
        Axis a;
        a.key = v.substr(0, eq);
        std::istringstream vs(v.substr(eq + 1));
        std::string item;
        while (std::getline(vs, item, ',')) a.values.push_back(item);
        if (a.values.empty())
            throw SpecError("--vary " + a.key + " lists no values");
        axes.push_back(std::move(a));
    }

    // Cartesian product, last axis fastest; validate every point up front
    // so a typo fails the whole sweep before any simulation starts.
    std::vector<ExperimentSpec> specs;
    std::vector<size_t> idx(axes.size(), 0);
    while (true) {
        ExperimentSpec s = base;
        for (size_t a = 0; a < axes.size(); ++a)
            s.set(axes[a].key, axes[a].values[idx[a]]);
        s.plan();  // throws SpecError on an invalid combination
        specs.push_back(std::move(s));
        size_t a = axes.size();
        for (; a > 0; --a) {
            if (++idx[a - 1] < axes[a - 1].values.size()) break;
            idx[a - 1] = 0;
        }
        if (a == 0) break;  // every axis wrapped: product complete
    }

    std::atomic<size_t> next{0};
    std::atomic<bool> all_quiesced{true};
    std::mutex print_mu;
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= specs.size()) return;
            std::string line;
            bool ok = run_one(specs[i], o.out_dir, &line);
            if (!ok) all_quiesced = false;
            std::lock_guard<std::mutex> lk(print_mu);
            std::cout << "[" << (i + 1) << "/" << specs.size() << "] " << line
                      << "\n";
        }
    };
    int n = std::max(1, std::min<int>(jobs, static_cast<int>(specs.size())));
    std::vector<std::thread> pool;
    for (int i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return all_quiesced ? 0 : kExitNonquiescent;
}

int cmd_ccdf(const std::string& dir) {
    std::ifstream in(dir + "/flows.csv");
    if (!in) {
        std::cerr << "cannot read " << dir << "/flows.csv\n";
        return 1;
    }
    std::string line;
    std::getline(in, line);  // header
    std::vector<SimTime> fcts;
    while (std::getline(in, line)) {
        auto pos = line.rfind(',');
        if (pos == std::string::npos) continue;
        fcts.push_back(std::stoll(line.substr(pos + 1)));
    }
    if (fcts.empty()) {
        std::cerr << "no flows in " << dir << "/flows.csv\n";
        return 1;
    }
    std::printf("# fct_ns\tccdf\n");
    for (const auto& [fct, p] : fct_ccdf(fcts))
        std::printf("%lld\t%.6g\n", static_cast<long long>(fct), p);
    std::printf("# p50_ns=%lld p99_ns=%lld p999_ns=%lld\n",
                static_cast<long long>(fct_quantile(fcts, 0.50)),
                static_cast<long long>(fct_quantile(fcts, 0.99)),
                static_cast<long long>(fct_quantile(fcts, 0.999)));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chunknet experiment driver"};
    app.require_subcommand(1);

    CommonOpts run_o;
    CLI::App* run = app.add_subcommand("run", "run one experiment");
    add_common(run, run_o);

    CommonOpts sweep_o;
    std::vector<std::string> vary;
    int jobs = 1;
    CLI::App* sweep =
        app.add_subcommand("sweep", "run a cross-product of specs");
    add_common(sweep, sweep_o);
    sweep->add_option("--vary", vary,
                      "axis as key=v1,v2,... (repeatable; cross product)");
    sweep->add_option("--jobs", jobs, "parallel workers (default 1)");

    std::string ccdf_dir;
    CLI::App* ccdf = app.add_subcommand("ccdf", "print a run's FCT CCDF");
    ccdf->add_option("--dir", ccdf_dir, "run directory (out/<spec-hash>)")
        ->required();

    CommonOpts trace_o;
    CLI::App* trace =
        app.add_subcommand("trace", "run with per-packet trace output");
    add_common(trace, trace_o);

    CLI::App* keys = app.add_subcommand("keys", "list config keys");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_o, false);
        if (sweep->parsed()) return cmd_sweep(sweep_o, vary, jobs);
        if (ccdf->parsed()) return cmd_ccdf(ccdf_dir);
        if (trace->parsed()) return cmd_run(trace_o, true);
        if (keys->parsed()) {
            for (const auto& [k, v] : ExperimentSpec().entries())
                std::cout << k << " = " << v << "\n";
            return 0;
        }
    } catch (const SpecError& e) {
        std::cerr << "invalid spec: " << e.what() << "\n";
        return kExitInvalidSpec;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
