#ifndef CHUNKNET_EXPERIMENT_HPP
#define CHUNKNET_EXPERIMENT_HPP

#include <string>

#include "chunknet/config.hpp"
#include "chunknet/metrics.hpp"

namespace chunknet {

struct RunOutput {
    MetricsReport report;
    std::string trace_tsv;  // filled only when the plan enables tracing
};

// Builds the fabric and transport from the plan, drives every workload
// stream (msg_bytes-sized messages, max_inflight outstanding each), and
// runs to quiescence or the cutoff (cutoff_multiple x ideal time). A run
// that does not finish is reported with quiesced = false and diagnostic
// counters, never an exception.
RunOutput run_experiment(const RunPlan& plan);

// One row per flow: flow_id,src,dst,bytes,fct_ns (header line included).
std::string flows_csv(const MetricsReport& report);

// Machine-readable summary: every config key echoed plus all scalar
// metrics, per-flow goodput, quantiles, and fabric/transport counters.
std::string summary_json(const ExperimentSpec& spec,
                         const MetricsReport& report);

// Writes <out_dir>/<spec-hash>/{flows.csv, summary.json[, trace.tsv]},
// each file atomically (temp + rename). Returns the run directory path.
// Throws std::runtime_error when the destination is unwritable.
std::string emit_results(const ExperimentSpec& spec, const RunOutput& out,
                         const std::string& out_dir);

}  // namespace chunknet

#endif  // CHUNKNET_EXPERIMENT_HPP
