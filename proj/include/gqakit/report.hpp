#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gqakit/convert.hpp"
#include "gqakit/costmodel.hpp"
#include "gqakit/decoder.hpp"
#include "gqakit/train.hpp"

namespace gqakit {

/// Fully resolved record of one CLI invocation. Rerunning from a manifest
/// reproduces every non-timing output bit-exactly.
struct RunManifest {
    std::string subcommand;
    std::vector<std::pair<std::string, std::string>> params; // resolved flag -> value
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string tool_version;
    std::string started_at;
    std::string finished_at;
};

std::string iso8601_now();

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const std::string& text);

std::string conversion_report_to_json(const ConversionReport& rep, const RunManifest& m);

// Fixed column schema shared by bench and cost CSV outputs:
//   groups,kv_bytes,weight_bytes,flops,pred_time_s,wall_time_s_median,trials
std::string bench_report_to_csv(const BenchReport& rep);
std::string bench_report_to_json(const BenchReport& rep, const RunManifest& m);

/// Analytic-only sweep rendered in the bench schema (wall time nan, trials 0).
std::string cost_sweep_to_csv(const std::vector<std::pair<std::size_t, CostReport>>& rows);
std::string cost_sweep_to_json(const std::vector<std::pair<std::size_t, CostReport>>& rows,
                               const RunManifest& m);

std::string train_run_to_json(const TrainRun& run, const RunManifest& m);
TrainRun train_run_from_json(const std::string& text);

std::string decode_trace_to_json(const DecodeTrace& trace, const RunManifest& m);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

} // namespace gqakit
