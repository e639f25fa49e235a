#include "gqakit/report.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace gqakit {

using nlohmann::json;

std::string iso8601_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

json manifest_json(const RunManifest& m) {
    json params = json::object();
    for (const auto& [k, v] : m.params) params[k] = v;
    return json{{"subcommand", m.subcommand}, {"params", params},
                {"inputs", m.inputs},         {"outputs", m.outputs},
                {"tool_version", m.tool_version}, {"started_at", m.started_at},
                {"finished_at", m.finished_at}};
}

json task_json(const TaskSpec& t) {
    return json{{"kind", t.kind},
                {"seed", t.seed},
                {"vocab", t.vocab},
                {"seq_len", t.seq_len},
                {"copy_offset", t.copy_offset}};
}

TaskSpec task_from(const json& j) {
    TaskSpec t;
    t.kind = j.at("kind").get<std::string>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.vocab = j.at("vocab").get<std::size_t>();
    t.seq_len = j.at("seq_len").get<std::size_t>();
    t.copy_offset = j.at("copy_offset").get<std::size_t>();
    return t;
}

json cost_json(const CostReport& rep) {
    return json{{"kv_bytes_per_step", rep.kv_bytes_per_step},
                {"weight_bytes_per_step", rep.weight_bytes_per_step},
                {"flops_per_step", rep.flops_per_step},
                {"bandwidth_seconds", rep.bandwidth_seconds},
                {"compute_seconds", rep.compute_seconds},
                {"predicted_step_seconds", rep.predicted_step_seconds},
                {"bandwidth_bound", rep.bandwidth_bound},
                {"arithmetic_intensity", rep.arithmetic_intensity}};
}

constexpr const char* kBenchHeader =
    "groups,kv_bytes,weight_bytes,flops,pred_time_s,wall_time_s_median,trials";

} // namespace

std::string manifest_to_json(const RunManifest& m) {
    return manifest_json(m).dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
    const json j = json::parse(text);
    RunManifest m;
    m.subcommand = j.at("subcommand").get<std::string>();
    for (const auto& [k, v] : j.at("params").items()) m.params.emplace_back(k, v.get<std::string>());
    m.inputs = j.at("inputs").get<std::vector<std::string>>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.started_at = j.value("started_at", "");
    m.finished_at = j.value("finished_at", "");
    return m;
}

std::string conversion_report_to_json(const ConversionReport& rep, const RunManifest& m) {
    json j{{"source_groups", rep.source_groups},
           {"target_groups", rep.target_groups},
           {"method", rep.method},
           {"per_layer_max_abs_delta", rep.per_layer_max_abs_delta},
           {"output_drift", rep.output_drift},
           {"probe_len", rep.probe_len},
           {"probe_seed", rep.probe_seed},
           {"manifest", manifest_json(m)}};
    return j.dump(2) + "\n";
}

std::string bench_report_to_csv(const BenchReport& rep) {
    std::ostringstream out;
    out << kBenchHeader << "\n";
    for (const auto& row : rep.rows) {
        out << row.groups << "," << row.kv_bytes << "," << row.weight_bytes << "," << row.flops
            << "," << row.pred_time_s << "," << row.wall_time_s_median << "," << rep.trials
            << "\n";
    }
    return out.str();
}

std::string bench_report_to_json(const BenchReport& rep, const RunManifest& m) {
    json rows = json::array();
    for (const auto& row : rep.rows) {
        rows.push_back(json{{"groups", row.groups},
                            {"kv_bytes", row.kv_bytes},
                            {"weight_bytes", row.weight_bytes},
                            {"flops", row.flops},
                            {"pred_time_s", row.pred_time_s},
                            {"wall_time_s_median", row.wall_time_s_median},
                            {"wall_times_s", row.wall_times_s}});
    }
    json j{{"n_heads", rep.n_heads},
           {"head_dim", rep.head_dim},
           {"n_layers", rep.n_layers},
           {"vocab", rep.vocab},
           {"precision", precision_name(rep.precision)},
           {"seq_in", rep.seq_in},
           {"seq_out", rep.seq_out},
           {"trials", rep.trials},
           {"prompt_seed", rep.prompt_seed},
           {"noise_band_s", rep.noise_band_s},
           {"rows", rows},
           {"manifest", manifest_json(m)}};
    return j.dump(2) + "\n";
}

std::string cost_sweep_to_csv(const std::vector<std::pair<std::size_t, CostReport>>& rows) {
    std::ostringstream out;
    out << kBenchHeader << "\n";
    for (const auto& [groups, rep] : rows) {
        out << groups << "," << rep.kv_bytes_per_step << "," << rep.weight_bytes_per_step << ","
            << rep.flops_per_step << "," << rep.predicted_step_seconds << ",nan,0\n";
    }
    return out.str();
}

std::string cost_sweep_to_json(const std::vector<std::pair<std::size_t, CostReport>>& rows,
                               const RunManifest& m) {
    json arr = json::array();
    for (const auto& [groups, rep] : rows) {
        json r = cost_json(rep);
        r["groups"] = groups;
        arr.push_back(r);
    }
    json j{{"rows", arr}, {"manifest", manifest_json(m)}};
    return j.dump(2) + "\n";
}

std::string train_run_to_json(const TrainRun& run, const RunManifest& m) {
    json evals = json::array();
    for (const auto& e : run.eval_points)
        evals.push_back(json{{"alpha", e.alpha}, {"step", e.step}, {"eval_loss", e.eval_loss}});
    json j{{"base_id", run.base_id},
           {"method", run.method},
           {"alpha", run.alpha},
           {"learning_rate", run.learning_rate},
           {"batch_size", run.batch_size},
           {"seed", run.seed},
           {"base_steps", run.base_steps},
           {"steps", run.steps},
           {"eval_sequences", run.eval_sequences},
           {"task", task_json(run.task)},
           {"loss_trajectory", run.loss_trajectory},
           {"eval_points", evals},
           {"final_eval_loss", run.final_eval_loss},
           {"max_loss_spike", run.max_loss_spike},
           {"divergence_retries", run.divergence_retries},
           {"manifest", manifest_json(m)}};
    return j.dump(2) + "\n";
}

TrainRun train_run_from_json(const std::string& text) {
    const json j = json::parse(text);
    TrainRun run;
    run.base_id = j.at("base_id").get<std::string>();
    run.method = j.at("method").get<std::string>();
    run.alpha = j.at("alpha").get<double>();
    run.learning_rate = j.at("learning_rate").get<double>();
    run.batch_size = j.at("batch_size").get<std::size_t>();
    run.seed = j.at("seed").get<std::uint64_t>();
    run.base_steps = j.at("base_steps").get<std::size_t>();
    run.steps = j.at("steps").get<std::size_t>();
    run.eval_sequences = j.at("eval_sequences").get<std::size_t>();
    run.task = task_from(j.at("task"));
    run.loss_trajectory = j.at("loss_trajectory").get<std::vector<double>>();
    for (const auto& e : j.at("eval_points"))
        run.eval_points.push_back({e.at("alpha").get<double>(), e.at("step").get<std::size_t>(),
                                   e.at("eval_loss").get<double>()});
    run.final_eval_loss = j.at("final_eval_loss").get<double>();
    run.max_loss_spike = j.at("max_loss_spike").get<double>();
    run.divergence_retries = j.at("divergence_retries").get<std::size_t>();
    return run;
}

std::string decode_trace_to_json(const DecodeTrace& trace, const RunManifest& m) {
    json j{{"prompt", trace.prompt},
           {"tokens", trace.tokens},
           {"step_cache_bytes", trace.step_cache_bytes},
           {"step_seconds", trace.step_seconds},
           {"prefill_cache_bytes", trace.prefill_cache_bytes},
           {"prefill_seconds", trace.prefill_seconds},
           {"total_seconds", trace.total_seconds},
           {"manifest", manifest_json(m)}};
    return j.dump(2) + "\n";
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(IoError::Kind::FileAccess, "cannot open for writing: " + path.string());
    f << text;
    if (!f) throw IoError(IoError::Kind::FileAccess, "write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError(IoError::Kind::FileAccess, "cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace gqakit
