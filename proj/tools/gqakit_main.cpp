// gqakit: grouped-query attention toolkit.
//
// Subcommands: convert, decode, bench, cost, train, uptrain, eval, rerun.
// Results go to stdout, logs to stderr; every output file gets a manifest
// sidecar (JSON reports embed it too) and `rerun <manifest>` reproduces all
// non-timing outputs bit-exactly.

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "gqakit/checkpoint_io.hpp"
#include "gqakit/costmodel.hpp"
#include "gqakit/decoder.hpp"
#include "gqakit/report.hpp"
#include "gqakit/train.hpp"
#include "gqakit/version.hpp"

using namespace gqakit;

namespace {

Precision env_precision() {
    const char* env = std::getenv("GQAKIT_PRECISION");
    return env ? parse_precision(env) : Precision::f32;
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        const std::size_t comma = csv.find(',', pos);
        const std::string item =
            csv.substr(pos, comma == std::string::npos ? comma : comma - pos);
        if (!item.empty()) out.push_back(std::stoul(item));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (out.empty()) throw ArgumentError("expected a comma-separated list, got '" + csv + "'");
    return out;
}

std::vector<int> parse_token_list(const std::string& csv) {
    std::vector<int> out;
    for (std::size_t v : parse_size_list(csv)) out.push_back(static_cast<int>(v));
    return out;
}

// "H=8,dim=4,layers=2,vocab=64[,G=8]" -> config (d_model = H*dim)
AttentionConfig parse_auto_model(const std::string& spec) {
    AttentionConfig cfg;
    cfg.n_heads = 8;
    cfg.head_dim = 4;
    cfg.n_layers = 2;
    cfg.vocab = 64;
    cfg.n_kv_groups = 0; // defaults to H below
    cfg.causal = true;
    std::size_t pos = 0;
    while (pos < spec.size()) {
        const std::size_t comma = spec.find(',', pos);
        const std::string item =
            spec.substr(pos, comma == std::string::npos ? comma : comma - pos);
        const std::size_t eq = item.find('=');
        if (eq == std::string::npos)
            throw ArgumentError("bad auto-model entry '" + item + "' (expected key=value)");
        const std::string key = item.substr(0, eq);
        const std::size_t value = std::stoul(item.substr(eq + 1));
        if (key == "H")
            cfg.n_heads = value;
        else if (key == "dim")
            cfg.head_dim = value;
        else if (key == "layers")
            cfg.n_layers = value;
        else if (key == "vocab")
            cfg.vocab = value;
        else if (key == "G")
            cfg.n_kv_groups = value;
        else
            throw ArgumentError("unknown auto-model key '" + key + "'");
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (cfg.n_kv_groups == 0) cfg.n_kv_groups = cfg.n_heads;
    cfg.d_model = cfg.n_heads * cfg.head_dim;
    cfg.validate();
    return cfg;
}

struct ManifestScope {
    RunManifest m;

    explicit ManifestScope(std::string subcommand) {
        m.subcommand = std::move(subcommand);
        m.tool_version = kVersion;
        m.started_at = iso8601_now();
    }

    void param(const std::string& key, const std::string& value) {
        m.params.emplace_back(key, value);
    }
    void param(const std::string& key, std::size_t value) { param(key, std::to_string(value)); }
    void param(const std::string& key, double value) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", value);
        param(key, buf);
    }

    void finish(const std::filesystem::path& beside) {
        m.finished_at = iso8601_now();
        write_text_file(beside.string() + ".manifest.json", manifest_to_json(m));
    }
};

// ---------------------------------------------------------------------------
// convert

int run_convert(const std::string& in, const std::string& out, const std::string& method_name,
                std::size_t groups, std::uint64_t method_seed, const std::string& report_path,
                std::size_t probe_len) {
    ManifestScope ms("convert");
    ms.param("in", in);
    ms.param("out", out);
    ms.param("method", method_name);
    ms.param("groups", groups);
    ms.param("method-seed", method_seed);
    ms.param("report", report_path);
    ms.param("probe-len", probe_len);
    ms.m.inputs = {in};
    ms.m.outputs = {out};
    if (!report_path.empty()) ms.m.outputs.push_back(report_path);

    const ConversionMethod method = ConversionMethod::parse(method_name, method_seed);
    CheckpointVariant var = load_checkpoint_any(in);
    std::visit(
        [&](const auto& src) {
            auto converted = convert_checkpoint(src, groups, method);
            save_checkpoint(converted, out);
            ConversionReport rep = make_conversion_report(src, converted, method, 7, probe_len);
            if (!report_path.empty())
                write_text_file(report_path, conversion_report_to_json(rep, ms.m));
            std::cout << "converted G=" << rep.source_groups << " -> G=" << rep.target_groups
                      << " method=" << rep.method << " drift=" << rep.output_drift << "\n";
        },
        var);
    ms.finish(out);
    return 0;
}

// ---------------------------------------------------------------------------
// decode

int run_decode(const std::string& ckpt_path, const std::string& auto_model, std::uint64_t seed,
               const std::string& prompt_csv, std::size_t prompt_len, std::size_t gen,
               std::size_t capacity, const std::string& trace_path) {
    ManifestScope ms("decode");
    ms.param("ckpt", ckpt_path);
    ms.param("auto-model", auto_model);
    ms.param("seed", seed);
    ms.param("prompt", prompt_csv);
    ms.param("prompt-len", prompt_len);
    ms.param("gen", gen);
    ms.param("capacity", capacity);
    ms.param("trace", trace_path);
    if (!ckpt_path.empty()) ms.m.inputs = {ckpt_path};
    if (!trace_path.empty()) ms.m.outputs = {trace_path};

    auto run = [&](const auto& ckpt) {
        std::vector<int> prompt;
        if (!prompt_csv.empty()) {
            prompt = parse_token_list(prompt_csv);
        } else {
            Rng rng = Rng(seed).child(3);
            prompt.resize(prompt_len == 0 ? 8 : prompt_len);
            for (auto& t : prompt) t = static_cast<int>(rng.next_below(ckpt.config.vocab));
        }
        DecodeTrace trace = generate(ckpt, prompt, gen, true, capacity);
        for (std::size_t i = 0; i < trace.tokens.size(); ++i)
            std::cout << trace.tokens[i] << (i + 1 == trace.tokens.size() ? "" : " ");
        std::cout << "\n";
        if (!trace_path.empty()) write_text_file(trace_path, decode_trace_to_json(trace, ms.m));
    };

    if (!ckpt_path.empty()) {
        CheckpointVariant var = load_checkpoint_any(ckpt_path);
        std::visit(run, var);
    } else if (!auto_model.empty()) {
        AttentionConfig cfg = parse_auto_model(auto_model);
        if (env_precision() == Precision::f64)
            run(random_checkpoint<double>(cfg, Rng(seed).child(1).seed()));
        else
            run(random_checkpoint<float>(cfg, Rng(seed).child(1).seed()));
    } else {
        throw ArgumentError("decode needs --ckpt or --auto-model");
    }
    if (!trace_path.empty()) ms.finish(trace_path);
    return 0;
}

// ---------------------------------------------------------------------------
// bench

template <typename Real>
BenchReport bench_auto(const AttentionConfig& base, const std::vector<std::size_t>& groups,
                       std::uint64_t seed, std::size_t seq_in, std::size_t seq_out,
                       std::size_t trials, const HardwareSpec& hw) {
    std::vector<Checkpoint<Real>> ckpts;
    for (std::size_t g : groups) {
        AttentionConfig cfg = base;
        cfg.n_kv_groups = g;
        cfg.validate();
        ckpts.push_back(random_checkpoint<Real>(cfg, Rng(seed).child(g).seed()));
    }
    return bench_generate(ckpts, seq_in, seq_out, trials, hw, seed);
}

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        const std::size_t comma = csv.find(',', pos);
        out.push_back(csv.substr(pos, comma == std::string::npos ? comma : comma - pos));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

template <typename Real>
BenchReport bench_files(const std::vector<std::string>& paths, std::uint64_t seed,
                        std::size_t seq_in, std::size_t seq_out, std::size_t trials,
                        const HardwareSpec& hw) {
    std::vector<Checkpoint<Real>> ckpts;
    for (const auto& p : paths) ckpts.push_back(load_checkpoint<Real>(p));
    return bench_generate(ckpts, seq_in, seq_out, trials, hw, seed);
}

int run_bench(const std::string& auto_model, const std::string& ckpts_csv,
              const std::string& groups_csv, std::uint64_t seed, std::size_t seq_in,
              std::size_t seq_out, std::size_t trials, double bw, double peak,
              std::size_t partitions, const std::string& csv_path,
              const std::string& json_path) {
    ManifestScope ms("bench");
    ms.param("auto-model", auto_model);
    ms.param("ckpts", ckpts_csv);
    ms.param("groups", groups_csv);
    ms.param("seed", seed);
    ms.param("seq-in", seq_in);
    ms.param("seq-out", seq_out);
    ms.param("trials", trials);
    ms.param("bw", bw);
    ms.param("peak", peak);
    ms.param("partitions", partitions);
    ms.param("csv", csv_path);
    ms.param("json", json_path);
    if (!csv_path.empty()) ms.m.outputs.push_back(csv_path);
    if (!json_path.empty()) ms.m.outputs.push_back(json_path);

    HardwareSpec hw{bw, peak, partitions};
    BenchReport rep;
    if (!ckpts_csv.empty()) {
        const std::vector<std::string> paths = split_csv(ckpts_csv);
        if (paths.empty()) throw ArgumentError("bench: --ckpts list is empty");
        ms.m.inputs = paths;
        rep = checkpoint_precision(load_checkpoint_any(paths.front())) == Precision::f64
                  ? bench_files<double>(paths, seed, seq_in, seq_out, trials, hw)
                  : bench_files<float>(paths, seed, seq_in, seq_out, trials, hw);
    } else {
        const AttentionConfig base = parse_auto_model(auto_model);
        const std::vector<std::size_t> groups = parse_size_list(groups_csv);
        rep = env_precision() == Precision::f64
                  ? bench_auto<double>(base, groups, seed, seq_in, seq_out, trials, hw)
                  : bench_auto<float>(base, groups, seed, seq_in, seq_out, trials, hw);
    }

    const std::string csv = bench_report_to_csv(rep);
    std::cout << csv;
    if (!csv_path.empty()) write_text_file(csv_path, csv);
    if (!json_path.empty()) write_text_file(json_path, bench_report_to_json(rep, ms.m));
    if (!csv_path.empty())
        ms.finish(csv_path);
    else if (!json_path.empty())
        ms.finish(json_path);
    return 0;
}

// ---------------------------------------------------------------------------
// cost: analytic-only sweep, same CSV schema (wall time nan, trials 0)

int run_cost(const std::string& auto_model, const std::string& groups_csv, std::size_t seq_len,
             std::size_t batch, double bw, double peak, std::size_t partitions,
             const std::string& csv_path, const std::string& json_path) {
    ManifestScope ms("cost");
    ms.param("auto-model", auto_model);
    ms.param("groups", groups_csv);
    ms.param("seq", seq_len);
    ms.param("batch", batch);
    ms.param("bw", bw);
    ms.param("peak", peak);
    ms.param("partitions", partitions);
    ms.param("csv", csv_path);
    ms.param("json", json_path);
    if (!csv_path.empty()) ms.m.outputs.push_back(csv_path);
    if (!json_path.empty()) ms.m.outputs.push_back(json_path);

    const AttentionConfig base = parse_auto_model(auto_model);
    HardwareSpec hw{bw, peak, partitions};
    std::vector<std::pair<std::size_t, CostReport>> rows;
    for (std::size_t g : parse_size_list(groups_csv)) {
        AttentionConfig cfg = base;
        cfg.n_kv_groups = g;
        cfg.validate();
        rows.emplace_back(g, predict_step_time(cfg, hw, seq_len, batch, env_precision()));
    }
    const std::string csv = cost_sweep_to_csv(rows);
    std::cout << csv;
    if (!csv_path.empty()) write_text_file(csv_path, csv);
    if (!json_path.empty()) write_text_file(json_path, cost_sweep_to_json(rows, ms.m));
    if (!csv_path.empty())
        ms.finish(csv_path);
    else if (!json_path.empty())
        ms.finish(json_path);
    return 0;
}

// ---------------------------------------------------------------------------
// train / uptrain / eval

int run_train(const std::string& auto_model, const std::string& task_kind,
              std::uint64_t task_seed, std::size_t seq_len, std::size_t copy_offset,
              std::size_t steps, double lr, std::size_t batch, std::uint64_t seed,
              std::size_t eval_sequences, const std::string& out) {
    ManifestScope ms("train");
    ms.param("auto-model", auto_model);
    ms.param("task", task_kind);
    ms.param("task-seed", task_seed);
    ms.param("seq-len", seq_len);
    ms.param("copy-offset", copy_offset);
    ms.param("steps", steps);
    ms.param("lr", lr);
    ms.param("batch", batch);
    ms.param("seed", seed);
    ms.param("eval-sequences", eval_sequences);
    ms.param("out", out);
    ms.m.outputs = {out, out + ".train.json"};

    const AttentionConfig cfg = parse_auto_model(auto_model);
    const SyntheticTask task =
        SyntheticTask::from_spec({task_kind, task_seed, cfg.vocab, seq_len, copy_offset});
    TrainConfig tc;
    tc.steps = steps;
    tc.learning_rate = lr;
    tc.batch_size = batch;
    tc.seed = seed;
    tc.eval_sequences = eval_sequences;

    double final_eval = 0;
    if (env_precision() == Precision::f64) {
        auto res = pretrain_base<double>(cfg, task, tc);
        save_checkpoint(res.ckpt, out);
        write_text_file(out + ".train.json", train_run_to_json(res.run, ms.m));
        final_eval = res.run.final_eval_loss;
    } else {
        auto res = pretrain_base<float>(cfg, task, tc);
        save_checkpoint(res.ckpt, out);
        write_text_file(out + ".train.json", train_run_to_json(res.run, ms.m));
        final_eval = res.run.final_eval_loss;
    }
    std::cout << "base eval loss " << final_eval << "\n";
    ms.finish(out);
    return 0;
}

template <typename Real>
double uptrain_fanout(const std::string& base_path, const TrainRun& base_run,
                      std::size_t groups, const std::string& method_name, double alpha,
                      std::uint64_t first_seed, std::size_t n_seeds,
                      const std::string& out_dir, const RunManifest& m) {
    const Checkpoint<Real> base = load_checkpoint<Real>(base_path);
    std::vector<double> finals;
    for (std::size_t i = 0; i < n_seeds; ++i) {
        const std::uint64_t seed = first_seed + i;
        const ConversionMethod method = ConversionMethod::parse(
            method_name, method_name == "random" ? Rng(seed).child(7).seed() : 0);
        auto res = uptrain(base, base_run, groups, method, alpha, seed, base_path);
        const std::string stem = out_dir + "/uptrain_" + method_name + "_g" +
                                 std::to_string(groups) + "_seed" + std::to_string(seed);
        save_checkpoint(res.ckpt, stem + ".gqac");
        write_text_file(stem + ".json", train_run_to_json(res.run, m));
        finals.push_back(res.run.final_eval_loss);
        std::cerr << "seed " << seed << ": eval " << res.run.final_eval_loss << "\n";
    }
    return median(finals);
}

int run_uptrain(const std::string& base_path, std::size_t groups, const std::string& method,
                double alpha, std::uint64_t seed, std::size_t n_seeds,
                const std::string& out_dir) {
    ManifestScope ms("uptrain");
    ms.param("base", base_path);
    ms.param("groups", groups);
    ms.param("method", method);
    ms.param("alpha", alpha);
    ms.param("seed", seed);
    ms.param("seeds", n_seeds);
    ms.param("out-dir", out_dir);
    ms.m.inputs = {base_path, base_path + ".train.json"};
    ms.m.outputs = {out_dir};

    const TrainRun base_run = train_run_from_json(read_text_file(base_path + ".train.json"));
    std::filesystem::create_directories(out_dir);
    const double med =
        checkpoint_precision(load_checkpoint_any(base_path)) == Precision::f64
            ? uptrain_fanout<double>(base_path, base_run, groups, method, alpha, seed, n_seeds,
                                     out_dir, ms.m)
            : uptrain_fanout<float>(base_path, base_run, groups, method, alpha, seed, n_seeds,
                                    out_dir, ms.m);

    char agg[256];
    std::snprintf(agg, sizeof(agg),
                  "{\n  \"method\": \"%s\",\n  \"groups\": %zu,\n  \"alpha\": %.17g,\n"
                  "  \"seeds\": %zu,\n  \"median_final_eval_loss\": %.17g\n}\n",
                  method.c_str(), groups, alpha, n_seeds, med);
    write_text_file(out_dir + "/aggregate.json", std::string(agg));
    std::cout << "median eval loss " << med << "\n";
    ms.finish(std::filesystem::path(out_dir) / "aggregate.json");
    return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& run_json,
             std::size_t n_sequences) {
    const TrainRun run = train_run_from_json(read_text_file(run_json));
    const SyntheticTask task = SyntheticTask::from_spec(run.task);
    CheckpointVariant var = load_checkpoint_any(ckpt_path);
    const double loss =
        std::visit([&](const auto& ckpt) { return eval_loss(ckpt, task, n_sequences); }, var);
    std::cout << loss << "\n";
    return 0;
}

int dispatch(const std::vector<std::string>& args);

int run_rerun(const std::string& manifest_path) {
    const RunManifest m = manifest_from_json(read_text_file(manifest_path));
    std::vector<std::string> args = {m.subcommand};
    for (const auto& [k, v] : m.params) {
        if (v.empty()) continue;
        args.push_back("--" + k);
        args.push_back(v);
    }
    std::cerr << "rerun: " << m.subcommand << "\n";
    return dispatch(args);
}

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"grouped-query attention toolkit"};
    app.require_subcommand(1);

    auto* convert = app.add_subcommand("convert", "down-group a checkpoint's K/V heads");
    std::string c_in, c_out, c_method = "mean", c_report;
    std::size_t c_groups = 1, c_probe_len = 32;
    std::uint64_t c_method_seed = 0;
    convert->add_option("--in", c_in)->required();
    convert->add_option("--out", c_out)->required();
    convert->add_option("--groups", c_groups)->required();
    convert->add_option("--method", c_method);
    convert->add_option("--method-seed", c_method_seed);
    convert->add_option("--report", c_report);
    convert->add_option("--probe-len", c_probe_len);

    auto* decode = app.add_subcommand("decode", "greedy generation with a KV cache");
    std::string d_ckpt, d_auto, d_prompt, d_trace;
    std::size_t d_prompt_len = 8, d_gen = 16, d_capacity = kDefaultCapacity;
    std::uint64_t d_seed = 0;
    decode->add_option("--ckpt", d_ckpt);
    decode->add_option("--auto-model", d_auto);
    decode->add_option("--seed", d_seed);
    decode->add_option("--prompt", d_prompt);
    decode->add_option("--prompt-len", d_prompt_len);
    decode->add_option("--gen", d_gen);
    decode->add_option("--capacity", d_capacity);
    decode->add_option("--trace", d_trace);

    auto* bench = app.add_subcommand("bench", "wall-clock sweep over group counts");
    std::string b_auto = "H=8,dim=4,layers=2,vocab=64", b_ckpts, b_groups = "1,2,4,8", b_csv,
                b_json;
    std::size_t b_seq_in = 128, b_seq_out = 64, b_trials = 5, b_partitions = 1;
    std::uint64_t b_seed = 0;
    double b_bw = 5e10, b_peak = 1e11;
    bench->add_option("--auto-model", b_auto);
    bench->add_option("--ckpts", b_ckpts);
    bench->add_option("--groups", b_groups);
    bench->add_option("--seed", b_seed);
    bench->add_option("--seq-in", b_seq_in);
    bench->add_option("--seq-out", b_seq_out);
    bench->add_option("--trials", b_trials);
    bench->add_option("--bw", b_bw);
    bench->add_option("--peak", b_peak);
    bench->add_option("--partitions", b_partitions);
    bench->add_option("--csv", b_csv);
    bench->add_option("--json", b_json);

    auto* cost = app.add_subcommand("cost", "analytic roofline sweep (no execution)");
    std::string k_auto = "H=64,dim=128,layers=48,vocab=32000", k_groups = "1,8,64", k_csv,
                k_json;
    std::size_t k_seq = 2560, k_batch = 32, k_partitions = 8;
    double k_bw = 9e11, k_peak = 2.75e14;
    cost->add_option("--auto-model", k_auto);
    cost->add_option("--groups", k_groups);
    cost->add_option("--seq", k_seq);
    cost->add_option("--batch", k_batch);
    cost->add_option("--bw", k_bw);
    cost->add_option("--peak", k_peak);
    cost->add_option("--partitions", k_partitions);
    cost->add_option("--csv", k_csv);
    cost->add_option("--json", k_json);

    auto* train = app.add_subcommand("train", "pretrain an MHA base on a synthetic task");
    std::string t_auto = "H=8,dim=1,layers=1,vocab=16", t_task = "markov", t_out;
    std::size_t t_seq_len = 32, t_offset = 4, t_steps = 2000, t_batch = 64, t_evalseqs = 64;
    std::uint64_t t_task_seed = 1, t_seed = 0;
    double t_lr = 0.3;
    train->add_option("--auto-model", t_auto);
    train->add_option("--task", t_task);
    train->add_option("--task-seed", t_task_seed);
    train->add_option("--seq-len", t_seq_len);
    train->add_option("--copy-offset", t_offset);
    train->add_option("--steps", t_steps);
    train->add_option("--lr", t_lr);
    train->add_option("--batch", t_batch);
    train->add_option("--seed", t_seed);
    train->add_option("--eval-sequences", t_evalseqs);
    train->add_option("--out", t_out)->required();

    auto* up = app.add_subcommand("uptrain", "convert a base checkpoint and continue training");
    std::string u_base, u_method = "mean", u_out_dir = ".";
    std::size_t u_groups = 1, u_nseeds = 1;
    std::uint64_t u_seed = 0;
    double u_alpha = 0.05;
    up->add_option("--base", u_base)->required();
    up->add_option("--groups", u_groups)->required();
    up->add_option("--method", u_method);
    up->add_option("--alpha", u_alpha);
    up->add_option("--seed", u_seed);
    up->add_option("--seeds", u_nseeds);
    up->add_option("--out-dir", u_out_dir);

    auto* ev = app.add_subcommand("eval", "held-out eval loss of a checkpoint");
    std::string e_ckpt, e_run;
    std::size_t e_nseqs = 64;
    ev->add_option("--ckpt", e_ckpt)->required();
    ev->add_option("--run", e_run)->required();
    ev->add_option("--eval-sequences", e_nseqs);

    auto* rr = app.add_subcommand("rerun", "re-execute a run from its manifest");
    std::string r_manifest;
    rr->add_option("manifest", r_manifest)->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    if (convert->parsed())
        return run_convert(c_in, c_out, c_method, c_groups, c_method_seed, c_report,
                           c_probe_len);
    if (decode->parsed())
        return run_decode(d_ckpt, d_auto, d_seed, d_prompt, d_prompt_len, d_gen, d_capacity,
                          d_trace);
    if (bench->parsed())
        return run_bench(b_auto, b_ckpts, b_groups, b_seed, b_seq_in, b_seq_out, b_trials,
                         b_bw, b_peak, b_partitions, b_csv, b_json);
    if (cost->parsed())
        return run_cost(k_auto, k_groups, k_seq, k_batch, k_bw, k_peak, k_partitions, k_csv,
                        k_json);
    if (train->parsed())
        return run_train(t_auto, t_task, t_task_seed, t_seq_len, t_offset, t_steps, t_lr,
                         t_batch, t_seed, t_evalseqs, t_out);
    if (up->parsed()) return run_uptrain(u_base, u_groups, u_method, u_alpha, u_seed, u_nseeds,
                                         u_out_dir);
    if (ev->parsed()) return run_eval(e_ckpt, e_run, e_nseqs);
    if (rr->parsed()) return run_rerun(r_manifest);
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        return dispatch(args);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
