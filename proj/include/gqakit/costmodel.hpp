#pragma once

#include <cstdint>
#include <vector>

#include "gqakit/checkpoint_io.hpp"
#include "gqakit/decoder.hpp"

namespace gqakit {

struct HardwareSpec {
    double mem_bandwidth_bytes_per_s = 0;
    double peak_flops_per_s = 0;
    std::size_t partitions = 1; // model-parallel shard count

    void validate() const {
        if (mem_bandwidth_bytes_per_s <= 0 || peak_flops_per_s <= 0 || partitions == 0)
            throw ArgumentError("hardware spec: all fields must be strictly positive");
    }

    /// Single-socket desk machine ballpark; only relative predictions matter.
    static HardwareSpec desk_default() { return {5e10, 1e11, 1}; }
};

/// 2 * n_layers * batch * seq_len * G * head_dim * bytes_per_element.
std::uint64_t kv_cache_bytes(const AttentionConfig& config, std::size_t seq_len,
                             std::size_t batch, Precision precision);

/// K/V heads held per model partition: max(ceil(G/P), 1). Partitions beyond
/// the group count hold replicas.
std::size_t sharded_kv_heads_per_partition(std::size_t groups, std::size_t partitions);

/// (heads_per_partition * P) / G: total K/V bytes loaded across partitions
/// relative to the unreplicated cache. 1 when G >= P.
double sharding_waste_factor(std::size_t groups, std::size_t partitions);

/// Roofline accounting for one decode step. Weight bytes cover the projection
/// matrices, loaded once per step; KV bytes cover the full cache, adjusted for
/// sharding replication. FLOPs count multiply-adds as 2, with attention
/// scores and value aggregation each contributing 2*seq_len*H*head_dim per
/// layer per batch element.
struct CostReport {
    std::uint64_t kv_bytes_per_step = 0;     // sharding-adjusted
    std::uint64_t weight_bytes_per_step = 0; // projection matrices once per step
    std::uint64_t flops_per_step = 0;
    double bandwidth_seconds = 0;
    double compute_seconds = 0;
    double predicted_step_seconds = 0; // max of the two terms
    bool bandwidth_bound = false;
    double arithmetic_intensity = 0; // flops per byte loaded
};

CostReport predict_step_time(const AttentionConfig& config, const HardwareSpec& hw,
                             std::size_t seq_len, std::size_t batch,
                             Precision precision = Precision::f32);

struct BenchRow {
    std::size_t groups = 0;
    std::uint64_t kv_bytes = 0;
    std::uint64_t weight_bytes = 0;
    std::uint64_t flops = 0;
    double pred_time_s = 0;
    double wall_time_s_median = 0;       // per generated token
    std::vector<double> wall_times_s;    // per trial, per generated token
};

struct BenchReport {
    std::size_t n_heads = 0;
    std::size_t head_dim = 0;
    std::size_t n_layers = 0;
    std::size_t vocab = 0;
    Precision precision = Precision::f32;
    std::size_t seq_in = 0;
    std::size_t seq_out = 0;
    std::size_t trials = 0;
    std::uint64_t prompt_seed = 0;
    double noise_band_s = 0; // max over G of (max - min) trial time
    std::vector<BenchRow> rows;
};

double median(std::vector<double> values);

/// Sweeps the given checkpoints (same H/head_dim/layers/vocab, differing G),
/// timing greedy generation. Trials for one G run back to back, never
/// interleaved with another G's; one untimed warmup precedes each sweep
/// point. Wall time is per generated token over the decode steps; analytic
/// columns are evaluated at context length seq_in + seq_out, batch 1.
template <typename Real>
BenchReport bench_generate(const std::vector<Checkpoint<Real>>& ckpts, std::size_t seq_in,
                           std::size_t seq_out, std::size_t trials,
                           const HardwareSpec& hw = HardwareSpec::desk_default(),
                           std::uint64_t prompt_seed = 1234) {
    if (trials < 5) throw ArgumentError("bench: trials must be at least 5");
    if (ckpts.empty()) throw ArgumentError("bench: need at least one checkpoint");
    if (seq_in == 0 || seq_out == 0) throw ArgumentError("bench: seq lengths must be positive");
    const AttentionConfig& base = ckpts.front().config;
    for (const auto& c : ckpts) {
        if (c.config.n_heads != base.n_heads || c.config.head_dim != base.head_dim ||
            c.config.n_layers != base.n_layers || c.config.vocab != base.vocab)
            throw ArgumentError("bench: checkpoints must share H, head_dim, layers and vocab");
    }

    BenchReport rep;
    rep.n_heads = base.n_heads;
    rep.head_dim = base.head_dim;
    rep.n_layers = base.n_layers;
    rep.vocab = base.vocab;
    rep.precision = precision_of<Real>();
    rep.seq_in = seq_in;
    rep.seq_out = seq_out;
    rep.trials = trials;
    rep.prompt_seed = prompt_seed;

    Rng rng = Rng(prompt_seed).child(1);
    std::vector<int> prompt(seq_in);
    for (auto& t : prompt) t = static_cast<int>(rng.next_below(base.vocab));

    const std::size_t capacity = seq_in + seq_out;
    for (const auto& ckpt : ckpts) {
        BenchRow row;
        row.groups = ckpt.config.n_kv_groups;
        const CostReport cost =
            predict_step_time(ckpt.config, hw, seq_in + seq_out, 1, precision_of<Real>());
        row.kv_bytes = cost.kv_bytes_per_step;
        row.weight_bytes = cost.weight_bytes_per_step;
        row.flops = cost.flops_per_step;
        row.pred_time_s = cost.predicted_step_seconds;

        generate(ckpt, prompt, seq_out, true, capacity); // warmup
        for (std::size_t trial = 0; trial < trials; ++trial) {
            DecodeTrace trace = generate(ckpt, prompt, seq_out, true, capacity);
            double decode_total = 0;
            for (double s : trace.step_seconds) decode_total += s;
            row.wall_times_s.push_back(decode_total / static_cast<double>(seq_out));
        }
        row.wall_time_s_median = median(row.wall_times_s);

        const auto [mn, mx] = std::minmax_element(row.wall_times_s.begin(),
                                                  row.wall_times_s.end());
        rep.noise_band_s = std::max(rep.noise_band_s, *mx - *mn);
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

} // namespace gqakit
