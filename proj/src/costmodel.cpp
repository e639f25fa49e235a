#include "gqakit/costmodel.hpp"

#include <algorithm>

namespace gqakit {

std::uint64_t kv_cache_bytes(const AttentionConfig& config, std::size_t seq_len,
                             std::size_t batch, Precision precision) {
    config.validate();
    if (batch == 0) throw ArgumentError("kv_cache_bytes: batch must be positive");
    return 2ull * config.n_layers * batch * seq_len * config.n_kv_groups * config.head_dim *
           bytes_per_element(precision);
}

std::size_t sharded_kv_heads_per_partition(std::size_t groups, std::size_t partitions) {
    if (groups == 0 || partitions == 0)
        throw ArgumentError("sharding: groups and partitions must be positive");
    return std::max<std::size_t>((groups + partitions - 1) / partitions, 1);
}

double sharding_waste_factor(std::size_t groups, std::size_t partitions) {
    const std::size_t per = sharded_kv_heads_per_partition(groups, partitions);
    return static_cast<double>(per * partitions) / static_cast<double>(groups);
}

CostReport predict_step_time(const AttentionConfig& config, const HardwareSpec& hw,
                             std::size_t seq_len, std::size_t batch, Precision precision) {
    config.validate();
    hw.validate();
    if (seq_len == 0 || batch == 0)
        throw ArgumentError("predict_step_time: seq_len and batch must be positive");

    const std::uint64_t bpe = bytes_per_element(precision);
    const std::uint64_t d = config.d_model;
    const std::uint64_t qw = config.q_width();
    const std::uint64_t kvw = config.kv_width();
    const std::uint64_t L = config.n_layers;

    CostReport rep;
    // Projection matrices loaded once per step: Wq, Wk, Wv, Wo per layer.
    rep.weight_bytes_per_step = L * (d * qw + 2 * d * kvw + qw * d) * bpe;

    const std::uint64_t kv_base = kv_cache_bytes(config, seq_len, batch, precision);
    const std::size_t per = sharded_kv_heads_per_partition(config.n_kv_groups, hw.partitions);
    // Replication: every partition loads ceil(G/P) heads, so the cache bytes
    // crossing memory are (per * P) / G times the unreplicated size.
    rep.kv_bytes_per_step = kv_base / config.n_kv_groups * per * hw.partitions;

    const std::uint64_t proj_macs = L * (d * qw + 2 * d * kvw + qw * d);
    const std::uint64_t attn_flops = L * 4ull * seq_len * config.n_heads * config.head_dim;
    rep.flops_per_step = batch * (2 * proj_macs + attn_flops);

    const double total_bytes =
        static_cast<double>(rep.kv_bytes_per_step + rep.weight_bytes_per_step);
    rep.bandwidth_seconds = total_bytes / hw.mem_bandwidth_bytes_per_s;
    rep.compute_seconds = static_cast<double>(rep.flops_per_step) / hw.peak_flops_per_s;
    rep.predicted_step_seconds = std::max(rep.bandwidth_seconds, rep.compute_seconds);
    rep.bandwidth_bound = rep.bandwidth_seconds >= rep.compute_seconds;
    rep.arithmetic_intensity = static_cast<double>(rep.flops_per_step) / total_bytes;
    return rep;
}

double median(std::vector<double> values) {
    if (values.empty()) throw ArgumentError("median: empty input");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

} // namespace gqakit
