#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>

#include "gqakit/attention.hpp"

namespace gqakit {

enum class Precision : std::uint32_t { f32 = 32, f64 = 64 };

constexpr std::size_t bytes_per_element(Precision p) {
    return static_cast<std::uint32_t>(p) / 8;
}

template <typename Real>
constexpr Precision precision_of() {
    if constexpr (sizeof(Real) == 4)
        return Precision::f32;
    else
        return Precision::f64;
}

Precision parse_precision(const std::string& name); // "f32" | "f64"
std::string precision_name(Precision p);

/// FNV-1a over a byte range, 64-bit.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes);

// Checkpoint container: magic "GQAC", u32 version, eight u32 header fields
// (d_model, H, G, head_dim, n_layers, vocab, precision tag, causal flag),
// weight arrays in fixed order (embedding; per layer Wq, Wk, Wv, Wo;
// unembedding) as row-major little-endian IEEE-754 with no padding, then a
// trailing u64 FNV-1a checksum of all preceding bytes.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint<float>& ckpt, const std::filesystem::path& path);
void save_checkpoint(const Checkpoint<double>& ckpt, const std::filesystem::path& path);

using CheckpointVariant = std::variant<Checkpoint<float>, Checkpoint<double>>;

/// Loads whichever precision the file declares. Throws IoError with a distinct
/// kind per failure class (bad magic, version, truncation, header, checksum).
CheckpointVariant load_checkpoint_any(const std::filesystem::path& path);

Precision checkpoint_precision(const CheckpointVariant& v);
const AttentionConfig& checkpoint_config(const CheckpointVariant& v);

/// Typed load; rejects files whose precision tag does not match Real.
template <typename Real>
Checkpoint<Real> load_checkpoint(const std::filesystem::path& path) {
    CheckpointVariant v = load_checkpoint_any(path);
    if (auto* p = std::get_if<Checkpoint<Real>>(&v)) return std::move(*p);
    throw ArgumentError("checkpoint precision does not match requested type");
}

} // namespace gqakit
