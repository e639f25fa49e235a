#include "gqakit/checkpoint_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace gqakit {

namespace {

constexpr unsigned char kMagic[4] = {'G', 'Q', 'A', 'C'};

void append_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

void append_u64(std::vector<unsigned char>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void append_value(std::vector<unsigned char>& out, float v) {
    append_u32(out, std::bit_cast<std::uint32_t>(v));
}

void append_value(std::vector<unsigned char>& out, double v) {
    append_u64(out, std::bit_cast<std::uint64_t>(v));
}

template <typename Real>
void append_tensor(std::vector<unsigned char>& out, const Tensor<Real>& t) {
    for (Real v : t.data()) append_value(out, v);
}

class Reader {
  public:
    Reader(const unsigned char* data, std::size_t size) : p_(data), end_(data + size) {}

    std::size_t remaining() const { return static_cast<std::size_t>(end_ - p_); }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p_[i]) << (8 * i);
        p_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p_[i]) << (8 * i);
        p_ += 8;
        return v;
    }

    template <typename Real>
    void tensor(Tensor<Real>& t) {
        for (Real& v : t.data()) {
            if constexpr (sizeof(Real) == 4)
                v = std::bit_cast<float>(u32());
            else
                v = std::bit_cast<double>(u64());
        }
    }

  private:
    void need(std::size_t n) const {
        if (remaining() < n) throw IoError(IoError::Kind::Truncated, "truncated payload");
    }

    const unsigned char* p_;
    const unsigned char* end_;
};

template <typename Real>
std::vector<unsigned char> serialize(const Checkpoint<Real>& ckpt) {
    ckpt.validate();
    const AttentionConfig& c = ckpt.config;
    std::vector<unsigned char> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    append_u32(out, kCheckpointVersion);
    append_u32(out, static_cast<std::uint32_t>(c.d_model));
    append_u32(out, static_cast<std::uint32_t>(c.n_heads));
    append_u32(out, static_cast<std::uint32_t>(c.n_kv_groups));
    append_u32(out, static_cast<std::uint32_t>(c.head_dim));
    append_u32(out, static_cast<std::uint32_t>(c.n_layers));
    append_u32(out, static_cast<std::uint32_t>(c.vocab));
    append_u32(out, static_cast<std::uint32_t>(precision_of<Real>()));
    append_u32(out, c.causal ? 1u : 0u);
    append_tensor(out, ckpt.embedding);
    for (const auto& l : ckpt.layers) {
        append_tensor(out, l.wq);
        append_tensor(out, l.wk);
        append_tensor(out, l.wv);
        append_tensor(out, l.wo);
    }
    append_tensor(out, ckpt.unembedding);
    append_u64(out, fnv1a64({out.data(), out.size()}));
    return out;
}

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(IoError::Kind::FileAccess, "cannot open for writing: " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError(IoError::Kind::FileAccess, "write failed: " + path.string());
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw IoError(IoError::Kind::FileAccess, "cannot open for reading: " + path.string());
    const std::streamsize size = f.tellg();
    f.seekg(0);
    std::vector<unsigned char> bytes(static_cast<std::size_t>(size));
    f.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!f) throw IoError(IoError::Kind::FileAccess, "read failed: " + path.string());
    return bytes;
}

template <typename Real>
Checkpoint<Real> deserialize_body(Reader& r, const AttentionConfig& cfg) {
    Checkpoint<Real> ckpt;
    ckpt.config = cfg;
    ckpt.embedding = Tensor<Real>({cfg.vocab, cfg.d_model});
    r.tensor(ckpt.embedding);
    ckpt.layers.resize(cfg.n_layers);
    for (auto& l : ckpt.layers) {
        l.wq = Tensor<Real>({cfg.d_model, cfg.q_width()});
        l.wk = Tensor<Real>({cfg.d_model, cfg.kv_width()});
        l.wv = Tensor<Real>({cfg.d_model, cfg.kv_width()});
        l.wo = Tensor<Real>({cfg.q_width(), cfg.d_model});
        r.tensor(l.wq);
        r.tensor(l.wk);
        r.tensor(l.wv);
        r.tensor(l.wo);
    }
    ckpt.unembedding = Tensor<Real>({cfg.d_model, cfg.vocab});
    r.tensor(ckpt.unembedding);
    return ckpt;
}

} // namespace

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

Precision parse_precision(const std::string& name) {
    if (name == "f32") return Precision::f32;
    if (name == "f64") return Precision::f64;
    throw ArgumentError("unknown precision '" + name + "' (expected f32 or f64)");
}

std::string precision_name(Precision p) {
    return p == Precision::f32 ? "f32" : "f64";
}

void save_checkpoint(const Checkpoint<float>& ckpt, const std::filesystem::path& path) {
    write_file(path, serialize(ckpt));
}

void save_checkpoint(const Checkpoint<double>& ckpt, const std::filesystem::path& path) {
    write_file(path, serialize(ckpt));
}

CheckpointVariant load_checkpoint_any(const std::filesystem::path& path) {
    const std::vector<unsigned char> bytes = read_file(path);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw IoError(IoError::Kind::BadMagic, "bad magic");

    Reader r(bytes.data() + 4, bytes.size() - 4);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw IoError(IoError::Kind::BadVersion,
                      "unsupported format version " + std::to_string(version));

    AttentionConfig cfg;
    cfg.d_model = r.u32();
    cfg.n_heads = r.u32();
    cfg.n_kv_groups = r.u32();
    cfg.head_dim = r.u32();
    cfg.n_layers = r.u32();
    cfg.vocab = r.u32();
    const std::uint32_t prec_tag = r.u32();
    cfg.causal = r.u32() != 0;

    if (prec_tag != static_cast<std::uint32_t>(Precision::f32) &&
        prec_tag != static_cast<std::uint32_t>(Precision::f64))
        throw IoError(IoError::Kind::BadHeader, "unknown precision tag");
    try {
        cfg.validate();
    } catch (const ArgumentError& e) {
        throw IoError(IoError::Kind::BadHeader, e.what());
    }

    // Header is plausible: the rest of the file must be exactly the weight
    // payload plus the trailing checksum.
    const std::size_t bpe = prec_tag / 8;
    const std::uint64_t values = 2ull * cfg.vocab * cfg.d_model +
                                 cfg.n_layers * (2ull * cfg.d_model * cfg.q_width() +
                                                 2ull * cfg.d_model * cfg.kv_width());
    const std::uint64_t expect = values * bpe + 8;
    if (r.remaining() < expect) throw IoError(IoError::Kind::Truncated, "truncated payload");
    if (r.remaining() > expect)
        throw IoError(IoError::Kind::BadHeader, "file size exceeds declared shape");

    const std::uint64_t stored = [&] {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + i]) << (8 * i);
        return v;
    }();
    if (fnv1a64({bytes.data(), bytes.size() - 8}) != stored)
        throw IoError(IoError::Kind::BadChecksum, "checksum mismatch");

    if (prec_tag == static_cast<std::uint32_t>(Precision::f32))
        return deserialize_body<float>(r, cfg);
    return deserialize_body<double>(r, cfg);
}

Precision checkpoint_precision(const CheckpointVariant& v) {
    return std::holds_alternative<Checkpoint<float>>(v) ? Precision::f32 : Precision::f64;
}

const AttentionConfig& checkpoint_config(const CheckpointVariant& v) {
    return std::visit([](const auto& c) -> const AttentionConfig& { return c.config; }, v);
}

} // namespace gqakit
