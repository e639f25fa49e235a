#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "gqakit/error.hpp"
#include "gqakit/rng.hpp"

namespace gqakit {

/// Dense row-major array over float or double. Every operation in this header
/// verifies its result is finite and throws NumericError otherwise; callers
/// never see NaN/Inf silently.
template <typename Real>
class Tensor {
    static_assert(std::is_floating_point_v<Real>);

  public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), Real(0)) {}

    Tensor(std::vector<std::size_t> shape, std::vector<Real> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (count(shape_) != data_.size())
            throw DimensionError("tensor data length does not match shape");
    }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<std::size_t> shape, Real value) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    static Tensor identity(std::size_t n) {
        Tensor t({n, n});
        for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = Real(1);
        return t;
    }

    static Tensor random_normal(std::vector<std::size_t> shape, Rng& rng, double stddev = 1.0) {
        Tensor t(std::move(shape));
        for (auto& v : t.data_) v = static_cast<Real>(rng.next_normal() * stddev);
        return t;
    }

    static Tensor random_uniform(std::vector<std::size_t> shape, Rng& rng) {
        Tensor t(std::move(shape));
        for (auto& v : t.data_) v = static_cast<Real>(rng.next_double());
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }

    std::size_t rows() const { return extent(0); }
    std::size_t cols() const { return extent(1); }

    std::size_t extent(std::size_t axis) const {
        if (axis >= shape_.size()) throw DimensionError("axis out of range");
        return shape_[axis];
    }

    Real& operator()(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
    Real operator()(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }

    std::span<Real> row(std::size_t i) { return {data_.data() + i * cols(), cols()}; }
    std::span<const Real> row(std::size_t i) const { return {data_.data() + i * cols(), cols()}; }

    std::span<Real> data() { return data_; }
    std::span<const Real> data() const { return data_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    /// Copy of columns [c0, c0+width) of a 2-D tensor.
    Tensor col_block(std::size_t c0, std::size_t width) const {
        if (rank() != 2 || c0 + width > cols()) throw DimensionError("col_block out of range");
        Tensor out({rows(), width});
        for (std::size_t i = 0; i < rows(); ++i)
            for (std::size_t j = 0; j < width; ++j) out(i, j) = (*this)(i, c0 + j);
        return out;
    }

    void set_col_block(std::size_t c0, const Tensor& block) {
        if (rank() != 2 || block.rank() != 2 || block.rows() != rows() ||
            c0 + block.cols() > cols())
            throw DimensionError("set_col_block shape mismatch");
        for (std::size_t i = 0; i < rows(); ++i)
            for (std::size_t j = 0; j < block.cols(); ++j) (*this)(i, c0 + j) = block(i, j);
    }

  private:
    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (auto e : shape) n *= e;
        return shape.empty() ? 0 : n;
    }

    std::vector<std::size_t> shape_;
    std::vector<Real> data_;
};

template <typename Real>
void check_finite(const Tensor<Real>& t, const char* op) {
    for (Real v : t.data())
        if (!std::isfinite(v)) throw NumericError(std::string(op) + " produced non-finite value");
}

/// c[i,j] = sum_t a[i,t] * b[t,j], accumulated in Real.
template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
        throw DimensionError("matmul: inner extents do not match");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor<Real> c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        auto ci = c.row(i);
        auto ai = a.row(i);
        for (std::size_t t = 0; t < k; ++t) {
            const Real av = ai[t];
            auto bt = b.row(t);
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
        }
    }
    check_finite(c, "matmul");
    return c;
}

/// a^T * b without materializing the transpose.
template <typename Real>
Tensor<Real> matmul_tn(const Tensor<Real>& a, const Tensor<Real>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.rows() != b.rows())
        throw DimensionError("matmul_tn: inner extents do not match");
    const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
    Tensor<Real> c({m, n});
    for (std::size_t t = 0; t < k; ++t) {
        auto at = a.row(t);
        auto bt = b.row(t);
        for (std::size_t i = 0; i < m; ++i) {
            const Real av = at[i];
            auto ci = c.row(i);
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
        }
    }
    check_finite(c, "matmul_tn");
    return c;
}

/// a * b^T without materializing the transpose.
template <typename Real>
Tensor<Real> matmul_nt(const Tensor<Real>& a, const Tensor<Real>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols())
        throw DimensionError("matmul_nt: inner extents do not match");
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    Tensor<Real> c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        auto ai = a.row(i);
        auto ci = c.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            auto bj = b.row(j);
            Real acc = 0;
            for (std::size_t t = 0; t < k; ++t) acc += ai[t] * bj[t];
            ci[j] = acc;
        }
    }
    check_finite(c, "matmul_nt");
    return c;
}

/// Row-wise softmax with per-row max subtraction.
template <typename Real>
Tensor<Real> softmax_rows(const Tensor<Real>& a) {
    if (a.rank() != 2) throw DimensionError("softmax_rows: expected rank-2 tensor");
    Tensor<Real> out({a.rows(), a.cols()});
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto in = a.row(i);
        auto o = out.row(i);
        Real mx = in[0];
        for (Real v : in) mx = std::max(mx, v);
        Real sum = 0;
        for (std::size_t j = 0; j < in.size(); ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        for (std::size_t j = 0; j < in.size(); ++j) o[j] /= sum;
    }
    check_finite(out, "softmax_rows");
    return out;
}

/// Elementwise arithmetic mean of a non-empty list of equal-shape tensors.
/// Each element's operands are summed in value order, so the result is
/// exactly invariant under permutations of the argument list.
template <typename Real>
Tensor<Real> mean_over(const std::vector<Tensor<Real>>& list) {
    if (list.empty()) throw ArgumentError("mean_over: empty list");
    for (const auto& t : list)
        if (!t.same_shape(list.front())) throw DimensionError("mean_over: shapes differ");
    Tensor<Real> out(list.front().shape());
    auto od = out.data();
    const Real k = static_cast<Real>(list.size());
    std::vector<Real> vals(list.size());
    for (std::size_t i = 0; i < od.size(); ++i) {
        for (std::size_t t = 0; t < list.size(); ++t) vals[t] = list[t].data()[i];
        std::sort(vals.begin(), vals.end());
        Real sum = 0;
        for (Real v : vals) sum += v;
        od[i] = sum / k;
    }
    check_finite(out, "mean_over");
    return out;
}

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
    if (!a.same_shape(b)) throw DimensionError("add: shapes differ");
    Tensor<Real> c(a.shape());
    auto cd = c.data();
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < cd.size(); ++i) cd[i] = ad[i] + bd[i];
    check_finite(c, "add");
    return c;
}

template <typename Real>
void add_inplace(Tensor<Real>& a, const Tensor<Real>& b) {
    if (!a.same_shape(b)) throw DimensionError("add_inplace: shapes differ");
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < ad.size(); ++i) ad[i] += bd[i];
    check_finite(a, "add_inplace");
}

template <typename Real>
Tensor<Real> scale(const Tensor<Real>& a, Real s) {
    Tensor<Real> c(a.shape());
    auto cd = c.data();
    auto ad = a.data();
    for (std::size_t i = 0; i < cd.size(); ++i) cd[i] = ad[i] * s;
    check_finite(c, "scale");
    return c;
}

template <typename Real>
double max_abs_diff(const Tensor<Real>& a, const Tensor<Real>& b) {
    if (!a.same_shape(b)) throw DimensionError("max_abs_diff: shapes differ");
    double m = 0;
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < ad.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(ad[i]) - static_cast<double>(bd[i])));
    return m;
}

template <typename Real>
bool bit_equal(const Tensor<Real>& a, const Tensor<Real>& b) {
    if (!a.same_shape(b)) return false;
    auto ad = a.data();
    auto bd = b.data();
    return std::equal(ad.begin(), ad.end(), bd.begin());
}

} // namespace gqakit
