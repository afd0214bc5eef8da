#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hoca/errors.hpp"

namespace hoca {

/// Default cap on materialized dense tensor elements. Exceeding it raises
/// CapacityError instead of exhausting memory.
inline constexpr std::size_t kDefaultElementCap = 100'000'000;

/// Dense tensor with row-major flat storage and precomputed strides.
/// Order 0 (empty shape) represents a scalar and holds one value; it shows
/// up as the result of slicing an order-1 tensor. Slicing copies; there are
/// no views.
class DenseTensor {
public:
    DenseTensor() : data_(1, 0.0) { init_strides(); }

    explicit DenseTensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)) {
        data_.assign(checked_size(shape_), 0.0);
        init_strides();
    }

    DenseTensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != checked_size(shape_))
            throw DimensionError("DenseTensor: data length does not match shape");
        init_strides();
    }

    static DenseTensor scalar(double v) {
        DenseTensor t;
        t.data_[0] = v;
        return t;
    }

    std::size_t order() const { return shape_.size(); }
    const std::vector<std::size_t>& shape() const { return shape_; }
    const std::vector<std::size_t>& strides() const { return strides_; }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_[axis]; }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }

    double at(std::span<const std::size_t> idx) const {
        return data_[flat_index(idx)];
    }
    double& at(std::span<const std::size_t> idx) { return data_[flat_index(idx)]; }

    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    std::size_t flat_index(std::span<const std::size_t> idx) const {
        if (idx.size() != shape_.size())
            throw IndexError("DenseTensor: index order mismatch");
        std::size_t flat = 0;
        for (std::size_t a = 0; a < idx.size(); ++a) {
            if (idx[a] >= shape_[a]) throw IndexError("DenseTensor: index out of range");
            flat += idx[a] * strides_[a];
        }
        return flat;
    }

    double sum() const {
        double s = 0.0;
        for (double v : data_) s += v;
        return s;
    }

    bool same_shape(const DenseTensor& other) const { return shape_ == other.shape_; }

private:
    static std::size_t checked_size(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t e : shape) {
            if (e == 0) throw DimensionError("DenseTensor: zero extent");
            n *= e;
        }
        return n;
    }

    void init_strides() {
        strides_.assign(shape_.size(), 1);
        for (std::size_t a = shape_.size(); a > 1; --a)
            strides_[a - 2] = strides_[a - 1] * shape_[a - 1];
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
    std::vector<std::size_t> strides_;
};

/// One modality's features: a d x t real matrix, column r is time step r.
/// Row-major storage, matching the on-disk bundle layout.
class FeatureMatrix {
public:
    FeatureMatrix(std::size_t d, std::size_t t) : d_(d), t_(t), v_(d * t, 0.0) {
        check_dims();
    }

    FeatureMatrix(std::size_t d, std::size_t t, std::vector<double> row_major)
        : d_(d), t_(t), v_(std::move(row_major)) {
        check_dims();
        if (v_.size() != d_ * t_)
            throw DimensionError("FeatureMatrix: data length does not match d*t");
        for (double x : v_)
            if (!std::isfinite(x)) throw NumericError("FeatureMatrix: non-finite entry");
    }

    std::size_t d() const { return d_; }
    std::size_t t() const { return t_; }

    double operator()(std::size_t i, std::size_t r) const { return v_[i * t_ + r]; }
    double& operator()(std::size_t i, std::size_t r) { return v_[i * t_ + r]; }

    std::vector<double> column(std::size_t r) const {
        if (r >= t_) throw IndexError("FeatureMatrix: column out of range");
        std::vector<double> c(d_);
        for (std::size_t i = 0; i < d_; ++i) c[i] = v_[i * t_ + r];
        return c;
    }

    /// Row sums, i.e. the matrix applied to the all-ones time vector.
    std::vector<double> row_sums() const {
        std::vector<double> s(d_, 0.0);
        for (std::size_t i = 0; i < d_; ++i)
            for (std::size_t r = 0; r < t_; ++r) s[i] += v_[i * t_ + r];
        return s;
    }

    const std::vector<double>& values() const { return v_; }
    std::vector<double>& values() { return v_; }

private:
    void check_dims() const {
        if (d_ == 0 || t_ == 0) throw DimensionError("FeatureMatrix: d and t must be >= 1");
    }

    std::size_t d_, t_;
    std::vector<double> v_;
};

namespace detail {

inline std::size_t checked_extent_product(std::span<const std::size_t> extents,
                                          std::size_t cap) {
    std::size_t total = 1;
    for (std::size_t e : extents) {
        if (e != 0 && total > cap / e)
            throw CapacityError("dense tensor of " + std::to_string(total) + "x" +
                                std::to_string(e) + " elements exceeds cap " +
                                std::to_string(cap));
        total *= e;
    }
    return total;
}

} // namespace detail

/// Correlation tensor of n modalities in a common d-dimensional space:
/// entry (r_1,...,r_n) is the inner product over the feature dimension of
/// column r_i from each modality. For n = 1 this degenerates to the column
/// sums of the single matrix.
inline DenseTensor tensor_multiply(std::span<const FeatureMatrix> modalities,
                                   std::size_t max_elements = kDefaultElementCap) {
    if (modalities.empty())
        throw ArgumentError("tensor_multiply: empty modality list");
    const std::size_t n = modalities.size();
    const std::size_t d = modalities[0].d();
    std::vector<std::size_t> shape(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (modalities[i].d() != d)
            throw DimensionError("tensor_multiply: modalities disagree on common dimension");
        shape[i] = modalities[i].t();
    }
    const std::size_t total = detail::checked_extent_product(shape, max_elements);

    DenseTensor out(shape);
    // Odometer over (r_1,...,r_n) with a stack of partial column products:
    // prefix[i] = col_1(r_1) o ... o col_{i+1}(r_{i+1}). Only suffixes of the
    // stack change when the odometer advances.
    std::vector<std::size_t> idx(n, 0);
    std::vector<std::vector<double>> prefix(n, std::vector<double>(d));
    auto refresh = [&](std::size_t from) {
        for (std::size_t i = from; i < n; ++i) {
            const FeatureMatrix& m = modalities[i];
            const std::size_t r = idx[i];
            if (i == 0) {
                for (std::size_t q = 0; q < d; ++q) prefix[0][q] = m(q, r);
            } else {
                const std::vector<double>& prev = prefix[i - 1];
                for (std::size_t q = 0; q < d; ++q) prefix[i][q] = prev[q] * m(q, r);
            }
        }
    };
    refresh(0);
    for (std::size_t flat = 0; flat < total; ++flat) {
        double s = 0.0;
        for (double v : prefix[n - 1]) s += v;
        out[flat] = s;
        // advance odometer (row-major: last axis fastest)
        std::size_t axis = n;
        while (axis > 0) {
            --axis;
            if (++idx[axis] < shape[axis]) break;
            idx[axis] = 0;
        }
        if (flat + 1 < total) refresh(axis);
    }
    return out;
}

/// Fix one axis at a position and copy the remaining order-(n-1) tensor.
/// For an order-1 input the result is an order-0 scalar tensor.
inline DenseTensor slice_fix_axis(const DenseTensor& t, std::size_t axis,
                                  std::size_t position) {
    const std::size_t n = t.order();
    if (axis >= n) throw IndexError("slice_fix_axis: axis out of range");
    if (position >= t.extent(axis)) throw IndexError("slice_fix_axis: position out of range");
    std::vector<std::size_t> out_shape;
    out_shape.reserve(n - 1);
    for (std::size_t a = 0; a < n; ++a)
        if (a != axis) out_shape.push_back(t.extent(a));

    DenseTensor out(out_shape);
    std::vector<std::size_t> idx(n, 0);
    idx[axis] = position;
    const std::size_t count = out.size();
    for (std::size_t flat = 0; flat < count; ++flat) {
        std::size_t in_flat = 0;
        for (std::size_t a = 0; a < n; ++a) in_flat += idx[a] * t.strides()[a];
        out[flat] = t[in_flat];
        for (std::size_t a = n; a > 0;) {
            --a;
            if (a == axis) continue;
            if (++idx[a] < t.extent(a)) break;
            idx[a] = 0;
        }
    }
    return out;
}

/// Full contraction of the Hadamard product of two same-shape tensors.
inline double weighted_sum(const DenseTensor& t, const DenseTensor& w) {
    if (!t.same_shape(w)) throw DimensionError("weighted_sum: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * w[i];
    return s;
}

/// Rank-1 tensor from factor vectors: entry (r_1,...,r_n) = prod_i f_i[r_i].
inline DenseTensor outer_rank1(std::span<const std::vector<double>> factors) {
    if (factors.empty()) throw ArgumentError("outer_rank1: empty factor list");
    std::vector<std::size_t> shape(factors.size());
    for (std::size_t i = 0; i < factors.size(); ++i) {
        if (factors[i].empty()) throw ArgumentError("outer_rank1: empty factor vector");
        shape[i] = factors[i].size();
    }
    DenseTensor out(shape);
    const std::size_t n = factors.size();
    std::vector<std::size_t> idx(n, 0);
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
        double p = 1.0;
        for (std::size_t i = 0; i < n; ++i) p *= factors[i][idx[i]];
        out[flat] = p;
        for (std::size_t a = n; a > 0;) {
            --a;
            if (++idx[a] < shape[a]) break;
            idx[a] = 0;
        }
    }
    return out;
}

/// Stable log-softmax companion, used by the decoders.
inline std::vector<double> log_softmax_stable(std::span<const double> scores) {
    if (scores.empty()) throw ArgumentError("log_softmax_stable: empty score vector");
    double hi = scores[0];
    for (double s : scores) {
        if (!std::isfinite(s)) throw NumericError("log_softmax_stable: non-finite score");
        if (s > hi) hi = s;
    }
    double z = 0.0;
    for (double s : scores) z += std::exp(s - hi);
    const double log_z = hi + std::log(z);
    std::vector<double> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] - log_z;
    return out;
}

/// Numerically stable softmax: subtracts the max before exponentiation.
inline std::vector<double> softmax_stable(std::span<const double> scores) {
    if (scores.empty()) throw ArgumentError("softmax_stable: empty score vector");
    double hi = scores[0];
    for (double s : scores) {
        if (!std::isfinite(s)) throw NumericError("softmax_stable: non-finite score");
        if (s > hi) hi = s;
    }
    std::vector<double> out(scores.size());
    double z = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - hi);
        z += out[i];
    }
    for (double& v : out) v /= z;
    return out;
}

} // namespace hoca
