#pragma once

// Additive (Bahdanau-style) attention: common-space projection, per-column
// scores, softmax weights, and context vectors. The projection doubles as
// the front-end that puts every modality into the shared d-dimensional
// space used by the cross-modal mechanisms.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "hoca/errors.hpp"
#include "hoca/tensor.hpp"

namespace hoca {

/// Decoder hidden state used as the attention query.
using Query = std::vector<double>;

/// Per-modality projection/score parameters. `a` is the attention layer
/// size, which is also the common-space dimension.
struct ProjectionParams {
    DenseTensor W1;          // {a, hidden}
    DenseTensor U1;          // {a, d_modality}
    std::vector<double> b1;  // a
    std::vector<double> w1;  // a, score vector

    std::size_t attention_size() const { return b1.size(); }
};

inline std::vector<double> mat_vec(const DenseTensor& m, std::span<const double> v) {
    if (m.order() != 2) throw DimensionError("mat_vec: matrix must be order 2");
    const std::size_t rows = m.extent(0), cols = m.extent(1);
    if (v.size() != cols) throw DimensionError("mat_vec: inner dimension mismatch");
    std::vector<double> out(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += m[i * cols + j] * v[j];
        out[i] = s;
    }
    return out;
}

namespace detail {

inline void check_projection(const Query& query, const FeatureMatrix& feats,
                             const ProjectionParams& p) {
    const std::size_t a = p.attention_size();
    if (p.W1.order() != 2 || p.W1.extent(0) != a || p.W1.extent(1) != query.size())
        throw DimensionError("projection: W1 shape does not match query/attention size");
    if (p.U1.order() != 2 || p.U1.extent(0) != a || p.U1.extent(1) != feats.d())
        throw DimensionError("projection: U1 shape does not match features");
    if (p.w1.size() != a) throw DimensionError("projection: w1 length mismatch");
}

} // namespace detail

/// Maps raw modality features into the common space, one column per time
/// step: tanh(W1 h + U1 x_r + b1). The query term can be dropped for the
/// query-free ablation.
inline FeatureMatrix project_common(const Query& query, const FeatureMatrix& feats,
                                    const ProjectionParams& p,
                                    bool query_conditioned = true) {
    detail::check_projection(query, feats, p);
    const std::size_t a = p.attention_size();
    std::vector<double> qterm(a, 0.0);
    if (query_conditioned) qterm = mat_vec(p.W1, query);
    FeatureMatrix out(a, feats.t());
    for (std::size_t r = 0; r < feats.t(); ++r) {
        std::vector<double> uterm = mat_vec(p.U1, feats.column(r));
        for (std::size_t i = 0; i < a; ++i)
            out(i, r) = std::tanh(qterm[i] + uterm[i] + p.b1[i]);
    }
    return out;
}

/// Additive attention scores, one per time step.
inline std::vector<double> unary_scores(const Query& query, const FeatureMatrix& feats,
                                        const ProjectionParams& p,
                                        bool query_conditioned = true) {
    FeatureMatrix common = project_common(query, feats, p, query_conditioned);
    std::vector<double> scores(feats.t(), 0.0);
    for (std::size_t r = 0; r < feats.t(); ++r) {
        double s = 0.0;
        for (std::size_t i = 0; i < common.d(); ++i) s += p.w1[i] * common(i, r);
        scores[r] = s;
    }
    return scores;
}

inline std::vector<double> unary_weights(std::span<const double> scores) {
    return softmax_stable(scores);
}

/// Attention-weighted column sum.
inline std::vector<double> context_vector(std::span<const double> weights,
                                          const FeatureMatrix& feats) {
    if (weights.size() != feats.t())
        throw DimensionError("context_vector: weight count does not match time steps");
    std::vector<double> ctx(feats.d(), 0.0);
    for (std::size_t r = 0; r < feats.t(); ++r)
        for (std::size_t i = 0; i < feats.d(); ++i) ctx[i] += weights[r] * feats(i, r);
    return ctx;
}

} // namespace hoca
