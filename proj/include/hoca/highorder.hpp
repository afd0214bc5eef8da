#pragma once

// Dense high-order cross-modal attention: materialize the correlation
// tensor of all modalities, slice it per target time step, contract the
// slice with an importance tensor, and softmax the scores. This is the
// brute-force path; it doubles as the correctness oracle for the low-rank
// mechanism.

#include <cstddef>
#include <span>
#include <vector>

#include "hoca/errors.hpp"
#include "hoca/tensor.hpp"

namespace hoca {

/// One dense importance tensor per target modality, shaped over the
/// non-target temporal extents.
struct HocaParams {
    std::vector<DenseTensor> importance;
};

namespace detail {

inline void check_importance(const DenseTensor& corr, const DenseTensor& importance,
                             std::size_t target) {
    if (target >= corr.order())
        throw IndexError("high-order attention: target modality out of range");
    std::vector<std::size_t> expect;
    for (std::size_t a = 0; a < corr.order(); ++a)
        if (a != target) expect.push_back(corr.extent(a));
    if (importance.shape() != expect)
        throw DimensionError("high-order attention: importance shape mismatch");
}

} // namespace detail

/// Pre-softmax scores for one target, given an already-built correlation
/// tensor: score_r = sum[ W o slice_r ].
inline std::vector<double> hoca_scores_from_tensor(const DenseTensor& corr,
                                                   const DenseTensor& importance,
                                                   std::size_t target) {
    detail::check_importance(corr, importance, target);
    const std::size_t t = corr.extent(target);
    std::vector<double> scores(t, 0.0);
    for (std::size_t r = 0; r < t; ++r)
        scores[r] = weighted_sum(slice_fix_axis(corr, target, r), importance);
    return scores;
}

inline std::vector<double> hoca_scores(std::span<const FeatureMatrix> modalities,
                                       const DenseTensor& importance, std::size_t target,
                                       std::size_t max_elements = kDefaultElementCap) {
    DenseTensor corr = tensor_multiply(modalities, max_elements);
    return hoca_scores_from_tensor(corr, importance, target);
}

inline std::vector<double> hoca_weights(std::span<const FeatureMatrix> modalities,
                                        const DenseTensor& importance, std::size_t target,
                                        std::size_t max_elements = kDefaultElementCap) {
    return softmax_stable(hoca_scores(modalities, importance, target, max_elements));
}

/// Weights for every target modality against one shared correlation tensor
/// (built once; slicing per target is numerically identical to per-target
/// calls).
inline std::vector<std::vector<double>> hoca_all_weights(
    std::span<const FeatureMatrix> modalities, const HocaParams& params,
    std::size_t max_elements = kDefaultElementCap) {
    if (params.importance.size() != modalities.size())
        throw DimensionError("hoca_all_weights: one importance tensor per modality required");
    DenseTensor corr = tensor_multiply(modalities, max_elements);
    std::vector<std::vector<double>> out;
    out.reserve(modalities.size());
    for (std::size_t l = 0; l < modalities.size(); ++l)
        out.push_back(softmax_stable(hoca_scores_from_tensor(corr, params.importance[l], l)));
    return out;
}

} // namespace hoca
