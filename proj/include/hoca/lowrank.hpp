#pragma once

// Low-rank high-order attention. The dense importance tensor is replaced by
// a sum of k rank-1 outer products of per-modality factor vectors; scores
// are then computed without ever materializing the correlation tensor:
//
//   score_r = w . ( target_column_r o B )
//   B       = sum_j  Hadamard_{i != target} ( I_i factor_{j,i} )
//
// which is exactly the dense contraction when w is the all-ones vector and
// the dense tensor is reconstructed from the same factors. Storage is
// linear in the number of modalities.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hoca/errors.hpp"
#include "hoca/tensor.hpp"

namespace hoca {

/// Rank-k factorization of one target's importance tensor: one factor
/// vector per non-target modality per rank term, ordered by ascending
/// modality index.
struct RankFactors {
    std::size_t target = 0;
    std::size_t rank = 1;
    // factors[j][p]: rank term j, p-th non-target modality, length t_i
    std::vector<std::vector<std::vector<double>>> factors;

    std::size_t stored_values() const {
        std::size_t n = 0;
        for (const auto& term : factors)
            for (const auto& f : term) n += f.size();
        return n;
    }

    void validate(std::span<const FeatureMatrix> modalities) const {
        const std::size_t n = modalities.size();
        if (target >= n) throw IndexError("RankFactors: target modality out of range");
        if (rank < 1) throw ArgumentError("RankFactors: rank must be >= 1");
        if (factors.size() != rank)
            throw DimensionError("RankFactors: expected one factor set per rank term");
        for (const auto& term : factors) {
            if (term.size() != n - 1)
                throw DimensionError("RankFactors: expected one factor per non-target modality");
            std::size_t p = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (i == target) continue;
                if (term[p].size() != modalities[i].t())
                    throw DimensionError("RankFactors: factor length does not match modality " +
                                         std::to_string(i));
                ++p;
            }
        }
    }
};

/// Factor-weighted column sum of one modality: I w^T.
inline std::vector<double> global_info(const FeatureMatrix& feats,
                                       std::span<const double> factor) {
    if (factor.size() != feats.t())
        throw DimensionError("global_info: factor length does not match time steps");
    std::vector<double> out(feats.d(), 0.0);
    for (std::size_t i = 0; i < feats.d(); ++i) {
        double s = 0.0;
        for (std::size_t r = 0; r < feats.t(); ++r) s += feats(i, r) * factor[r];
        out[i] = s;
    }
    return out;
}

/// Aggregated non-target information for one target modality. With a single
/// modality the product over the (empty) non-target set is the all-ones
/// vector, which makes the unary case coincide with additive attention.
inline std::vector<double> bl_vector(std::span<const FeatureMatrix> modalities,
                                     const RankFactors& f) {
    f.validate(modalities);
    const std::size_t d = modalities[0].d();
    const std::size_t n = modalities.size();
    if (n == 1) return std::vector<double>(d, 1.0);
    std::vector<double> b(d, 0.0);
    for (const auto& term : f.factors) {
        std::vector<double> had(d, 1.0);
        std::size_t p = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == f.target) continue;
            std::vector<double> g = global_info(modalities[i], term[p]);
            for (std::size_t q = 0; q < d; ++q) had[q] *= g[q];
            ++p;
        }
        for (std::size_t q = 0; q < d; ++q) b[q] += had[q];
    }
    return b;
}

/// Pre-softmax low-rank scores with a learned contraction vector.
inline std::vector<double> lowrank_scores(std::span<const FeatureMatrix> modalities,
                                          const RankFactors& f,
                                          std::span<const double> contraction) {
    const FeatureMatrix& target = modalities[f.target];
    if (contraction.size() != target.d())
        throw DimensionError("lowrank_scores: contraction length does not match d");
    std::vector<double> b = bl_vector(modalities, f);
    std::vector<double> scores(target.t(), 0.0);
    for (std::size_t r = 0; r < target.t(); ++r) {
        double s = 0.0;
        for (std::size_t i = 0; i < target.d(); ++i)
            s += contraction[i] * target(i, r) * b[i];
        scores[r] = s;
    }
    return scores;
}

/// Unit-vector mode: the contraction is all-ones, the exact dense identity.
inline std::vector<double> lowrank_scores(std::span<const FeatureMatrix> modalities,
                                          const RankFactors& f) {
    if (f.target >= modalities.size())
        throw IndexError("lowrank_scores: target modality out of range");
    std::vector<double> ones(modalities[f.target].d(), 1.0);
    return lowrank_scores(modalities, f, ones);
}

inline std::vector<double> lowrank_weights(std::span<const FeatureMatrix> modalities,
                                           const RankFactors& f,
                                           std::span<const double> contraction) {
    return softmax_stable(lowrank_scores(modalities, f, contraction));
}

inline std::vector<double> lowrank_weights(std::span<const FeatureMatrix> modalities,
                                           const RankFactors& f) {
    return softmax_stable(lowrank_scores(modalities, f));
}

/// Dense reconstruction sum_j outer(factors_j); used by tests and the
/// benchmark harness only. With no non-target modalities the importance is
/// the order-0 tensor with value 1, matching the all-ones convention above.
inline DenseTensor reconstruct_dense_weight(const RankFactors& f,
                                            std::size_t max_elements = kDefaultElementCap) {
    if (f.factors.empty()) throw ArgumentError("reconstruct_dense_weight: no factor terms");
    if (f.factors[0].empty()) return DenseTensor::scalar(1.0);
    std::vector<std::size_t> extents;
    for (const auto& v : f.factors[0]) extents.push_back(v.size());
    detail::checked_extent_product(extents, max_elements);
    DenseTensor out(extents);
    for (const auto& term : f.factors) {
        DenseTensor t = outer_rank1(term);
        if (t.shape() != out.shape())
            throw DimensionError("reconstruct_dense_weight: inconsistent factor lengths");
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += t[i];
    }
    return out;
}

} // namespace hoca
