#pragma once

// Multiple attentive fusion: per-modality weight families of different
// arity (unary / binary / ternary), a trainable scalar combination per
// family, hierarchical softmax over modality context vectors, and the fused
// word distribution.

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hoca/attention.hpp"
#include "hoca/errors.hpp"
#include "hoca/highorder.hpp"
#include "hoca/lowrank.hpp"
#include "hoca/tensor.hpp"

namespace hoca {

enum class Mechanism { Unary, Dense, Lowrank };

inline std::string to_string(Mechanism m) {
    switch (m) {
        case Mechanism::Unary: return "unary";
        case Mechanism::Dense: return "hoca";
        case Mechanism::Lowrank: return "lowrank";
    }
    return "?";
}

inline Mechanism mechanism_from_string(const std::string& s) {
    if (s == "unary") return Mechanism::Unary;
    if (s == "hoca") return Mechanism::Dense;
    if (s == "lowrank") return Mechanism::Lowrank;
    throw ConfigError("unknown mechanism: " + s + " (expected unary|hoca|lowrank)");
}

/// Which attention arities are enabled. For n modalities the arity-2 family
/// set contains every pair including the target.
struct ArityConfig {
    std::vector<int> arities{1, 2, 3};

    void validate(std::size_t n_modalities) const {
        if (arities.empty()) throw ConfigError("ArityConfig: at least one arity required");
        for (int a : arities) {
            if (a < 1 || a > 3) throw ConfigError("ArityConfig: arity must be 1, 2, or 3");
            if (static_cast<std::size_t>(a) > n_modalities)
                throw ConfigError("ArityConfig: arity exceeds modality count");
        }
        for (std::size_t i = 1; i < arities.size(); ++i)
            if (arities[i] <= arities[i - 1])
                throw ConfigError("ArityConfig: arities must be strictly increasing");
    }

    bool has(int a) const { return std::find(arities.begin(), arities.end(), a) != arities.end(); }
};

/// One weight family for a target modality: the target plus `partners`
/// other modalities enter the attention computation.
struct Family {
    int arity = 1;
    std::vector<std::size_t> partners; // ascending modality indices, excludes target

    std::string label() const {
        if (arity == 1) return "unary";
        std::string head = arity == 2 ? "binary" : "ternary";
        std::string out = head + ":";
        for (std::size_t i = 0; i < partners.size(); ++i) {
            if (i) out += "+";
            out += std::to_string(partners[i]);
        }
        return out;
    }
};

/// Fixed family enumeration for one target: unary, then binary with each
/// other modality in ascending order, then ternary over each pair.
inline std::vector<Family> enumerate_families(const ArityConfig& config, std::size_t n,
                                              std::size_t target) {
    config.validate(n);
    if (target >= n) throw IndexError("enumerate_families: target out of range");
    std::vector<Family> fams;
    if (config.has(1)) fams.push_back(Family{1, {}});
    if (config.has(2))
        for (std::size_t m = 0; m < n; ++m)
            if (m != target) fams.push_back(Family{2, {m}});
    if (config.has(3))
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b)
                if (a != target && b != target) fams.push_back(Family{3, {a, b}});
    return fams;
}

/// Per-(target, family) attention parameters. The factor set is empty for
/// the unary family; `contraction` is the score vector in the common space
/// (for the unary family it plays the role of the additive score vector).
struct FamilyAttention {
    RankFactors factors;
    std::vector<double> contraction;
};

struct MafAttentionParams {
    std::vector<ProjectionParams> proj;             // per modality
    std::vector<std::vector<FamilyAttention>> fam;  // [target][family index]
    bool query_conditioned = true;
};

/// Attention weights for one (target, family) pair over common-space
/// features. The unary family is additive attention regardless of the
/// mechanism; higher arities go through the dense or low-rank path.
inline std::vector<double> family_weights(std::span<const FeatureMatrix> common,
                                          const Family& family, std::size_t target,
                                          Mechanism mech, const FamilyAttention& params,
                                          std::size_t max_elements = kDefaultElementCap) {
    std::vector<FeatureMatrix> sub;
    sub.reserve(1 + family.partners.size());
    std::size_t target_pos = 0;
    {
        // family members in ascending modality order
        std::vector<std::size_t> members = family.partners;
        members.push_back(target);
        std::sort(members.begin(), members.end());
        for (std::size_t i = 0; i < members.size(); ++i) {
            if (members[i] == target) target_pos = i;
            sub.push_back(common[members[i]]);
        }
    }
    if (family.arity == 1 || mech != Mechanism::Dense) {
        RankFactors f = params.factors;
        f.target = target_pos;
        return lowrank_weights(sub, f, params.contraction);
    }
    RankFactors f = params.factors;
    f.target = target_pos;
    return hoca_weights(sub, reconstruct_dense_weight(f, max_elements), target_pos,
                        max_elements);
}

/// All families for all targets. Raw modality features are first projected
/// into the common space with the per-modality projections.
inline std::vector<std::vector<std::vector<double>>> arity_weights(
    const Query& query, std::span<const FeatureMatrix> raw, Mechanism mech,
    const ArityConfig& config, const MafAttentionParams& params,
    std::size_t max_elements = kDefaultElementCap) {
    const std::size_t n = raw.size();
    config.validate(n);
    if (mech == Mechanism::Unary && !(config.arities == std::vector<int>{1}))
        throw ConfigError("the unary mechanism supports only arities={1}");
    if (params.proj.size() != n)
        throw DimensionError("arity_weights: one projection per modality required");
    std::vector<FeatureMatrix> common;
    common.reserve(n);
    for (std::size_t l = 0; l < n; ++l)
        common.push_back(project_common(query, raw[l], params.proj[l],
                                        params.query_conditioned));

    std::vector<std::vector<std::vector<double>>> out(n);
    for (std::size_t l = 0; l < n; ++l) {
        auto fams = enumerate_families(config, n, l);
        if (params.fam[l].size() != fams.size())
            throw DimensionError("arity_weights: family parameter count mismatch");
        for (std::size_t fi = 0; fi < fams.size(); ++fi)
            out[l].push_back(family_weights(common, fams[fi], l, mech, params.fam[l][fi],
                                            max_elements));
    }
    return out;
}

/// Trainable combination: softmax over time of the theta-weighted sum of
/// the family weight vectors.
inline std::vector<double> combine_weights(
    std::span<const std::vector<double>> families, std::span<const double> thetas) {
    if (families.empty()) throw ArgumentError("combine_weights: no families");
    if (thetas.size() != families.size())
        throw DimensionError("combine_weights: one theta per family required");
    const std::size_t t = families[0].size();
    std::vector<double> pre(t, 0.0);
    for (std::size_t f = 0; f < families.size(); ++f) {
        if (families[f].size() != t)
            throw DimensionError("combine_weights: family length mismatch");
        for (std::size_t r = 0; r < t; ++r) pre[r] += thetas[f] * families[f][r];
    }
    return softmax_stable(pre);
}

/// Shared parameters of the hierarchical context fusion and word readout.
struct HierarchicalParams {
    DenseTensor We;                 // {a_e, hidden}
    DenseTensor Ue;                 // {a_e, d_ctx}
    std::vector<double> be;         // a_e
    std::vector<double> we;         // a_e
    DenseTensor Wph;                // {V, hidden}
    std::vector<DenseTensor> Wpk;   // per modality, {V, d_ctx}
    std::vector<double> bp;         // V
};

/// Softmax over modalities of additive scores on the context vectors.
inline std::vector<double> hierarchical_modality_weights(
    const Query& query, std::span<const std::vector<double>> contexts,
    const HierarchicalParams& p) {
    if (contexts.empty())
        throw ArgumentError("hierarchical_modality_weights: no contexts");
    std::vector<double> scores(contexts.size(), 0.0);
    std::vector<double> qterm = mat_vec(p.We, query);
    for (std::size_t k = 0; k < contexts.size(); ++k) {
        std::vector<double> cterm = mat_vec(p.Ue, contexts[k]);
        double e = 0.0;
        for (std::size_t i = 0; i < p.we.size(); ++i)
            e += p.we[i] * std::tanh(qterm[i] + cterm[i] + p.be[i]);
        scores[k] = e;
    }
    return softmax_stable(scores);
}

/// Word distribution from the query, the per-modality contexts, and their
/// hierarchical weights.
inline std::vector<double> fused_logits(const Query& query,
                                        std::span<const std::vector<double>> contexts,
                                        std::span<const double> beta,
                                        const HierarchicalParams& p) {
    if (contexts.size() != beta.size())
        throw DimensionError("fused_logits: one beta per context required");
    if (contexts.size() != p.Wpk.size())
        throw DimensionError("fused_logits: one readout matrix per modality required");
    const std::size_t v = p.bp.size();
    if (v < 2) throw ConfigError("fused_logits: vocabulary must have at least 2 entries");
    std::vector<double> logits = mat_vec(p.Wph, query);
    for (std::size_t i = 0; i < v; ++i) logits[i] += p.bp[i];
    for (std::size_t k = 0; k < contexts.size(); ++k) {
        std::vector<double> dk = mat_vec(p.Wpk[k], contexts[k]);
        for (std::size_t i = 0; i < v; ++i) logits[i] += beta[k] * dk[i];
    }
    return softmax_stable(logits);
}

} // namespace hoca
