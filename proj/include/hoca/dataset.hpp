#pragma once

// Synthetic multimodal captioning data with a planted cross-modal rule.
//
// Modality 0 carries content: each column holds a group tag (one bit per cue
// modality) plus a symbol, with all group tags and symbols distinct across
// the base columns. Every other modality broadcasts one cue bit in its own
// block of the feature vector. The caption token at step s is the symbol of
// the column whose tag matches the combined cue bits (rotated by s), so
// recovering it requires conjoining evidence from all cue modalities:
// no single modality reveals which column matters, and the symbols are a
// permutation, which kills frequency shortcuts.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hoca/errors.hpp"
#include "hoca/rng.hpp"
#include "hoca/tensor.hpp"

namespace hoca {

// Reserved token ids.
inline constexpr int kEos = 0;
inline constexpr int kBos = 1;
inline constexpr int kPad = 2;
inline constexpr int kUnk = 3;
inline constexpr int kReservedTokens = 4;

struct DatasetSpec {
    std::size_t n_modalities = 3;
    std::size_t d_raw = 8;
    // one {min,max} temporal range per modality (or a single range for all);
    // lengths are drawn once per dataset so factor parameters can bind to them
    std::vector<std::array<std::size_t, 2>> t_range{{4, 4}};
    std::size_t vocab = 8;
    std::size_t n_items = 500;
    double correlation_strength = 1.0;
    std::size_t caption_len = 1;
    double noise = 0.02;
    double val_fraction = 0.1;
    double test_fraction = 0.1;
};

enum class Split { Train = 0, Val = 1, Test = 2 };

struct Item {
    std::vector<FeatureMatrix> features;
    std::vector<int> caption; // content tokens, no BOS/EOS
    int rule_id = 0;          // 1 = planted rule, 0 = random caption
    Split split = Split::Train;
};

struct SyntheticDataset {
    DatasetSpec spec;
    std::size_t groups = 1;        // 2^(n_modalities-1)
    std::vector<std::size_t> t;    // drawn temporal length per modality
    std::vector<Item> items;

    std::size_t vocab() const { return spec.vocab; }

    std::vector<const Item*> split_items(Split s) const {
        std::vector<const Item*> out;
        for (const Item& it : items)
            if (it.split == s) out.push_back(&it);
        return out;
    }
};

namespace detail {

inline std::size_t cue_block_offset(std::size_t cue_index) { return 2 * cue_index; }

inline std::size_t symbol_block_offset(std::size_t n_modalities) {
    return 2 * (n_modalities - 1);
}

} // namespace detail

/// The planted rule applied to an item's features: for each caption step,
/// read the cue bits, rotate by the step index, and fetch the symbol of the
/// first matching content column. Used by tests and diagnostics.
inline std::vector<int> decode_by_rule(const SyntheticDataset& data, const Item& item) {
    const std::size_t n = data.spec.n_modalities;
    const std::size_t groups = data.groups;
    const std::size_t sym_off = detail::symbol_block_offset(n);
    const std::size_t n_symbols = data.spec.vocab - kReservedTokens;

    std::size_t cue = 0;
    for (std::size_t m = 1; m < n; ++m) {
        const FeatureMatrix& f = item.features[m];
        const std::size_t off = detail::cue_block_offset(m - 1);
        const bool bit = f(off + 1, 0) > f(off, 0);
        cue |= (bit ? 1u : 0u) << (m - 1);
    }

    std::vector<int> tokens;
    for (std::size_t s = 0; s < item.caption.size(); ++s) {
        const std::size_t want = (cue + s) % groups;
        const FeatureMatrix& content = item.features[0];
        int tok = kUnk;
        for (std::size_t r = 0; r < content.t(); ++r) {
            std::size_t tag = 0;
            for (std::size_t p = 0; p + 1 < n; ++p) {
                const std::size_t off = detail::cue_block_offset(p);
                if (content(off + 1, r) > content(off, r)) tag |= 1u << p;
            }
            if (tag != want) continue;
            std::size_t best = 0;
            for (std::size_t k = 1; k < n_symbols; ++k)
                if (content(sym_off + k, r) > content(sym_off + best, r)) best = k;
            tok = kReservedTokens + static_cast<int>(best);
            break;
        }
        tokens.push_back(tok);
    }
    return tokens;
}

inline SyntheticDataset synth_dataset(std::uint64_t seed, const DatasetSpec& spec) {
    if (spec.n_modalities < 1) throw ConfigError("dataset: need at least one modality");
    if (spec.vocab < kReservedTokens + 1)
        throw ConfigError("dataset: vocabulary must hold the reserved tokens plus content");
    if (spec.caption_len < 1) throw ConfigError("dataset: caption_len must be >= 1");
    if (spec.correlation_strength < 0.0 || spec.correlation_strength > 1.0)
        throw ConfigError("dataset: correlation_strength must be in [0, 1]");

    const std::size_t n = spec.n_modalities;
    const std::size_t groups = std::size_t{1} << (n - 1);
    const std::size_t n_symbols = spec.vocab - kReservedTokens;
    if (n_symbols < groups)
        throw ConfigError("dataset: vocabulary too small for " + std::to_string(groups) +
                          " groups (need vocab >= " + std::to_string(kReservedTokens + groups) +
                          ")");
    const std::size_t d_needed = detail::symbol_block_offset(n) + n_symbols;
    if (spec.d_raw < d_needed)
        throw ConfigError("dataset: d_raw must be >= " + std::to_string(d_needed) +
                          " for the block layout");

    std::vector<std::array<std::size_t, 2>> ranges = spec.t_range;
    if (ranges.size() == 1) ranges.assign(n, ranges[0]);
    if (ranges.size() != n)
        throw ConfigError("dataset: t_range must have one entry (shared) or one per modality");
    for (const auto& r : ranges)
        if (r[0] < 1 || r[1] < r[0]) throw ConfigError("dataset: invalid temporal range");
    if (ranges[0][1] < groups)
        throw ConfigError("dataset: content modality needs at least " +
                          std::to_string(groups) + " time steps");

    SyntheticDataset out;
    out.spec = spec;
    out.groups = groups;

    Rng root(seed);
    Rng shape_rng = root.stream("shape");
    for (std::size_t m = 0; m < n; ++m) {
        std::size_t lo = ranges[m][0], hi = ranges[m][1];
        std::size_t t = lo + shape_rng.below(hi - lo + 1);
        if (m == 0 && t < groups) t = groups;
        out.t.push_back(t);
    }

    const std::size_t sym_off = detail::symbol_block_offset(n);
    const std::size_t n_train =
        static_cast<std::size_t>(static_cast<double>(spec.n_items) *
                                 (1.0 - spec.val_fraction - spec.test_fraction) + 0.5);
    const std::size_t n_val = static_cast<std::size_t>(
        static_cast<double>(spec.n_items) * spec.val_fraction + 0.5);

    for (std::size_t idx = 0; idx < spec.n_items; ++idx) {
        Rng rng = root.stream("item").stream(idx);
        Item item;
        item.split = idx < n_train ? Split::Train
                     : idx < n_train + n_val ? Split::Val
                                             : Split::Test;

        // content modality: distinct tags and symbols on the base columns,
        // duplicated base columns beyond them
        std::vector<std::size_t> tag_of = rng.permutation(groups);
        std::vector<std::size_t> sym_perm = rng.permutation(n_symbols);
        std::vector<std::size_t> tags(out.t[0]), syms(out.t[0]);
        for (std::size_t r = 0; r < out.t[0]; ++r) {
            const std::size_t src = r < groups ? r : rng.below(groups);
            tags[r] = tag_of[src];
            syms[r] = sym_perm[src];
        }
        FeatureMatrix content(spec.d_raw, out.t[0]);
        for (std::size_t r = 0; r < out.t[0]; ++r) {
            for (std::size_t p = 0; p + 1 < n; ++p)
                content(detail::cue_block_offset(p) + ((tags[r] >> p) & 1u), r) = 1.0;
            content(sym_off + syms[r], r) = 1.0;
        }
        item.features.push_back(content);

        // cue modalities broadcast one bit each
        std::size_t cue = 0;
        for (std::size_t m = 1; m < n; ++m) {
            const std::size_t bit = rng.below(2);
            cue |= bit << (m - 1);
            FeatureMatrix f(spec.d_raw, out.t[m]);
            for (std::size_t r = 0; r < out.t[m]; ++r)
                f(detail::cue_block_offset(m - 1) + bit, r) = 1.0;
            item.features.push_back(f);
        }

        if (spec.noise > 0.0)
            for (auto& f : item.features)
                for (double& v : f.values()) v += rng.uniform(-spec.noise, spec.noise);

        // caption: planted rule with probability correlation_strength
        item.rule_id = rng.next_double() < spec.correlation_strength ? 1 : 0;
        for (std::size_t s = 0; s < spec.caption_len; ++s) {
            if (item.rule_id == 1) {
                const std::size_t want = (cue + s) % groups;
                std::size_t src = 0;
                for (std::size_t g = 0; g < groups; ++g)
                    if (tag_of[g] == want) src = g;
                item.caption.push_back(kReservedTokens + static_cast<int>(sym_perm[src]));
            } else {
                item.caption.push_back(kReservedTokens +
                                       static_cast<int>(rng.below(n_symbols)));
            }
        }
        out.items.push_back(std::move(item));
    }
    return out;
}

} // namespace hoca
