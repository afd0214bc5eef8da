#pragma once

// Greedy and beam decoding over a trained captioner. Scores are plain sums
// of token log-probabilities with no length normalization; a finished
// hypothesis includes the end-token term. Finished hypotheses stay in the
// beam and compete with active ones for the width slots.

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

#include "hoca/dataset.hpp"
#include "hoca/errors.hpp"
#include "hoca/model.hpp"

namespace hoca {

struct Hypothesis {
    std::vector<int> tokens;   // content tokens; the end token is implicit
    double log_prob = 0.0;
    bool finished = false;
};

/// Generic beam search. `step` maps (state, input token) to the next state
/// and log-probabilities over the vocabulary; decoding starts from `bos`
/// and a hypothesis finishes when it emits `eos` (which counts as a step).
/// Candidates are ranked by score with ties resolved toward earlier
/// generation (lower token id first), so width 1 reproduces greedy search.
template <class State, class StepFn>
Hypothesis beam_search(const State& init, StepFn&& step, int bos, int eos,
                       std::size_t width, std::size_t max_len) {
    if (width == 0) throw ArgumentError("beam_search: width must be >= 1");

    struct Entry {
        Hypothesis hyp;
        State state;
        int next_input;
    };
    std::vector<Entry> beam{Entry{Hypothesis{}, init, bos}};

    for (std::size_t s = 0; s < max_len; ++s) {
        if (beam.front().hyp.finished) break; // no extension can overtake it
        std::vector<Entry> pool;
        for (Entry& e : beam) {
            if (e.hyp.finished) {
                pool.push_back(std::move(e));
                continue;
            }
            auto [next_state, logp] = step(e.state, e.next_input);
            for (std::size_t v = 0; v < logp.size(); ++v) {
                Entry child;
                child.hyp = e.hyp;
                child.hyp.log_prob += logp[v];
                if (static_cast<int>(v) == eos) {
                    child.hyp.finished = true;
                    child.next_input = eos;
                } else {
                    child.hyp.tokens.push_back(static_cast<int>(v));
                    child.state = next_state;
                    child.next_input = static_cast<int>(v);
                }
                pool.push_back(std::move(child));
            }
        }
        std::stable_sort(pool.begin(), pool.end(), [](const Entry& a, const Entry& b) {
            return a.hyp.log_prob > b.hyp.log_prob;
        });
        if (pool.size() > width) pool.resize(width);
        beam = std::move(pool);
    }

    for (const Entry& e : beam)
        if (e.hyp.finished) return e.hyp; // beam is sorted: best finished
    return beam.front().hyp;
}

/// Argmax decoding; ties pick the lowest token id. Stops on the end token
/// (not appended) or after max_len emissions.
template <class State, class StepFn>
Hypothesis greedy_search(const State& init, StepFn&& step, int bos, int eos,
                         std::size_t max_len) {
    Hypothesis hyp;
    State state = init;
    int input = bos;
    for (std::size_t s = 0; s < max_len; ++s) {
        auto [next_state, logp] = step(state, input);
        std::size_t best = 0;
        for (std::size_t v = 1; v < logp.size(); ++v)
            if (logp[v] > logp[best]) best = v;
        hyp.log_prob += logp[best];
        if (static_cast<int>(best) == eos) {
            hyp.finished = true;
            break;
        }
        hyp.tokens.push_back(static_cast<int>(best));
        state = next_state;
        input = static_cast<int>(best);
    }
    return hyp;
}

/// Encodes an item's features once and exposes the per-step decoder.
class DecodeSession {
public:
    DecodeSession(const CaptionModel& model, const std::vector<FeatureMatrix>& feats)
        : model_(model), encoded_(model.encode_values(feats)) {}

    CaptionModel::DecState initial() const { return model_.initial_state(); }

    std::pair<CaptionModel::DecState, std::vector<double>> step(
        const CaptionModel::DecState& state, int token,
        CaptionModel::StepTrace* trace = nullptr) const {
        return model_.decode_step(encoded_, state, token, trace);
    }

private:
    const CaptionModel& model_;
    std::vector<DenseTensor> encoded_;
};

inline Hypothesis greedy_decode(const CaptionModel& model,
                                const std::vector<FeatureMatrix>& feats,
                                std::size_t max_len) {
    DecodeSession session(model, feats);
    auto step = [&](const CaptionModel::DecState& s, int tok) { return session.step(s, tok); };
    return greedy_search(session.initial(), step, kBos, kEos, max_len);
}

inline Hypothesis beam_decode(const CaptionModel& model,
                              const std::vector<FeatureMatrix>& feats, std::size_t width,
                              std::size_t max_len) {
    DecodeSession session(model, feats);
    auto step = [&](const CaptionModel::DecState& s, int tok) { return session.step(s, tok); };
    return beam_search(session.initial(), step, kBos, kEos, width, max_len);
}

} // namespace hoca
