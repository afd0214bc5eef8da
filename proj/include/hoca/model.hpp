#pragma once

// Toy encoder-decoder captioner on synthetic multimodal data: per-modality
// bidirectional LSTM encoders, an LSTM decoder whose hidden state queries
// the attention stack, multiple attentive fusion over the configured weight
// families, hierarchical modality weighting, and a fused word readout.
// Training is teacher-forced cross entropy summed over decoder steps.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hoca/autodiff.hpp"
#include "hoca/dataset.hpp"
#include "hoca/errors.hpp"
#include "hoca/fusion.hpp"
#include "hoca/rng.hpp"
#include "hoca/tensor.hpp"

namespace hoca {

struct ModelConfig {
    Mechanism mechanism = Mechanism::Lowrank;
    ArityConfig arities{{1, 2, 3}};
    std::size_t rank = 1;
    std::size_t hidden = 32;       // decoder LSTM size
    std::size_t enc_hidden = 8;    // per direction; encoder output is twice this
    std::size_t emb_dim = 8;
    std::size_t common_dim = 16;   // attention layer size / common space
    std::size_t hier_dim = 16;     // additive layer size of the context fusion
    bool query_conditioned = true;
    double dropout = 0.0;
    std::size_t max_elements = kDefaultElementCap;
};

class CaptionModel {
public:
    CaptionModel(ModelConfig cfg, std::size_t n_modalities, std::size_t d_raw,
                 std::vector<std::size_t> t, std::size_t vocab, std::uint64_t seed)
        : cfg_(std::move(cfg)), n_(n_modalities), d_raw_(d_raw), t_(std::move(t)),
          vocab_(vocab), seed_(seed) {
        if (n_ < 1) throw ConfigError("model: need at least one modality");
        if (vocab_ < 2) throw ConfigError("model: vocabulary must have at least 2 entries");
        if (t_.size() != n_) throw ConfigError("model: one temporal length per modality");
        cfg_.arities.validate(n_);
        if (cfg_.mechanism == Mechanism::Unary && !(cfg_.arities.arities == std::vector<int>{1}))
            throw ConfigError("model: the unary mechanism requires arities={1}");
        if (cfg_.rank < 1) throw ConfigError("model: rank must be >= 1");
        if (cfg_.dropout < 0.0 || cfg_.dropout >= 1.0)
            throw ConfigError("model: dropout must be in [0, 1)");
        register_params();
    }

    static CaptionModel for_dataset(ModelConfig cfg, const SyntheticDataset& data,
                                    std::uint64_t seed) {
        return CaptionModel(std::move(cfg), data.spec.n_modalities, data.spec.d_raw,
                            data.t, data.spec.vocab, seed);
    }

    const ModelConfig& config() const { return cfg_; }
    std::size_t n_modalities() const { return n_; }
    std::size_t vocab() const { return vocab_; }
    std::size_t d_raw() const { return d_raw_; }
    const std::vector<std::size_t>& temporal() const { return t_; }
    std::uint64_t seed() const { return seed_; }

    ad::ParamStore& store() { return store_; }
    const ad::ParamStore& store() const { return store_; }

    std::vector<std::string> family_labels(std::size_t target) const {
        std::vector<std::string> out;
        for (const Family& f : enumerate_families(cfg_.arities, n_, target))
            out.push_back(f.label());
        return out;
    }

    /// Per-step attention record for the visualization channel.
    struct StepTrace {
        std::vector<std::vector<std::vector<double>>> families; // [mod][family]
        std::vector<std::vector<double>> combined;              // [mod]
        std::vector<double> beta;
        int token = kPad; // teacher-forced target or decoded token
    };

    struct DecState {
        DenseTensor h, c;
    };

    DecState initial_state() const {
        return DecState{DenseTensor({cfg_.hidden}), DenseTensor({cfg_.hidden})};
    }

    /// Teacher-forced summed cross entropy over one item. Predictions, if
    /// requested, hold the argmax token at each step.
    ad::Var item_loss(ad::Tape& tape, const std::vector<ad::Var>& leaves, const Item& item,
                      std::vector<StepTrace>* trace = nullptr,
                      std::vector<int>* predictions = nullptr,
                      Rng* dropout_rng = nullptr) const {
        Handles hs = organize(leaves);
        std::vector<ad::Var> encoded = encode_graph(tape, hs, item.features);
        ad::Var h = tape.leaf(DenseTensor({cfg_.hidden}));
        ad::Var c = tape.leaf(DenseTensor({cfg_.hidden}));

        std::vector<int> inputs{kBos};
        std::vector<int> targets;
        for (int tok : item.caption) {
            inputs.push_back(tok);
            targets.push_back(tok);
        }
        targets.push_back(kEos);

        ad::Var loss;
        for (std::size_t s = 0; s < targets.size(); ++s) {
            ad::Var logits = step_logits(tape, hs, encoded, h, c, inputs[s],
                                         trace ? &trace->emplace_back() : nullptr,
                                         dropout_rng);
            if (trace) trace->back().token = targets[s];
            if (predictions) {
                std::size_t best = 0;
                for (std::size_t i = 1; i < vocab_; ++i)
                    if (logits.value()[i] > logits.value()[best]) best = i;
                predictions->push_back(static_cast<int>(best));
            }
            ad::Var step = ad::softmax_xent(logits, static_cast<std::size_t>(targets[s]));
            loss = loss ? ad::add(loss, step) : step;
        }
        return loss;
    }

    /// Value-level encoder output, cached by the decoders.
    std::vector<DenseTensor> encode_values(const std::vector<FeatureMatrix>& feats) const {
        ad::Tape tape;
        auto leaves = ad::bind_params(tape, store_);
        Handles hs = organize(leaves);
        std::vector<ad::Var> enc = encode_graph(tape, hs, feats);
        std::vector<DenseTensor> out;
        out.reserve(enc.size());
        for (const auto& e : enc) out.push_back(e.value());
        return out;
    }

    /// One decoder step over pre-encoded features: next state plus
    /// log-probabilities over the vocabulary.
    std::pair<DecState, std::vector<double>> decode_step(
        const std::vector<DenseTensor>& encoded, const DecState& state, int token,
        StepTrace* trace = nullptr) const {
        ad::Tape tape;
        auto leaves = ad::bind_params(tape, store_);
        Handles hs = organize(leaves);
        std::vector<ad::Var> enc;
        enc.reserve(encoded.size());
        for (const auto& e : encoded) enc.push_back(tape.leaf(e));
        ad::Var h = tape.leaf(state.h);
        ad::Var c = tape.leaf(state.c);
        ad::Var logits = step_logits(tape, hs, enc, h, c, token, trace, nullptr);
        if (trace) trace->token = token;
        std::vector<double> logp =
            log_softmax_stable(std::span<const double>(logits.value().values()));
        return {DecState{h.value(), c.value()}, std::move(logp)};
    }

private:
    struct LstmIdx {
        std::size_t Wx, Wh, b;
    };
    struct ProjIdx {
        std::size_t W1, U1, b1;
    };
    struct FamIdx {
        Family family;
        std::vector<std::vector<std::size_t>> factors; // [rank term][partner]
        std::size_t contraction = 0;
        bool has_contraction = false;
        std::size_t theta = 0;
    };

    struct Handles; // leaf views, defined below

    void register_params() {
        Rng root(seed_);
        auto init_rng = [&](const std::string& name) { return root.stream("param").stream(name); };
        auto add_glorot = [&](const std::string& name, std::vector<std::size_t> shape,
                              std::size_t fan_in, std::size_t fan_out) {
            Rng r = init_rng(name);
            return store_.add(name, ad::glorot_uniform(std::move(shape), fan_in, fan_out, r));
        };
        auto add_zeros = [&](const std::string& name, std::vector<std::size_t> shape) {
            return store_.add(name, DenseTensor(std::move(shape)));
        };

        const std::size_t he = cfg_.enc_hidden, hd = cfg_.hidden, a = cfg_.common_dim;
        const std::size_t denc = 2 * he, ae = cfg_.hier_dim;

        embed_ = add_glorot("embed", {cfg_.emb_dim, vocab_}, vocab_, cfg_.emb_dim);

        auto add_lstm = [&](const std::string& prefix, std::size_t in, std::size_t hid) {
            LstmIdx idx;
            idx.Wx = add_glorot(prefix + ".Wx", {4 * hid, in}, in, 4 * hid);
            idx.Wh = add_glorot(prefix + ".Wh", {4 * hid, hid}, hid, 4 * hid);
            idx.b = add_zeros(prefix + ".b", {4 * hid});
            return idx;
        };
        for (std::size_t l = 0; l < n_; ++l) {
            enc_fwd_.push_back(add_lstm("enc." + std::to_string(l) + ".fwd", d_raw_, he));
            enc_bwd_.push_back(add_lstm("enc." + std::to_string(l) + ".bwd", d_raw_, he));
        }
        dec_ = add_lstm("dec", cfg_.emb_dim, hd);

        for (std::size_t l = 0; l < n_; ++l) {
            const std::string p = "att." + std::to_string(l);
            ProjIdx idx;
            idx.W1 = add_glorot(p + ".W1", {a, hd}, hd, a);
            idx.U1 = add_glorot(p + ".U1", {a, denc}, denc, a);
            idx.b1 = add_zeros(p + ".b1", {a});
            proj_.push_back(idx);
        }

        fam_.resize(n_);
        for (std::size_t l = 0; l < n_; ++l) {
            for (const Family& f : enumerate_families(cfg_.arities, n_, l)) {
                FamIdx idx;
                idx.family = f;
                const std::string base = "att." + std::to_string(l) + "." + f.label();
                if (f.arity >= 2) {
                    idx.factors.resize(cfg_.rank);
                    for (std::size_t j = 0; j < cfg_.rank; ++j)
                        for (std::size_t m : f.partners) {
                            const std::string name =
                                base + ".j" + std::to_string(j) + ".m" + std::to_string(m);
                            Rng r = init_rng(name);
                            DenseTensor init({t_[m]});
                            for (std::size_t q = 0; q < t_[m]; ++q)
                                init[q] = 1.0 + r.uniform(-0.1, 0.1);
                            idx.factors[j].push_back(store_.add(name, std::move(init)));
                        }
                }
                // the unary family's score vector, and the learned
                // contraction of the low-rank mechanism
                idx.has_contraction = f.arity == 1 || cfg_.mechanism == Mechanism::Lowrank;
                if (idx.has_contraction)
                    idx.contraction = add_glorot(base + ".w", {a}, a, 1);
                idx.theta = store_.add("theta." + std::to_string(l) + "." + f.label(),
                                       DenseTensor::scalar(1.0));
                fam_[l].push_back(std::move(idx));
            }
        }

        hier_We_ = add_glorot("hier.We", {ae, hd}, hd, ae);
        hier_Ue_ = add_glorot("hier.Ue", {ae, denc}, denc, ae);
        hier_be_ = add_zeros("hier.be", {ae});
        hier_we_ = add_glorot("hier.we", {ae}, ae, 1);
        out_Wph_ = add_glorot("out.Wph", {vocab_, hd}, hd, vocab_);
        for (std::size_t l = 0; l < n_; ++l)
            out_Wpk_.push_back(
                add_glorot("out.Wpk." + std::to_string(l), {vocab_, denc}, denc, vocab_));
        out_bp_ = add_zeros("out.bp", {vocab_});
    }

    struct Handles {
        const std::vector<ad::Var>* leaves;
        ad::Var operator[](std::size_t i) const { return (*leaves)[i]; }
    };

    Handles organize(const std::vector<ad::Var>& leaves) const {
        if (leaves.size() != store_.size())
            throw ArgumentError("model: leaf list does not match parameter store");
        return Handles{&leaves};
    }

    static std::pair<ad::Var, ad::Var> lstm_step(ad::Var Wx, ad::Var Wh, ad::Var b,
                                                 ad::Var x, ad::Var h, ad::Var c) {
        ad::Var z = ad::add(ad::add(ad::matvec(Wx, x), ad::matvec(Wh, h)), b);
        const std::size_t hid = h.size();
        ad::Var i = ad::sigmoid(ad::slice(z, 0, hid));
        ad::Var f = ad::sigmoid(ad::slice(z, hid, hid));
        ad::Var g = ad::tanh(ad::slice(z, 2 * hid, hid));
        ad::Var o = ad::sigmoid(ad::slice(z, 3 * hid, hid));
        ad::Var c2 = ad::add(ad::mul(f, c), ad::mul(i, g));
        ad::Var h2 = ad::mul(o, ad::tanh(c2));
        return {h2, c2};
    }

    std::vector<ad::Var> encode_graph(ad::Tape& tape, const Handles& hs,
                                      const std::vector<FeatureMatrix>& feats) const {
        if (feats.size() != n_)
            throw DimensionError("model: expected " + std::to_string(n_) + " modalities");
        std::vector<ad::Var> out;
        out.reserve(n_);
        for (std::size_t l = 0; l < n_; ++l) {
            const FeatureMatrix& f = feats[l];
            if (f.d() != d_raw_) throw DimensionError("model: raw feature dimension mismatch");
            const std::size_t t = f.t();
            std::vector<ad::Var> cols;
            cols.reserve(t);
            for (std::size_t r = 0; r < t; ++r) cols.push_back(tape.leaf(f.column(r), {f.d()}));

            auto run = [&](const LstmIdx& idx, bool reverse) {
                std::vector<ad::Var> states(t);
                ad::Var h = tape.leaf(DenseTensor({cfg_.enc_hidden}));
                ad::Var c = tape.leaf(DenseTensor({cfg_.enc_hidden}));
                for (std::size_t step = 0; step < t; ++step) {
                    const std::size_t r = reverse ? t - 1 - step : step;
                    auto [h2, c2] = lstm_step(hs[idx.Wx], hs[idx.Wh], hs[idx.b], cols[r], h, c);
                    h = h2;
                    c = c2;
                    states[r] = h;
                }
                return states;
            };
            std::vector<ad::Var> fwd = run(enc_fwd_[l], false);
            std::vector<ad::Var> bwd = run(enc_bwd_[l], true);
            std::vector<ad::Var> joined(t);
            for (std::size_t r = 0; r < t; ++r) {
                std::vector<ad::Var> parts{fwd[r], bwd[r]};
                joined[r] = ad::concat(parts);
            }
            out.push_back(ad::stack_cols(joined));
        }
        return out;
    }

    /// Attention weights of one family over common-space columns.
    ad::Var family_weights_graph(ad::Tape& tape, const Handles& hs, const FamIdx& fam,
                                 std::size_t target,
                                 const std::vector<std::vector<ad::Var>>& common,
                                 const std::vector<ad::Var>& common_mat) const {
        const std::vector<ad::Var>& tcols = common[target];
        const std::size_t t = tcols.size();
        std::vector<ad::Var> scores(t);

        if (fam.family.arity == 1) {
            for (std::size_t r = 0; r < t; ++r)
                scores[r] = ad::dot(hs[fam.contraction], tcols[r]);
            return ad::softmax(ad::pack(scores));
        }

        if (cfg_.mechanism == Mechanism::Lowrank) {
            ad::Var b;
            for (std::size_t j = 0; j < cfg_.rank; ++j) {
                ad::Var term;
                for (std::size_t p = 0; p < fam.family.partners.size(); ++p) {
                    ad::Var g = ad::matvec(common_mat[fam.family.partners[p]],
                                           hs[fam.factors[j][p]]);
                    term = term ? ad::mul(term, g) : g;
                }
                b = b ? ad::add(b, term) : term;
            }
            for (std::size_t r = 0; r < t; ++r)
                scores[r] = ad::dot(hs[fam.contraction], ad::mul(tcols[r], b));
            return ad::softmax(ad::pack(scores));
        }

        // dense path: materialize the correlation slices and the importance
        // tensor reconstructed from the same factor parameterization
        std::size_t tuples = 1;
        for (std::size_t m : fam.family.partners) {
            if (tuples > cfg_.max_elements / common[m].size())
                throw CapacityError("model: dense attention exceeds the element cap");
            tuples *= common[m].size();
        }
        const std::size_t np = fam.family.partners.size();
        std::vector<std::size_t> idx(np, 0);
        std::vector<ad::Var> partial(t); // running score sums
        for (std::size_t flat = 0; flat < tuples; ++flat) {
            ad::Var pcols;
            for (std::size_t p = 0; p < np; ++p) {
                const ad::Var& pc = common[fam.family.partners[p]][idx[p]];
                pcols = pcols ? ad::mul(pcols, pc) : pc;
            }
            ad::Var w_entry;
            for (std::size_t j = 0; j < cfg_.rank; ++j) {
                ad::Var prod;
                for (std::size_t p = 0; p < np; ++p) {
                    ad::Var fv = ad::at(hs[fam.factors[j][p]], idx[p]);
                    prod = prod ? ad::mul(prod, fv) : fv;
                }
                w_entry = w_entry ? ad::add(w_entry, prod) : prod;
            }
            for (std::size_t r = 0; r < t; ++r) {
                ad::Var corr = ad::dot(tcols[r], pcols);
                ad::Var contrib = ad::mul(w_entry, corr);
                partial[r] = partial[r] ? ad::add(partial[r], contrib) : contrib;
            }
            for (std::size_t p = np; p > 0;) {
                --p;
                if (++idx[p] < common[fam.family.partners[p]].size()) break;
                idx[p] = 0;
            }
        }
        return ad::softmax(ad::pack(partial));
    }

    struct AttendOut {
        std::vector<ad::Var> contexts;
        std::vector<ad::Var> combined;
    };

    AttendOut attend_graph(ad::Tape& tape, const Handles& hs,
                           const std::vector<ad::Var>& encoded, ad::Var h,
                           StepTrace* trace) const {
        // common-space columns per modality, shared by all families
        std::vector<std::vector<ad::Var>> common(n_);
        std::vector<ad::Var> common_mat(n_);
        for (std::size_t l = 0; l < n_; ++l) {
            const std::size_t t = encoded[l].value().extent(1);
            ad::Var qterm;
            if (cfg_.query_conditioned) qterm = ad::matvec(hs[proj_[l].W1], h);
            for (std::size_t r = 0; r < t; ++r) {
                ad::Var pre = ad::add(ad::matvec(hs[proj_[l].U1], ad::col(encoded[l], r)),
                                      hs[proj_[l].b1]);
                if (qterm) pre = ad::add(pre, qterm);
                common[l].push_back(ad::tanh(pre));
            }
            common_mat[l] = ad::stack_cols(common[l]);
        }

        AttendOut out;
        if (trace) trace->families.resize(n_);
        for (std::size_t l = 0; l < n_; ++l) {
            std::vector<ad::Var> fams;
            for (const FamIdx& fam : fam_[l]) {
                ad::Var w = family_weights_graph(tape, hs, fam, l, common, common_mat);
                if (trace) trace->families[l].push_back(w.value().values());
                fams.push_back(w);
            }
            ad::Var pre;
            for (std::size_t fi = 0; fi < fams.size(); ++fi) {
                ad::Var scaled = ad::mul_scalar(fams[fi], hs[fam_[l][fi].theta]);
                pre = pre ? ad::add(pre, scaled) : scaled;
            }
            ad::Var combined = ad::softmax(pre);
            if (trace) trace->combined.push_back(combined.value().values());
            out.combined.push_back(combined);
            out.contexts.push_back(ad::matvec(encoded[l], combined));
        }
        return out;
    }

    ad::Var step_logits(ad::Tape& tape, const Handles& hs,
                        const std::vector<ad::Var>& encoded, ad::Var& h, ad::Var& c,
                        int token, StepTrace* trace, Rng* dropout_rng) const {
        if (token < 0 || static_cast<std::size_t>(token) >= vocab_)
            throw ArgumentError("model: token id out of range");
        ad::Var x = ad::col(hs[embed_], static_cast<std::size_t>(token));
        if (dropout_rng && cfg_.dropout > 0.0) x = dropout_mask(tape, x, *dropout_rng);
        auto [h2, c2] = lstm_step(hs[dec_.Wx], hs[dec_.Wh], hs[dec_.b], x, h, c);
        h = h2;
        c = c2;

        AttendOut att = attend_graph(tape, hs, encoded, h, trace);

        // hierarchical weights over the modality contexts
        std::vector<ad::Var> scores(n_);
        ad::Var qterm = ad::matvec(hs[hier_We_], h);
        for (std::size_t k = 0; k < n_; ++k) {
            ad::Var pre = ad::add(ad::add(qterm, ad::matvec(hs[hier_Ue_], att.contexts[k])),
                                  hs[hier_be_]);
            scores[k] = ad::dot(hs[hier_we_], ad::tanh(pre));
        }
        ad::Var beta = ad::softmax(ad::pack(scores));
        if (trace) trace->beta = beta.value().values();

        ad::Var hr = h;
        if (dropout_rng && cfg_.dropout > 0.0) hr = dropout_mask(tape, hr, *dropout_rng);
        ad::Var logits = ad::add(ad::matvec(hs[out_Wph_], hr), hs[out_bp_]);
        for (std::size_t k = 0; k < n_; ++k) {
            ad::Var dk = ad::matvec(hs[out_Wpk_[k]], att.contexts[k]);
            logits = ad::add(logits, ad::mul_scalar(dk, ad::at(beta, k)));
        }
        return logits;
    }

    /// Inverted dropout: the mask is scaled at train time so evaluation
    /// needs no rescaling.
    ad::Var dropout_mask(ad::Tape& tape, ad::Var x, Rng& rng) const {
        DenseTensor mask(x.value().shape());
        const double keep = 1.0 - cfg_.dropout;
        for (std::size_t i = 0; i < mask.size(); ++i)
            mask[i] = rng.next_double() < keep ? 1.0 / keep : 0.0;
        return ad::mul(x, tape.leaf(std::move(mask)));
    }

    ModelConfig cfg_;
    std::size_t n_, d_raw_;
    std::vector<std::size_t> t_;
    std::size_t vocab_;
    std::uint64_t seed_;
    ad::ParamStore store_;

    std::size_t embed_ = 0;
    std::vector<LstmIdx> enc_fwd_, enc_bwd_;
    LstmIdx dec_{};
    std::vector<ProjIdx> proj_;
    std::vector<std::vector<FamIdx>> fam_;
    std::size_t hier_We_ = 0, hier_Ue_ = 0, hier_be_ = 0, hier_we_ = 0;
    std::size_t out_Wph_ = 0, out_bp_ = 0;
    std::vector<std::size_t> out_Wpk_;
};

// ---- training ----------------------------------------------------------------

struct TrainHyper {
    ad::AdamConfig adam{};      // full-scale default learning rate 1e-4
    std::size_t epochs = 20;
    std::uint64_t seed = 0;     // dropout stream; item order is fixed
};

struct CurveRow {
    std::size_t epoch;
    double train_loss;     // mean per-token loss before each item's update
    double val_loss;
    double val_token_acc;
};

struct EvalResult {
    double loss = 0.0;
    double token_acc = 0.0;
};

inline EvalResult evaluate_model(const CaptionModel& model, const SyntheticDataset& data,
                                 Split split) {
    double loss_sum = 0.0;
    std::size_t tokens = 0, correct = 0;
    for (const Item* item : data.split_items(split)) {
        ad::Tape tape;
        auto leaves = ad::bind_params(tape, model.store());
        std::vector<int> preds;
        ad::Var loss = model.item_loss(tape, leaves, *item, nullptr, &preds);
        loss_sum += loss.scalar();
        std::vector<int> targets(item->caption);
        targets.push_back(kEos);
        for (std::size_t s = 0; s < targets.size(); ++s) correct += preds[s] == targets[s];
        tokens += targets.size();
    }
    if (tokens == 0) return {};
    return {loss_sum / static_cast<double>(tokens),
            static_cast<double>(correct) / static_cast<double>(tokens)};
}

inline std::vector<CurveRow> train_model(CaptionModel& model, const SyntheticDataset& data,
                                         const TrainHyper& hyper) {
    auto train_items = data.split_items(Split::Train);
    if (train_items.empty()) throw ConfigError("train: empty training split");
    ad::AdamOptimizer opt(hyper.adam);
    Rng dropout_rng = Rng(hyper.seed).stream("dropout");

    std::vector<CurveRow> curve;
    for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t tokens = 0;
        for (std::size_t i = 0; i < train_items.size(); ++i) {
            const Item& item = *train_items[i];
            ad::Tape tape;
            auto leaves = ad::bind_params(tape, model.store());
            Rng* drop = model.config().dropout > 0.0 ? &dropout_rng : nullptr;
            ad::Var loss = model.item_loss(tape, leaves, item, nullptr, nullptr, drop);
            if (!std::isfinite(loss.scalar()))
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", item " + std::to_string(i));
            loss_sum += loss.scalar();
            tokens += item.caption.size() + 1;
            tape.backward(loss);
            opt.step(model.store(), leaves);
        }
        EvalResult val = evaluate_model(model, data, Split::Val);
        curve.push_back(CurveRow{epoch, loss_sum / static_cast<double>(tokens), val.loss,
                                 val.token_acc});
    }
    return curve;
}

} // namespace hoca
