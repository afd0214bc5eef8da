#pragma once

// Minimal reverse-mode differentiation over dense arrays. A Tape owns the
// nodes of one computation graph; values are computed eagerly, gradients by
// walking the tape backwards in insertion order (which is a topological
// order by construction). Accumulation order is therefore deterministic.

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hoca/errors.hpp"
#include "hoca/rng.hpp"
#include "hoca/tensor.hpp"

namespace hoca::ad {

struct Node {
    DenseTensor value;
    DenseTensor grad;                 // persistent; backward adds into this
    DenseTensor adj;                  // scratch adjoint of the current pass
    std::function<void(Node&)> pull;  // pushes self.adj into parents' adj
};

class Tape;

/// Cheap handle into a tape-owned node.
class Var {
public:
    Var() = default;
    Var(Node* n, Tape* t) : node_(n), tape_(t) {}

    const DenseTensor& value() const { return node_->value; }
    const DenseTensor& grad() const { return node_->grad; }
    const std::vector<std::size_t>& shape() const { return node_->value.shape(); }
    std::size_t size() const { return node_->value.size(); }

    double scalar() const {
        if (node_->value.size() != 1)
            throw ArgumentError("Var::scalar: value is not a scalar");
        return node_->value[0];
    }

    Node* node() const { return node_; }
    Tape* tape() const { return tape_; }
    explicit operator bool() const { return node_ != nullptr; }

private:
    Node* node_ = nullptr;
    Tape* tape_ = nullptr;
};

class Tape {
public:
    Var leaf(DenseTensor value) {
        Node& n = nodes_.emplace_back();
        n.value = std::move(value);
        n.grad = DenseTensor(n.value.shape());
        n.adj = DenseTensor(n.value.shape());
        return Var(&n, this);
    }

    Var leaf(std::vector<double> data, std::vector<std::size_t> shape) {
        return leaf(DenseTensor(std::move(shape), std::move(data)));
    }

    Var scalar(double v) { return leaf(DenseTensor::scalar(v)); }

    template <class PullFn>
    Var emit(DenseTensor value, PullFn&& pull) {
        Node& n = nodes_.emplace_back();
        n.value = std::move(value);
        n.grad = DenseTensor(n.value.shape());
        n.adj = DenseTensor(n.value.shape());
        n.pull = std::forward<PullFn>(pull);
        return Var(&n, this);
    }

    /// Accumulates dLoss/dNode into every node's grad. Adjoints are scratch
    /// per call, so calling backward twice adds the same gradients twice.
    void backward(Var loss) {
        if (!loss || loss.tape() != this)
            throw ArgumentError("backward: loss is not on this tape");
        if (loss.size() != 1)
            throw ArgumentError("backward: loss must be scalar");
        for (Node& n : nodes_)
            for (double& a : n.adj.values()) a = 0.0;
        loss.node()->adj.values()[0] = 1.0;
        bool seen = false;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            if (&*it == loss.node()) seen = true;
            if (seen && it->pull) it->pull(*it);
        }
        for (Node& n : nodes_) {
            auto& g = n.grad.values();
            const auto& a = n.adj.values();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += a[i];
        }
    }

    std::size_t size() const { return nodes_.size(); }

private:
    std::deque<Node> nodes_; // deque: stable addresses for captured Node*
};

namespace detail {

inline void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.value().shape() != b.value().shape())
        throw DimensionError(std::string(op) + ": shape mismatch");
}

inline void require_order1(const Var& v, const char* op) {
    if (v.value().order() != 1)
        throw DimensionError(std::string(op) + ": expected an order-1 value");
}

} // namespace detail

// ---- elementwise -----------------------------------------------------------

inline Var add(Var a, Var b) {
    detail::require_same_shape(a, b, "add");
    DenseTensor out(a.value().shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
    Node *pa = a.node(), *pb = b.node();
    return a.tape()->emit(std::move(out), [pa, pb](Node& self) {
        for (std::size_t i = 0; i < self.adj.size(); ++i) {
            pa->adj[i] += self.adj[i];
            pb->adj[i] += self.adj[i];
        }
    });
}

inline Var sub(Var a, Var b) {
    detail::require_same_shape(a, b, "sub");
    DenseTensor out(a.value().shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
    Node *pa = a.node(), *pb = b.node();
    return a.tape()->emit(std::move(out), [pa, pb](Node& self) {
        for (std::size_t i = 0; i < self.adj.size(); ++i) {
            pa->adj[i] += self.adj[i];
            pb->adj[i] -= self.adj[i];
        }
    });
}

/// Hadamard product.
inline Var mul(Var a, Var b) {
    detail::require_same_shape(a, b, "mul");
    DenseTensor out(a.value().shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
    Node *pa = a.node(), *pb = b.node();
    return a.tape()->emit(std::move(out), [pa, pb](Node& self) {
        for (std::size_t i = 0; i < self.adj.size(); ++i) {
            pa->adj[i] += self.adj[i] * pb->value[i];
            pb->adj[i] += self.adj[i] * pa->value[i];
        }
    });
}

inline Var scale(Var a, double c) {
    DenseTensor out(a.value().shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * a.value()[i];
    Node* pa = a.node();
    return a.tape()->emit(std::move(out), [pa, c](Node& self) {
        for (std::size_t i = 0; i < self.adj.size(); ++i) pa->adj[i] += c * self.adj[i];
    });
}

/// Multiply a tensor by a scalar variable.
inline Var mul_scalar(Var x, Var s) {
    if (s.size() != 1) throw DimensionError("mul_scalar: scale must be scalar");
    const double sv = s.value()[0];
    DenseTensor out(x.value().shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sv * x.value()[i];
    Node *px = x.node(), *ps = s.node();
    return x.tape()->emit(std::move(out), [px, ps](Node& self) {
        const double s_val = ps->value[0];
        double acc = 0.0;
        for (std::size_t i = 0; i < self.adj.size(); ++i) {
            px->adj[i] += s_val * self.adj[i];
            acc += self.adj[i] * px->value[i];
        }
        ps->adj[0] += acc;
    });
}

inline Var tanh(Var a) {
    DenseTensor out(a.value().shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.value()[i]);
    Node* pa = a.node();
    return a.tape()->emit(std::move(out), [pa](Node& self) {
        for (std::size_t i = 0; i < self.adj.size(); ++i)
            pa->adj[i] += self.adj[i] * (1.0 - self.value[i] * self.value[i]);
    });
}

inline Var sigmoid(Var a) {
    DenseTensor out(a.value().shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = a.value()[i];
        out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                          : std::exp(x) / (1.0 + std::exp(x));
    }
    Node* pa = a.node();
    return a.tape()->emit(std::move(out), [pa](Node& self) {
        for (std::size_t i = 0; i < self.adj.size(); ++i)
            pa->adj[i] += self.adj[i] * self.value[i] * (1.0 - self.value[i]);
    });
}

inline Var exp(Var a) {
    DenseTensor out(a.value().shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.value()[i]);
    Node* pa = a.node();
    return a.tape()->emit(std::move(out), [pa](Node& self) {
        for (std::size_t i = 0; i < self.adj.size(); ++i)
            pa->adj[i] += self.adj[i] * self.value[i];
    });
}

inline Var log(Var a) {
    DenseTensor out(a.value().shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (a.value()[i] <= 0.0) throw NumericError("log: non-positive input");
        out[i] = std::log(a.value()[i]);
    }
    Node* pa = a.node();
    return a.tape()->emit(std::move(out), [pa](Node& self) {
        for (std::size_t i = 0; i < self.adj.size(); ++i)
            pa->adj[i] += self.adj[i] / pa->value[i];
    });
}

// ---- reductions and linear maps --------------------------------------------

inline Var sum(Var a) {
    DenseTensor out = DenseTensor::scalar(a.value().sum());
    Node* pa = a.node();
    return a.tape()->emit(std::move(out), [pa](Node& self) {
        for (std::size_t i = 0; i < pa->adj.size(); ++i) pa->adj[i] += self.adj[0];
    });
}

inline Var dot(Var a, Var b) {
    detail::require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.value()[i] * b.value()[i];
    Node *pa = a.node(), *pb = b.node();
    return a.tape()->emit(DenseTensor::scalar(s), [pa, pb](Node& self) {
        const double g = self.adj[0];
        for (std::size_t i = 0; i < pa->adj.size(); ++i) {
            pa->adj[i] += g * pb->value[i];
            pb->adj[i] += g * pa->value[i];
        }
    });
}

/// Matrix (shape {m,k}) times vector (shape {k}).
inline Var matvec(Var m, Var v) {
    if (m.value().order() != 2) throw DimensionError("matvec: matrix must be order 2");
    detail::require_order1(v, "matvec");
    const std::size_t rows = m.value().extent(0), cols = m.value().extent(1);
    if (v.size() != cols) throw DimensionError("matvec: inner dimension mismatch");
    DenseTensor out({rows});
    for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += m.value()[i * cols + j] * v.value()[j];
        out[i] = s;
    }
    Node *pm = m.node(), *pv = v.node();
    return m.tape()->emit(std::move(out), [pm, pv, rows, cols](Node& self) {
        for (std::size_t i = 0; i < rows; ++i) {
            const double g = self.adj[i];
            for (std::size_t j = 0; j < cols; ++j) {
                pm->adj[i * cols + j] += g * pv->value[j];
                pv->adj[j] += g * pm->value[i * cols + j];
            }
        }
    });
}

// ---- shape ops --------------------------------------------------------------

inline Var concat(std::span<const Var> parts) {
    if (parts.empty()) throw ArgumentError("concat: empty part list");
    std::size_t total = 0;
    for (const Var& p : parts) {
        detail::require_order1(p, "concat");
        total += p.size();
    }
    DenseTensor out({total});
    std::vector<Node*> parents;
    parents.reserve(parts.size());
    std::size_t off = 0;
    for (const Var& p : parts) {
        for (std::size_t i = 0; i < p.size(); ++i) out[off + i] = p.value()[i];
        off += p.size();
        parents.push_back(p.node());
    }
    return parts[0].tape()->emit(std::move(out), [parents](Node& self) {
        std::size_t off = 0;
        for (Node* p : parents) {
            for (std::size_t i = 0; i < p->adj.size(); ++i) p->adj[i] += self.adj[off + i];
            off += p->adj.size();
        }
    });
}

inline Var slice(Var v, std::size_t offset, std::size_t len) {
    detail::require_order1(v, "slice");
    if (offset + len > v.size()) throw IndexError("slice: range out of bounds");
    DenseTensor out({len});
    for (std::size_t i = 0; i < len; ++i) out[i] = v.value()[offset + i];
    Node* pv = v.node();
    return v.tape()->emit(std::move(out), [pv, offset, len](Node& self) {
        for (std::size_t i = 0; i < len; ++i) pv->adj[offset + i] += self.adj[i];
    });
}

/// Single element of an order-1 value, as a scalar variable.
inline Var at(Var v, std::size_t i) {
    detail::require_order1(v, "at");
    if (i >= v.size()) throw IndexError("at: index out of bounds");
    Node* pv = v.node();
    return v.tape()->emit(DenseTensor::scalar(v.value()[i]),
                          [pv, i](Node& self) { pv->adj[i] += self.adj[0]; });
}

/// Pack scalar variables into an order-1 vector.
inline Var pack(std::span<const Var> scalars) {
    if (scalars.empty()) throw ArgumentError("pack: empty scalar list");
    DenseTensor out({scalars.size()});
    std::vector<Node*> parents;
    parents.reserve(scalars.size());
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        if (scalars[i].size() != 1) throw DimensionError("pack: inputs must be scalars");
        out[i] = scalars[i].value()[0];
        parents.push_back(scalars[i].node());
    }
    return scalars[0].tape()->emit(std::move(out), [parents](Node& self) {
        for (std::size_t i = 0; i < parents.size(); ++i)
            parents[i]->adj[0] += self.adj[i];
    });
}

/// Stack equal-length vectors as the columns of a {d, t} matrix.
inline Var stack_cols(std::span<const Var> cols) {
    if (cols.empty()) throw ArgumentError("stack_cols: empty column list");
    const std::size_t d = cols[0].size();
    for (const Var& c : cols) {
        detail::require_order1(c, "stack_cols");
        if (c.size() != d) throw DimensionError("stack_cols: column length mismatch");
    }
    const std::size_t t = cols.size();
    DenseTensor out({d, t});
    std::vector<Node*> parents;
    parents.reserve(t);
    for (std::size_t r = 0; r < t; ++r) {
        for (std::size_t i = 0; i < d; ++i) out[i * t + r] = cols[r].value()[i];
        parents.push_back(cols[r].node());
    }
    return cols[0].tape()->emit(std::move(out), [parents, d, t](Node& self) {
        for (std::size_t r = 0; r < t; ++r)
            for (std::size_t i = 0; i < d; ++i)
                parents[r]->adj[i] += self.adj[i * t + r];
    });
}

/// Column r of a {d, t} matrix variable.
inline Var col(Var m, std::size_t r) {
    if (m.value().order() != 2) throw DimensionError("col: matrix must be order 2");
    const std::size_t d = m.value().extent(0), t = m.value().extent(1);
    if (r >= t) throw IndexError("col: column out of range");
    DenseTensor out({d});
    for (std::size_t i = 0; i < d; ++i) out[i] = m.value()[i * t + r];
    Node* pm = m.node();
    return m.tape()->emit(std::move(out), [pm, r, d, t](Node& self) {
        for (std::size_t i = 0; i < d; ++i) pm->adj[i * t + r] += self.adj[i];
    });
}

// ---- softmax family ---------------------------------------------------------

inline Var softmax(Var x) {
    detail::require_order1(x, "softmax");
    std::vector<double> w = softmax_stable(
        std::span<const double>(x.value().values().data(), x.size()));
    DenseTensor out({x.size()});
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i];
    Node* px = x.node();
    return x.tape()->emit(std::move(out), [px](Node& self) {
        double inner = 0.0;
        for (std::size_t i = 0; i < self.adj.size(); ++i)
            inner += self.adj[i] * self.value[i];
        for (std::size_t i = 0; i < self.adj.size(); ++i)
            px->adj[i] += self.value[i] * (self.adj[i] - inner);
    });
}

/// Fused softmax + cross-entropy against a single target class.
inline Var softmax_xent(Var logits, std::size_t target) {
    detail::require_order1(logits, "softmax_xent");
    if (target >= logits.size()) throw ArgumentError("softmax_xent: target out of range");
    const auto& l = logits.value().values();
    double hi = l[0];
    for (double v : l) {
        if (!std::isfinite(v)) throw NumericError("softmax_xent: non-finite logit");
        if (v > hi) hi = v;
    }
    double z = 0.0;
    for (double v : l) z += std::exp(v - hi);
    const double loss = hi + std::log(z) - l[target];
    std::vector<double> probs(l.size());
    for (std::size_t i = 0; i < l.size(); ++i) probs[i] = std::exp(l[i] - hi) / z;
    Node* pl = logits.node();
    return logits.tape()->emit(DenseTensor::scalar(loss),
                               [pl, probs = std::move(probs), target](Node& self) {
        const double g = self.adj[0];
        for (std::size_t i = 0; i < probs.size(); ++i)
            pl->adj[i] += g * (probs[i] - (i == target ? 1.0 : 0.0));
    });
}

// ---- parameters and optimization ---------------------------------------------

/// Named, persistent parameter arrays plus their optimizer state. Values
/// outlive any single tape; per step they are bound to fresh leaf nodes.
class ParamStore {
public:
    struct Entry {
        std::string name;
        DenseTensor value;
        bool trainable = true;
        std::vector<double> m, v; // Adam moments, sized on first step
    };

    std::size_t add(std::string name, DenseTensor init, bool trainable = true) {
        if (byname_.count(name))
            throw ArgumentError("ParamStore: duplicate parameter name " + name);
        byname_[name] = entries_.size();
        entries_.push_back(Entry{std::move(name), std::move(init), trainable, {}, {}});
        return entries_.size() - 1;
    }

    std::size_t size() const { return entries_.size(); }
    Entry& entry(std::size_t i) { return entries_[i]; }
    const Entry& entry(std::size_t i) const { return entries_[i]; }

    std::size_t index_of(const std::string& name) const {
        auto it = byname_.find(name);
        if (it == byname_.end())
            throw ArgumentError("ParamStore: unknown parameter " + name);
        return it->second;
    }

    DenseTensor& value(const std::string& name) { return entries_[index_of(name)].value; }
    const DenseTensor& value(const std::string& name) const {
        return entries_[index_of(name)].value;
    }

    std::size_t total_values() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.value.size();
        return n;
    }

private:
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t> byname_;
};

/// Binds every parameter to a fresh leaf on the tape, in registration order.
inline std::vector<Var> bind_params(Tape& tape, const ParamStore& store) {
    std::vector<Var> leaves;
    leaves.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i)
        leaves.push_back(tape.leaf(store.entry(i).value));
    return leaves;
}

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update over flat arrays; t is the 1-based step.
inline void adam_update(std::span<double> value, std::span<const double> grad,
                        std::span<double> m, std::span<double> v, std::size_t t,
                        const AdamConfig& cfg) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < value.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

class AdamOptimizer {
public:
    explicit AdamOptimizer(AdamConfig cfg = {}) : cfg_(cfg) {}

    /// Applies one step using the gradients held by the bound leaves.
    void step(ParamStore& store, const std::vector<Var>& leaves) {
        if (leaves.size() != store.size())
            throw ArgumentError("AdamOptimizer: leaf list does not match store");
        ++t_;
        for (std::size_t i = 0; i < store.size(); ++i) {
            auto& e = store.entry(i);
            if (!e.trainable) continue;
            const auto& g = leaves[i].grad().values();
            for (double gv : g)
                if (!std::isfinite(gv))
                    throw NumericError("adam: non-finite gradient for parameter " + e.name);
            if (e.m.empty()) {
                e.m.assign(e.value.size(), 0.0);
                e.v.assign(e.value.size(), 0.0);
            }
            adam_update(e.value.values(), g, e.m, e.v, t_, cfg_);
        }
    }

    const AdamConfig& config() const { return cfg_; }
    std::size_t steps_taken() const { return t_; }

private:
    AdamConfig cfg_;
    std::size_t t_ = 0;
};

/// Central-difference gradient check. `build` must deterministically
/// construct a scalar loss from the bound leaves; returns the max over all
/// trainable coordinates of |analytic - numeric| / max(|analytic|,
/// |numeric|, floor). The floor sets the scale below which coordinates are
/// compared absolutely: central differences of an O(1) loss carry ~ulp(f)/eps
/// of rounding noise, so gradients near that noise cannot be compared
/// relatively.
template <class BuildFn>
double finite_diff_check(ParamStore& store, BuildFn&& build, double eps = 1e-6,
                         double floor = 1e-4) {
    if (!(eps > 0.0)) throw ArgumentError("finite_diff_check: eps must be positive");
    if (!(floor > 0.0)) throw ArgumentError("finite_diff_check: floor must be positive");

    auto eval = [&]() {
        Tape tape;
        auto leaves = bind_params(tape, store);
        Var loss = build(tape, leaves);
        const double v = loss.scalar();
        if (!std::isfinite(v)) throw NumericError("finite_diff_check: non-finite loss");
        return v;
    };

    std::vector<std::vector<double>> analytic(store.size());
    {
        Tape tape;
        auto leaves = bind_params(tape, store);
        Var loss = build(tape, leaves);
        if (!std::isfinite(loss.scalar()))
            throw NumericError("finite_diff_check: non-finite loss");
        tape.backward(loss);
        for (std::size_t i = 0; i < store.size(); ++i)
            analytic[i] = leaves[i].grad().values();
    }

    double worst = 0.0;
    for (std::size_t i = 0; i < store.size(); ++i) {
        auto& e = store.entry(i);
        if (!e.trainable) continue;
        for (std::size_t c = 0; c < e.value.size(); ++c) {
            const double saved = e.value[c];
            e.value[c] = saved + eps;
            const double f_plus = eval();
            e.value[c] = saved - eps;
            const double f_minus = eval();
            e.value[c] = saved;
            const double numeric = (f_plus - f_minus) / (2.0 * eps);
            const double a = analytic[i][c];
            const double err =
                std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), floor});
            if (err > worst) worst = err;
        }
    }
    return worst;
}

/// Uniform Glorot-style init: bound sqrt(6 / (fan_in + fan_out)).
inline DenseTensor glorot_uniform(std::vector<std::size_t> shape, std::size_t fan_in,
                                  std::size_t fan_out, Rng& rng) {
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseTensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-s, s);
    return t;
}

} // namespace hoca::ad
