#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "imit/core/rng.hpp"
#include "imit/core/tape.hpp"
#include "imit/core/tensor.hpp"

namespace imit {

// Named, ordered collection of parameter tensors stored in one flat 64-bit
// real array. Slices are disjoint and cover the array exactly; names are
// unique. This is the unit the optimizers, checkpoints and gradient plumbing
// all operate on.
class ParamVector {
  public:
    struct Entry {
        std::string name;
        std::size_t offset = 0;
        Shape shape;
    };

    // Appends a zero-initialized parameter; returns its entry index.
    std::size_t add(const std::string& name, Shape shape);
    std::size_t add(const std::string& name, Tensor init);

    bool has(const std::string& name) const { return index_.count(name) != 0; }
    std::size_t entry_index(const std::string& name) const;
    const Entry& entry(const std::string& name) const;
    const Entry& entry(std::size_t i) const { return entries_[i]; }
    std::size_t entry_count() const { return entries_.size(); }

    Tensor get(const std::string& name) const;
    void set(const std::string& name, const Tensor& value);

    std::vector<double>& flat() { return flat_; }
    const std::vector<double>& flat() const { return flat_; }
    std::size_t size() const { return flat_.size(); }

  private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<double> flat_;
};

// A ParamVector bound onto a tape: one Var per entry, leaves when trainable
// and constants when frozen (frozen parameters, e.g. the reference action
// decoder inside the adversarial-stage policy, contribute values but no
// gradient path).
class BoundParams {
  public:
    BoundParams(Tape& tape, const ParamVector& params, bool trainable = true);

    Var at(const std::string& name) const;
    Var at(std::size_t i) const { return vars_[i]; }
    const std::vector<Var>& vars() const { return vars_; }
    const ParamVector& layout() const { return *params_; }
    Tape& tape() const { return *tape_; }

  private:
    Tape* tape_;
    const ParamVector* params_;
    std::vector<Var> vars_;
};

// Flattens per-entry tensors (in entry order) into one vector with the same
// layout as `layout.flat()`, and back.
std::vector<double> flatten(const ParamVector& layout, const std::vector<Tensor>& per_entry);
std::vector<Tensor> split(const ParamVector& layout, const std::vector<double>& flat);

// Scalar loss as a function of bound parameters. The function must build its
// value from the registered primitives only.
using LossFn = std::function<Var(Tape&, const BoundParams&)>;

struct ValueGrad {
    double value = 0.0;
    std::vector<double> grad;  // same flat layout as the ParamVector
};

// Evaluates f and its full gradient in one tape pass. Deterministic:
// identical inputs give bit-identical outputs.
ValueGrad value_and_grad(const LossFn& f, const ParamVector& p);

// Max over coordinates of |analytic − central_difference| / max(1, |analytic|).
double check_gradient(const LossFn& f, const ParamVector& p, double step);

// Adam over one or more ParamVectors updated jointly, with a single global
// gradient-norm clip across all slots (0 disables clipping).
class AdamOptimizer {
  public:
    explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void attach(ParamVector* p);

    // grads[i] must have the flat layout of the i-th attached ParamVector.
    void step(const std::vector<std::vector<double>>& grads, double clip_norm = 0.0);

  private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<ParamVector*> slots_;
    std::vector<std::vector<double>> m_, v_;
};

// Uniform ±1/sqrt(fan_in) init, the convention used by every net here.
Tensor init_uniform_fan_in(Shape shape, std::size_t fan_in, Rng& rng);

}  // namespace imit
