#include "imit/core/param.hpp"

#include <algorithm>
#include <cmath>

namespace imit {

std::size_t ParamVector::add(const std::string& name, Shape shape) {
    require(index_.count(name) == 0, "param: duplicate name '" + name + "'");
    const std::size_t idx = entries_.size();
    entries_.push_back(Entry{name, flat_.size(), shape});
    index_[name] = idx;
    flat_.resize(flat_.size() + shape.count(), 0.0);
    return idx;
}

std::size_t ParamVector::add(const std::string& name, Tensor init) {
    const std::size_t idx = add(name, init.shape);
    set(name, init);
    return idx;
}

std::size_t ParamVector::entry_index(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "param: unknown name '" + name + "'");
    return it->second;
}

const ParamVector::Entry& ParamVector::entry(const std::string& name) const {
    return entries_[entry_index(name)];
}

Tensor ParamVector::get(const std::string& name) const {
    const Entry& e = entry(name);
    Tensor t(e.shape);
    std::copy(flat_.begin() + e.offset, flat_.begin() + e.offset + e.shape.count(),
              t.data.begin());
    return t;
}

void ParamVector::set(const std::string& name, const Tensor& value) {
    const Entry& e = entry(name);
    require(value.shape == e.shape, "param: set '" + name + "' with shape " +
                                        value.shape.str() + ", expected " + e.shape.str());
    std::copy(value.data.begin(), value.data.end(), flat_.begin() + e.offset);
}

BoundParams::BoundParams(Tape& tape, const ParamVector& params, bool trainable)
    : tape_(&tape), params_(&params) {
    vars_.reserve(params.entry_count());
    for (std::size_t i = 0; i < params.entry_count(); ++i) {
        const ParamVector::Entry& e = params.entry(i);
        Tensor t(e.shape);
        std::copy(params.flat().begin() + e.offset,
                  params.flat().begin() + e.offset + e.shape.count(), t.data.begin());
        vars_.push_back(trainable ? tape.leaf(std::move(t)) : tape.constant(std::move(t)));
    }
}

Var BoundParams::at(const std::string& name) const {
    return vars_[params_->entry_index(name)];
}

std::vector<double> flatten(const ParamVector& layout, const std::vector<Tensor>& per_entry) {
    require(per_entry.size() == layout.entry_count(), "flatten: entry count mismatch");
    std::vector<double> out(layout.size(), 0.0);
    for (std::size_t i = 0; i < per_entry.size(); ++i) {
        const ParamVector::Entry& e = layout.entry(i);
        require(per_entry[i].shape == e.shape,
                "flatten: '" + e.name + "' has shape " + per_entry[i].shape.str() +
                    ", expected " + e.shape.str());
        std::copy(per_entry[i].data.begin(), per_entry[i].data.end(),
                  out.begin() + e.offset);
    }
    return out;
}

std::vector<Tensor> split(const ParamVector& layout, const std::vector<double>& flat) {
    require(flat.size() == layout.size(), "split: flat length mismatch");
    std::vector<Tensor> out;
    out.reserve(layout.entry_count());
    for (std::size_t i = 0; i < layout.entry_count(); ++i) {
        const ParamVector::Entry& e = layout.entry(i);
        Tensor t(e.shape);
        std::copy(flat.begin() + e.offset, flat.begin() + e.offset + e.shape.count(),
                  t.data.begin());
        out.push_back(std::move(t));
    }
    return out;
}

ValueGrad value_and_grad(const LossFn& f, const ParamVector& p) {
    Tape tape;
    BoundParams bound(tape, p);
    const Var loss = f(tape, bound);
    require(tape.val(loss).shape.rank == 0, "value_and_grad: f must return a scalar");
    const double value = tape.scalar(loss);
    require(std::isfinite(value), "value_and_grad: non-finite loss value");
    const std::vector<Tensor> grads = tape.gradients(loss, bound.vars());
    return ValueGrad{value, flatten(p, grads)};
}

double check_gradient(const LossFn& f, const ParamVector& p, double step) {
    require(step > 0.0, "check_gradient: step must be positive");
    const ValueGrad vg = value_and_grad(f, p);

    double worst = 0.0;
    ParamVector probe = p;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double saved = probe.flat()[i];
        probe.flat()[i] = saved + step;
        Tape tp;
        const double fp = tp.scalar(f(tp, BoundParams(tp, probe)));
        probe.flat()[i] = saved - step;
        Tape tm;
        const double fm = tm.scalar(f(tm, BoundParams(tm, probe)));
        probe.flat()[i] = saved;
        require(std::isfinite(fp) && std::isfinite(fm),
                "check_gradient: non-finite f at probe " + std::to_string(i));
        const double fd = (fp - fm) / (2.0 * step);
        const double err = std::abs(vg.grad[i] - fd) / std::max(1.0, std::abs(vg.grad[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

void AdamOptimizer::attach(ParamVector* p) {
    slots_.push_back(p);
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
}

void AdamOptimizer::step(const std::vector<std::vector<double>>& grads, double clip_norm) {
    require(grads.size() == slots_.size(), "adam: gradient slot count mismatch");
    for (std::size_t s = 0; s < slots_.size(); ++s)
        require(grads[s].size() == slots_[s]->size(),
                "adam: gradient length mismatch in slot " + std::to_string(s));

    double scale = 1.0;
    if (clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& g : grads)
            for (const double x : g) sq += x * x;
        const double norm = std::sqrt(sq);
        if (norm > clip_norm) scale = clip_norm / norm;
    }

    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t s = 0; s < slots_.size(); ++s) {
        std::vector<double>& w = slots_[s]->flat();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double g = grads[s][i] * scale;
            require(std::isfinite(g), "adam: non-finite gradient");
            m_[s][i] = beta1_ * m_[s][i] + (1.0 - beta1_) * g;
            v_[s][i] = beta2_ * v_[s][i] + (1.0 - beta2_) * g * g;
            const double mhat = m_[s][i] / bc1;
            const double vhat = v_[s][i] / bc2;
            w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

Tensor init_uniform_fan_in(Shape shape, std::size_t fan_in, Rng& rng) {
    require(fan_in >= 1, "init: fan_in must be >= 1");
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t(shape);
    for (double& x : t.data) x = rng.uniform(-bound, bound);
    return t;
}

}  // namespace imit
