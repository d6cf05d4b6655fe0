#include "imit/trpo/trpo.hpp"

#include <cmath>
#include <string>

#include "imit/core/error.hpp"

namespace imit {

namespace {

double l2_norm(std::span<const double> v) {
    double acc = 0.0;
    for (const double x : v) acc += x * x;
    return std::sqrt(acc);
}

double dot_raw(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

// Closed-form KL(old || new) for diagonal Gaussians, old held constant.
Var step_kl(Tape& t, const PolicyHead& head, const StepSample& s) {
    Var mean_old = t.constant(s.mean_old);
    Var log_std_old = t.constant(s.log_std_old);
    Var diff = sub(head.mean, mean_old);
    Var var_old = exp(scale(log_std_old, 2.0));
    Var inv_var_new = exp(scale(head.log_std, -2.0));
    Var quad = scale(mul(add(var_old, mul(diff, diff)), inv_var_new), 0.5);
    return sum_all(add_const(add(sub(head.log_std, log_std_old), quad), -0.5));
}

}  // namespace

void validate_batch(const RolloutBatch& batch) {
    require(!batch.steps.empty(), "rollout batch: empty");
    std::size_t total = 0;
    for (const std::size_t len : batch.episode_len) {
        require(len >= 1, "rollout batch: zero-length episode");
        total += len;
    }
    require(total == batch.steps.size(),
            "rollout batch: episode lengths cover " + std::to_string(total) +
                " steps, batch has " + std::to_string(batch.steps.size()));
    for (const StepSample& s : batch.steps)
        require(s.obs.all_finite() && s.z.all_finite() && s.action.all_finite() &&
                    std::isfinite(s.reward) && std::isfinite(s.log_prob_old),
                "rollout batch: non-finite step");
}

Critic make_critic(std::size_t input_dim, std::vector<std::size_t> hidden, Rng& rng) {
    Critic c;
    c.spec = MlpSpec{input_dim, 1, std::move(hidden)};
    add_mlp_params(c.params, "critic", c.spec, rng);
    return c;
}

double critic_value(const Critic& critic, const StepSample& step) {
    return mlp_forward(critic.params, "critic", critic.spec,
                       concat_tensors(step.obs, step.z))[0];
}

void compute_advantages(RolloutBatch& batch, const Critic& critic, double gamma,
                        double lambda, bool normalize) {
    validate_batch(batch);
    require(gamma >= 0.0 && gamma <= 1.0 && lambda >= 0.0 && lambda <= 1.0,
            "compute_advantages: gamma and lambda must lie in [0,1]");

    std::size_t offset = 0;
    for (const std::size_t len : batch.episode_len) {
        for (std::size_t i = 0; i < len; ++i)
            batch.steps[offset + i].value = critic_value(critic, batch.steps[offset + i]);
        double acc = 0.0;
        for (std::size_t i = len; i-- > 0;) {
            StepSample& s = batch.steps[offset + i];
            const double v_next = (i + 1 < len) ? batch.steps[offset + i + 1].value : 0.0;
            const double delta = s.reward + gamma * v_next - s.value;
            acc = delta + gamma * lambda * acc;
            s.advantage = acc;
            s.value_target = acc + s.value;
            require(std::isfinite(s.advantage), "compute_advantages: non-finite result");
        }
        offset += len;
    }

    if (!normalize) return;
    double mean = 0.0;
    for (const StepSample& s : batch.steps) mean += s.advantage;
    mean /= double(batch.size());
    double var = 0.0;
    for (const StepSample& s : batch.steps) {
        const double d = s.advantage - mean;
        var += d * d;
    }
    const double sd = std::sqrt(var / double(batch.size()));
    for (StepSample& s : batch.steps) {
        s.advantage -= mean;
        if (sd > 1e-8) s.advantage /= sd;
    }
}

SurrogateKlVars surrogate_and_kl_vars(const BoundParams& theta, const PolicyHeadFn& head,
                                      const RolloutBatch& batch) {
    validate_batch(batch);
    Tape& t = theta.tape();
    Var surrogate = t.constant_scalar(0.0);
    Var kl = t.constant_scalar(0.0);
    for (const StepSample& s : batch.steps) {
        const PolicyHead h = head(theta, s);
        Var lp_new = gaussian_log_prob(t.constant(s.action), h.mean, h.log_std);
        Var ratio = exp(add_const(lp_new, -s.log_prob_old));
        surrogate = add(surrogate, scale(ratio, s.advantage));
        kl = add(kl, step_kl(t, h, s));
    }
    const double inv_n = 1.0 / double(batch.size());
    return SurrogateKlVars{scale(surrogate, inv_n), scale(kl, inv_n)};
}

std::pair<double, double> surrogate_and_kl(const ParamVector& theta,
                                           const PolicyHeadFn& head,
                                           const RolloutBatch& batch) {
    Tape t;
    BoundParams bound(t, theta, false);
    const SurrogateKlVars sk = surrogate_and_kl_vars(bound, head, batch);
    return {t.scalar(sk.surrogate), t.scalar(sk.mean_kl)};
}

std::vector<double> fisher_vector_product(const ParamVector& theta,
                                          const PolicyHeadFn& head,
                                          const RolloutBatch& batch,
                                          std::span<const double> v, double damping,
                                          std::size_t subsample) {
    require(v.size() == theta.size(), "fvp: vector does not match parameter layout");
    require(subsample >= 1, "fvp: subsample must be >= 1");
    validate_batch(batch);

    Tape t;
    BoundParams bound(t, theta);
    Var kl = t.constant_scalar(0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < batch.steps.size(); i += subsample) {
        const PolicyHead h = head(bound, batch.steps[i]);
        kl = add(kl, step_kl(t, h, batch.steps[i]));
        ++count;
    }
    kl = scale(kl, 1.0 / double(count));

    const std::vector<Var> grads = t.gradient_vars(kl, bound.vars());
    const std::vector<Tensor> v_parts = split(theta, {v.begin(), v.end()});
    Var gv = t.constant_scalar(0.0);
    for (std::size_t i = 0; i < grads.size(); ++i)
        gv = add(gv, dot(grads[i], t.constant(v_parts[i])));

    std::vector<double> out = flatten(theta, t.gradients(gv, bound.vars()));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += damping * v[i];
    return out;
}

CgResult conjugate_gradient(
    const std::function<std::vector<double>(const std::vector<double>&)>& apply_A,
    const std::vector<double>& b, std::size_t iters, double tol) {
    const std::size_t n = b.size();
    std::vector<double> x(n, 0.0), r = b, p = b;
    double rs = dot_raw(r, r);
    require(std::isfinite(rs), "conjugate_gradient: non-finite right-hand side");

    CgResult res;
    res.x = x;
    double best = std::sqrt(rs);
    for (std::size_t it = 0; it < iters; ++it) {
        const std::vector<double> ap = apply_A(p);
        const double pap = dot_raw(p, ap);
        require(std::isfinite(pap), "conjugate_gradient: non-finite residual");
        if (pap <= 0.0) break;  // curvature lost; keep the best iterate so far
        const double alpha = rs / pap;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        const double rs_new = dot_raw(r, r);
        require(std::isfinite(rs_new), "conjugate_gradient: non-finite residual");
        const double rn = std::sqrt(rs_new);
        if (rn < best) {
            best = rn;
            res.x = x;
        }
        res.residual_norms.push_back(best);
        if (best < tol) break;
        const double beta = rs_new / rs;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
        rs = rs_new;
    }
    return res;
}

TrpoReport trpo_step(ParamVector& theta, const PolicyHeadFn& head,
                     const RolloutBatch& batch, const TrpoConfig& config) {
    require(config.max_kl > 0.0, "trpo: max_kl must be positive");
    TrpoReport rep;

    std::vector<double> g;
    {
        Tape t;
        BoundParams bound(t, theta);
        const SurrogateKlVars sk = surrogate_and_kl_vars(bound, head, batch);
        rep.surrogate_before = t.scalar(sk.surrogate);
        rep.surrogate_after = rep.surrogate_before;
        g = flatten(theta, t.gradients(sk.surrogate, bound.vars()));
    }
    rep.grad_norm = l2_norm(g);
    if (!(rep.grad_norm > 1e-12)) return rep;

    const auto apply_fisher = [&](const std::vector<double>& p) {
        return fisher_vector_product(theta, head, batch, p, config.damping,
                                     config.fvp_subsample);
    };
    const CgResult cg = conjugate_gradient(apply_fisher, g, config.cg_iters, config.cg_tol);
    if (l2_norm(cg.x) == 0.0) return rep;

    const double dad = dot_raw(cg.x, apply_fisher(cg.x));
    if (!std::isfinite(dad) || dad <= 0.0) return rep;
    rep.step_scale = std::sqrt(2.0 * config.max_kl / dad);

    const std::vector<double> theta0 = theta.flat();
    double scale = rep.step_scale;
    for (std::size_t k = 0; k < config.backtracks; ++k, scale *= 0.5) {
        for (std::size_t i = 0; i < theta0.size(); ++i)
            theta.flat()[i] = theta0[i] + scale * cg.x[i];
        rep.line_search_tries = k + 1;
        const auto [sur, kl] = surrogate_and_kl(theta, head, batch);
        if (std::isfinite(sur) && std::isfinite(kl) && sur > rep.surrogate_before &&
            kl <= 1.5 * config.max_kl) {
            rep.accepted = true;
            rep.surrogate_after = sur;
            rep.kl_after = kl;
            return rep;
        }
    }
    theta.flat() = theta0;
    return rep;
}

double critic_update(Critic& critic, const RolloutBatch& batch, std::size_t epochs,
                     double lr) {
    validate_batch(batch);
    const LossFn mse = [&](Tape& t, const BoundParams& bp) {
        Var acc = t.constant_scalar(0.0);
        for (const StepSample& s : batch.steps) {
            Var v = mlp_apply(bp, "critic", critic.spec,
                              t.constant(concat_tensors(s.obs, s.z)));
            Var err = add_const(v, -s.value_target);
            acc = add(acc, sum_all(mul(err, err)));
        }
        return scale(acc, 1.0 / double(batch.size()));
    };

    AdamOptimizer opt(lr);
    opt.attach(&critic.params);
    for (std::size_t e = 0; e < epochs; ++e) {
        const ValueGrad vg = value_and_grad(mse, critic.params);
        opt.step({vg.grad});
    }
    return value_and_grad(mse, critic.params).value;
}

}  // namespace imit
