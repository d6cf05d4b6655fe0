#include "imit/gail/gail.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "imit/core/error.hpp"
#include "imit/core/parallel.hpp"
#include "imit/envs/env.hpp"
#include "imit/eval/metrics.hpp"

namespace imit {

namespace {

std::vector<std::size_t> to_sizes(std::span<const std::size_t> hidden) {
    return std::vector<std::size_t>(hidden.begin(), hidden.end());
}

// Standardized discriminator input concat((xa − shift)·inv_scale, z).
Tensor disc_input(const DiscriminatorSpecs& specs, const Tensor& obs, const Tensor& act,
                  const Tensor& z) {
    require(obs.data.size() == specs.obs_dim && act.data.size() == specs.act_dim &&
                z.data.size() == specs.latent_dim,
            "discriminator: input dims do not match the spec");
    Tensor xa = concat_tensors(obs, act);
    for (std::size_t i = 0; i < xa.data.size(); ++i)
        xa.data[i] = (xa.data[i] - specs.shift[i]) * specs.inv_scale[i];
    return concat_tensors(xa, z);
}

}  // namespace

DiscriminatorSpecs make_discriminator_specs(std::size_t obs_dim, std::size_t act_dim,
                                            std::size_t latent_dim,
                                            std::span<const std::size_t> hidden) {
    DiscriminatorSpecs specs;
    specs.obs_dim = obs_dim;
    specs.act_dim = act_dim;
    specs.latent_dim = latent_dim;
    specs.mlp = MlpSpec{obs_dim + act_dim + latent_dim, 1, to_sizes(hidden)};
    specs.shift = Tensor(Shape::vec(obs_dim + act_dim));
    specs.inv_scale = Tensor(Shape::vec(obs_dim + act_dim));
    for (double& v : specs.inv_scale.data) v = 1.0;
    return specs;
}

void fit_disc_standardizer(DiscriminatorSpecs& specs, std::span<const Trajectory> demos) {
    require(!demos.empty(), "discriminator standardizer: empty demonstration set");
    const std::size_t d = specs.obs_dim + specs.act_dim;
    std::vector<double> sum(d, 0.0), sumsq(d, 0.0);
    std::size_t count = 0;
    for (const Trajectory& traj : demos) {
        const EnvKind kind = kind_from_name(traj.meta.kind);
        for (std::size_t t = 0; t < traj.horizon(); ++t) {
            const Tensor xa = concat_tensors(observe(kind, traj.states[t]), traj.actions[t]);
            require(xa.data.size() == d,
                    "discriminator standardizer: trajectory dims do not match the spec");
            for (std::size_t i = 0; i < d; ++i) {
                sum[i] += xa.data[i];
                sumsq[i] += xa.data[i] * xa.data[i];
            }
            ++count;
        }
    }
    require(count > 0, "discriminator standardizer: demonstrations have no steps");
    for (std::size_t i = 0; i < d; ++i) {
        const double mean = sum[i] / double(count);
        const double var = std::max(0.0, sumsq[i] / double(count) - mean * mean);
        const double sd = std::sqrt(var);
        specs.shift[i] = mean;
        specs.inv_scale[i] = sd >= 1e-8 ? 1.0 / sd : 1.0;
    }
}

ParamVector init_discriminator(const DiscriminatorSpecs& specs, Rng& rng) {
    ParamVector psi;
    add_mlp_params(psi, "disc", specs.mlp, rng);
    return psi;
}

Var discriminator_logit_var(const DiscriminatorSpecs& specs, const BoundParams& psi,
                            const Tensor& obs, const Tensor& act, const Tensor& z) {
    Tape& t = psi.tape();
    return pick(mlp_apply(psi, "disc", specs.mlp, t.constant(disc_input(specs, obs, act, z))),
                0);
}

double discriminator_logit(const DiscriminatorSpecs& specs, const ParamVector& psi,
                           const Tensor& obs, const Tensor& act, const Tensor& z) {
    return mlp_forward(psi, "disc", specs.mlp, disc_input(specs, obs, act, z))[0];
}

double discriminator_prob(const DiscriminatorSpecs& specs, const ParamVector& psi,
                          const Tensor& obs, const Tensor& act, const Tensor& z) {
    return sigmoid(discriminator_logit(specs, psi, obs, act, z));
}

Var discriminator_loss_vars(const DiscriminatorSpecs& specs, const BoundParams& psi,
                            std::span<const DiscGroup> expert,
                            std::span<const DiscGroup> policy) {
    require(!expert.empty() && !policy.empty(), "discriminator loss: empty batch");
    require(expert.size() == policy.size(),
            "discriminator loss: expert and policy batches must pair up");
    Tape& t = psi.tape();
    Var loss = t.constant_scalar(0.0);
    for (std::size_t j = 0; j < expert.size(); ++j) {
        const DiscGroup& e = expert[j];
        const DiscGroup& p = policy[j];
        require(!e.obs.empty() && e.obs.size() == e.act.size(),
                "discriminator loss: malformed expert group");
        require(!p.obs.empty() && p.obs.size() == p.act.size(),
                "discriminator loss: malformed policy group");
        // −log D = softplus(−logit), −log(1−D) = softplus(logit).
        Var e_term = t.constant_scalar(0.0);
        for (std::size_t k = 0; k < e.obs.size(); ++k)
            e_term = add(e_term,
                         softplus(neg(discriminator_logit_var(specs, psi, e.obs[k], e.act[k],
                                                              e.z))));
        Var p_term = t.constant_scalar(0.0);
        for (std::size_t k = 0; k < p.obs.size(); ++k)
            p_term = add(p_term,
                         softplus(discriminator_logit_var(specs, psi, p.obs[k], p.act[k],
                                                          p.z)));
        loss = add(loss, add(scale(e_term, 1.0 / double(e.obs.size())),
                             scale(p_term, 1.0 / double(p.obs.size()))));
    }
    return scale(loss, 1.0 / double(expert.size()));
}

double discriminator_loss(const DiscriminatorSpecs& specs, const ParamVector& psi,
                          std::span<const DiscGroup> expert,
                          std::span<const DiscGroup> policy) {
    Tape t;
    BoundParams bound(t, psi, /*trainable=*/false);
    return t.scalar(discriminator_loss_vars(specs, bound, expert, policy));
}

double reward(const DiscriminatorSpecs& specs, const ParamVector& psi, const Tensor& obs,
              const Tensor& act, const Tensor& z, double clip_max) {
    require(clip_max > 0.0, "reward: clip_max must be positive");
    return std::min(softplus(discriminator_logit(specs, psi, obs, act, z)), clip_max);
}

PolicySpecs make_policy_specs(std::size_t obs_dim, std::size_t act_dim,
                              std::size_t latent_dim,
                              std::span<const std::size_t> hidden) {
    PolicySpecs specs;
    specs.mean = MlpSpec{obs_dim + latent_dim, act_dim, to_sizes(hidden)};
    specs.log_std = MlpSpec{obs_dim + latent_dim, act_dim, to_sizes(hidden)};
    return specs;
}

ParamVector init_policy(const PolicySpecs& specs, Rng& rng) {
    ParamVector theta;
    add_mlp_params(theta, "pol_mu", specs.mean, rng, /*zero_final=*/true);
    add_mlp_params(theta, "pol_ls", specs.log_std, rng, /*zero_final=*/true);
    // Squash −5 + 7·sigmoid(raw) maps the bias log(4/3) to log-std −1, the
    // initial exploration scale; the zero final weights make it uniform.
    Tensor bias(Shape::vec(specs.log_std.output_dim));
    for (double& v : bias.data) v = std::log(4.0 / 3.0);
    theta.set("pol_ls.b" + std::to_string(specs.log_std.hidden.size()), bias);
    return theta;
}

namespace {

// Shared squash so tape and raw forward passes agree bit for bit.
constexpr double kLogStdLo = -5.0;
constexpr double kLogStdSpan = 7.0;  // hi − lo with hi = 2

}  // namespace

PolicyForward policy_forward(const PolicySpecs& specs, const ParamVector& theta,
                             const BaseMeanFn& base, const Tensor& obs, const Tensor& z) {
    const Tensor input = concat_tensors(obs, z);
    PolicyForward out;
    out.mean = mlp_forward(theta, "pol_mu", specs.mean, input);
    if (base) {
        const Tensor b = base(obs, z);
        require(b.data.size() == out.mean.data.size(),
                "policy: base mean dim does not match the action dim");
        for (std::size_t i = 0; i < out.mean.data.size(); ++i) out.mean[i] += b[i];
    }
    out.log_std = mlp_forward(theta, "pol_ls", specs.log_std, input);
    for (double& v : out.log_std.data) v = kLogStdLo + kLogStdSpan * sigmoid(v);
    return out;
}

std::pair<Tensor, double> conditional_policy_sample(const PolicySpecs& specs,
                                                    const ParamVector& theta,
                                                    const BaseMeanFn& base,
                                                    const Tensor& obs, const Tensor& z,
                                                    Rng& rng) {
    const PolicyForward pf = policy_forward(specs, theta, base, obs, z);
    Tensor action(pf.mean.shape);
    for (std::size_t i = 0; i < action.data.size(); ++i)
        action[i] = pf.mean[i] + std::exp(pf.log_std[i]) * rng.normal();
    return {action, gaussian_log_prob(action, pf.mean, pf.log_std)};
}

PolicyHeadFn policy_head_fn(PolicySpecs specs, BaseMeanFn base) {
    return [specs = std::move(specs), base = std::move(base)](const BoundParams& theta,
                                                              const StepSample& step) {
        Tape& t = theta.tape();
        Var input = t.constant(concat_tensors(step.obs, step.z));
        Var mean = mlp_apply(theta, "pol_mu", specs.mean, input);
        if (base) mean = add(mean, t.constant(base(step.obs, step.z)));
        Var raw = mlp_apply(theta, "pol_ls", specs.log_std, input);
        Var log_std = add_const(scale(sigmoid(raw), kLogStdSpan), kLogStdLo);
        return PolicyHead{mean, log_std};
    };
}

namespace {

// One rollout against read-only parameter snapshots, with the per-step
// behavior statistics recorded for the trust-region update.
struct RolloutSlot {
    Tensor z;
    Trajectory traj;
    std::vector<StepSample> steps;
    double task_metric = 0.0;
};

GailResult gail_train_impl(std::size_t latent_dim,
                           const std::function<Tensor(const Trajectory&, Rng&)>& draw_z,
                           const BaseMeanFn& base, std::span<const Trajectory> demos,
                           const GailConfig& config, Rng& rng) {
    require(!demos.empty(), "adversarial training: empty demonstration set");
    require(config.demos_per_iter >= 1,
            "adversarial training: need at least one trajectory per iteration");
    const EnvKind kind = kind_from_name(demos[0].meta.kind);
    for (const Trajectory& d : demos) {
        validate_trajectory(d);
        require(kind_from_name(d.meta.kind) == kind,
                "adversarial training: mixed environment kinds");
        require(d.horizon() >= 1, "adversarial training: empty demonstration");
    }
    const std::size_t od = obs_dim(kind);
    const std::size_t n = config.demos_per_iter;

    GailResult res;
    res.policy_specs = make_policy_specs(od, action_dim(kind), latent_dim,
                                         config.policy_hidden);
    res.disc_specs = make_discriminator_specs(od, action_dim(kind), latent_dim,
                                              config.disc_hidden);
    if (config.standardize_disc_input) fit_disc_standardizer(res.disc_specs, demos);

    Rng init_rng = rng.fork("gail-init");
    res.policy = init_policy(res.policy_specs, init_rng);
    res.disc = init_discriminator(res.disc_specs, init_rng);
    res.critic = make_critic(od + latent_dim, config.critic_hidden, init_rng);

    const PolicyHeadFn head = policy_head_fn(res.policy_specs, base);
    AdamOptimizer disc_opt(config.disc_lr);
    disc_opt.attach(&res.disc);

    for (std::size_t iter = 0; iter < config.iterations; ++iter) {
        try {
            Rng pick_rng = rng.fork("gail-pick", iter);
            std::vector<std::size_t> picked(n);
            for (std::size_t& idx : picked) idx = pick_rng.below(demos.size());
            std::vector<Rng> embed_rngs, roll_rngs;
            embed_rngs.reserve(n);
            roll_rngs.reserve(n);
            for (std::size_t j = 0; j < n; ++j) {
                embed_rngs.push_back(rng.fork("gail-embed", iter * n + j));
                roll_rngs.push_back(rng.fork("gail-rollout", iter * n + j));
            }

            std::vector<RolloutSlot> slots(n);
            parallel_for(
                n,
                [&](std::size_t j) {
                    const Trajectory& demo = demos[picked[j]];
                    RolloutSlot& slot = slots[j];
                    slot.z = draw_z(demo, embed_rngs[j]);
                    const EnvParams env = env_params_from_meta(demo.meta);
                    Rng& step_rng = roll_rngs[j];
                    const Policy pol = [&](const Tensor& state, std::size_t) {
                        StepSample s;
                        s.obs = observe(kind, state);
                        s.z = slot.z;
                        const PolicyForward pf = policy_forward(
                            res.policy_specs, res.policy, base, s.obs, s.z);
                        s.action = Tensor(pf.mean.shape);
                        for (std::size_t i = 0; i < s.action.data.size(); ++i)
                            s.action[i] =
                                pf.mean[i] + std::exp(pf.log_std[i]) * step_rng.normal();
                        s.mean_old = pf.mean;
                        s.log_std_old = pf.log_std;
                        s.log_prob_old =
                            gaussian_log_prob(s.action, pf.mean, pf.log_std);
                        const Tensor action = s.action;
                        slot.steps.push_back(std::move(s));
                        return action;
                    };
                    slot.traj = rollout(env, env_initial(env), pol, demo.horizon());
                    for (StepSample& s : slot.steps)
                        s.reward = reward(res.disc_specs, res.disc, s.obs, s.action, s.z,
                                          config.clip_max);
                    slot.task_metric = kind == EnvKind::kWalker
                                           ? speed_diff(demo, slot.traj)
                                           : endpoint_error(demo, slot.traj);
                },
                config.parallel);

            RolloutBatch batch;
            std::vector<Tensor> iter_z;
            double metric_sum = 0.0;
            for (RolloutSlot& slot : slots) {
                batch.episode_len.push_back(slot.steps.size());
                for (StepSample& s : slot.steps) batch.steps.push_back(std::move(s));
                iter_z.push_back(slot.z);
                metric_sum += slot.task_metric;
            }
            res.sampled_z.push_back(std::move(iter_z));

            double reward_sum = 0.0;
            for (const StepSample& s : batch.steps) reward_sum += s.reward;

            compute_advantages(batch, res.critic, config.gamma, config.lambda, true);
            const TrpoReport rep = trpo_step(res.policy, head, batch, config.trpo);
            critic_update(res.critic, batch, config.critic_epochs, config.critic_lr);

            std::vector<DiscGroup> expert(n), policy_groups(n);
            for (std::size_t j = 0; j < n; ++j) {
                const Trajectory& demo = demos[picked[j]];
                for (std::size_t t = 0; t < demo.horizon(); ++t) {
                    expert[j].obs.push_back(observe(kind, demo.states[t]));
                    expert[j].act.push_back(demo.actions[t]);
                }
                expert[j].z = slots[j].z;
                for (std::size_t t = 0; t < slots[j].traj.horizon(); ++t)
                    policy_groups[j].obs.push_back(observe(kind, slots[j].traj.states[t]));
                policy_groups[j].act = slots[j].traj.actions;
                policy_groups[j].z = slots[j].z;
            }
            const LossFn disc_loss_fn = [&](Tape&, const BoundParams& bound) {
                return discriminator_loss_vars(res.disc_specs, bound, expert,
                                               policy_groups);
            };
            double disc_loss_value = 0.0;
            for (std::size_t k = 0; k < config.disc_steps; ++k) {
                const ValueGrad vg = value_and_grad(disc_loss_fn, res.disc);
                disc_opt.step({vg.grad});
                disc_loss_value = vg.value;
            }

            GailIterRow row;
            row.iteration = iter;
            row.mean_reward = reward_sum / double(batch.size());
            row.disc_loss = disc_loss_value;
            row.policy_kl_step = rep.accepted ? rep.kl_after : 0.0;
            row.task_metric = metric_sum / double(n);
            res.metrics.push_back(row);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) +
                                 " (adversarial training, iteration " +
                                 std::to_string(iter) + ")");
        }
    }
    return res;
}

}  // namespace

GailResult diverse_gail_train(const VaeSpecs& vae_specs, const VaeParams& vae_params,
                              std::span<const Trajectory> demos,
                              const GailConfig& config, Rng& rng) {
    const auto draw_z = [&vae_specs, &vae_params](const Trajectory& demo, Rng& r) {
        return encode(vae_specs, vae_params, demo, r).sample;
    };
    const BaseMeanFn base = [&vae_specs, &vae_params](const Tensor& obs, const Tensor& z) {
        return action_mean_forward(vae_specs, vae_params.action_decoder, obs, z);
    };
    return gail_train_impl(vae_specs.latent_dim(), draw_z, base, demos, config, rng);
}

GailResult unconditional_gail_train(std::span<const Trajectory> demos,
                                    const GailConfig& config, Rng& rng) {
    const auto draw_z = [](const Trajectory&, Rng&) { return Tensor(Shape::vec(0)); };
    return gail_train_impl(0, draw_z, BaseMeanFn{}, demos, config, rng);
}

}  // namespace imit
