#include "imit/vae/vae.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "imit/core/error.hpp"
#include "imit/core/parallel.hpp"

namespace imit {

namespace {

std::vector<Tensor> observations(EnvKind kind, const Trajectory& traj) {
    std::vector<Tensor> obs;
    obs.reserve(traj.states.size());
    for (const Tensor& s : traj.states) obs.push_back(observe(kind, s));
    return obs;
}

// z(t) -> embedding schedule shared by imitate and blend_rollout so that a
// constant schedule reproduces imitate draw-for-draw.
Policy decoder_policy(const VaeSpecs& specs, const VaeParams& params, EnvKind kind,
                      const std::function<Tensor(std::size_t)>& z_at, Rng& rng,
                      bool deterministic) {
    const Tensor log_std = params.action_decoder.get("act.log_std");
    return [&specs, &params, kind, z_at, &rng, deterministic,
            log_std](const Tensor& state, std::size_t t) {
        const Tensor obs = observe(kind, state);
        Tensor a = action_mean_forward(specs, params.action_decoder, obs, z_at(t));
        if (!deterministic)
            for (std::size_t i = 0; i < a.data.size(); ++i)
                a.data[i] += std::exp(log_std[i]) * rng.normal();
        return a;
    };
}

}  // namespace

VaeSpecs make_vae_specs(EnvKind kind, std::size_t encoder_width, std::size_t latent_dim,
                        std::vector<std::size_t> action_hidden, std::size_t channels,
                        std::size_t num_layers, std::size_t mixture_k) {
    const std::size_t od = obs_dim(kind);
    const std::size_t ad = action_dim(kind);
    VaeSpecs specs;
    specs.encoder = EncoderSpec{od, encoder_width, latent_dim};
    specs.action_mean = MlpSpec{od + latent_dim, ad, std::move(action_hidden)};
    specs.state_decoder = StateDecoderSpec{od, latent_dim, channels, num_layers, mixture_k};
    return specs;
}

VaeParams init_vae_params(const VaeSpecs& specs, Rng& rng) {
    VaeParams p;
    add_encoder_params(p.encoder, specs.encoder, rng);
    add_mlp_params(p.action_decoder, "act", specs.action_mean, rng);
    p.action_decoder.add("act.log_std", Shape::vec(specs.action_dim()));
    add_state_decoder_params(p.state_decoder, specs.state_decoder, rng);
    return p;
}

Var kl_standard_normal(Var mean, Var log_std) {
    Var two_s = scale(log_std, 2.0);
    Var inner = sub(add(mul(mean, mean), exp(two_s)), add_const(two_s, 1.0));
    return scale(sum_all(inner), 0.5);
}

double kl_standard_normal(const Tensor& mean, const Tensor& log_std) {
    require(mean.shape == log_std.shape, "kl: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < mean.data.size(); ++i) {
        const double m = mean.data[i];
        const double s = log_std.data[i];
        acc += 0.5 * (m * m + std::exp(2.0 * s) - 1.0 - 2.0 * s);
    }
    return acc;
}

Var action_log_prob(const BoundParams& act, const MlpSpec& spec, Var obs, Var z,
                    Var action) {
    Var mean = mlp_apply(act, "act", spec, concat(obs, z));
    return gaussian_log_prob(action, mean, act.at("act.log_std"));
}

VaeLossVars vae_loss_vars(Tape& tape, const VaeSpecs& specs, const BoundParams& enc,
                          const BoundParams& act, const BoundParams& sd,
                          const Trajectory& traj, const Tensor& eps) {
    const std::size_t T = traj.horizon();
    require(T >= 1, "vae loss: trajectory has no transitions");
    require(eps.shape == Shape::vec(specs.latent_dim()), "vae loss: noise vector shape");
    const EnvKind kind = kind_from_name(traj.meta.kind);
    require(obs_dim(kind) == specs.obs_dim(), "vae loss: observation width mismatch");

    const std::vector<Tensor> obs = observations(kind, traj);
    const LatentVars lat =
        birnn_apply(enc, specs.encoder, std::span<const Tensor>(obs.data(), T));
    Var z = add(lat.mean, mul(exp(lat.log_std), tape.constant(eps)));
    Var kl = kl_standard_normal(lat.mean, lat.log_std);

    Var recon_action = tape.constant_scalar(0.0);
    Var recon_state = tape.constant_scalar(0.0);
    for (std::size_t t = 0; t < T; ++t) {
        Var o = tape.constant(obs[t]);
        recon_action = sub(recon_action, action_log_prob(act, specs.action_mean, o, z,
                                                         tape.constant(traj.actions[t])));
        recon_state = sub(recon_state,
                          state_decoder_apply_log_prob(sd, specs.state_decoder, z, o,
                                                       tape.constant(obs[t + 1])));
    }

    require(tape.val(kl).all_finite(), "vae loss: divergence term is not finite");
    require(tape.val(recon_action).all_finite(),
            "vae loss: action reconstruction term is not finite");
    require(tape.val(recon_state).all_finite(),
            "vae loss: state reconstruction term is not finite");

    VaeLossVars out;
    out.recon_action = recon_action;
    out.recon_state = recon_state;
    out.kl = kl;
    out.total = add(add(recon_action, recon_state), kl);
    return out;
}

VaeLossParts vae_loss(const VaeSpecs& specs, const VaeParams& params,
                      const Trajectory& traj, const Tensor& eps) {
    Tape tape;
    BoundParams enc(tape, params.encoder, false);
    BoundParams act(tape, params.action_decoder, false);
    BoundParams sd(tape, params.state_decoder, false);
    const VaeLossVars lv = vae_loss_vars(tape, specs, enc, act, sd, traj, eps);
    return VaeLossParts{tape.scalar(lv.total), tape.scalar(lv.recon_action),
                        tape.scalar(lv.recon_state), tape.scalar(lv.kl)};
}

VaeTrainResult train_vae(std::span<const Trajectory> dataset, const VaeSpecs& specs,
                         const VaeTrainConfig& config, Rng& rng) {
    require(!dataset.empty(), "train_vae: empty dataset");
    require(config.batch_size >= 1 && config.epochs >= 1, "train_vae: degenerate config");

    VaeTrainResult out;
    Rng init_rng = rng.fork("vae-init");
    out.params = init_vae_params(specs, init_rng);

    AdamOptimizer opt(config.learning_rate);
    opt.attach(&out.params.encoder);
    opt.attach(&out.params.action_decoder);
    opt.attach(&out.params.state_decoder);

    Rng order_rng = rng.fork("vae-order");
    Rng noise_rng = rng.fork("vae-noise");
    const std::size_t n = dataset.size();
    const std::size_t n_enc = out.params.encoder.entry_count();
    const std::size_t n_act = out.params.action_decoder.entry_count();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[order_rng.below(i)]);

        double epoch_sum = 0.0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t bn = std::min(config.batch_size, n - start);

            std::vector<Tensor> eps(bn);
            for (Tensor& e : eps) {
                e = Tensor(Shape::vec(specs.latent_dim()));
                for (double& v : e.data) v = noise_rng.normal();
            }

            std::vector<double> losses(bn);
            std::vector<std::vector<double>> g_enc(bn), g_act(bn), g_sd(bn);
            try {
                parallel_for(
                    bn,
                    [&](std::size_t i) {
                        Tape tape;
                        BoundParams enc(tape, out.params.encoder);
                        BoundParams act(tape, out.params.action_decoder);
                        BoundParams sd(tape, out.params.state_decoder);
                        const VaeLossVars lv =
                            vae_loss_vars(tape, specs, enc, act, sd,
                                          dataset[order[start + i]], eps[i]);
                        losses[i] = tape.scalar(lv.total);

                        std::vector<Var> wrt = enc.vars();
                        wrt.insert(wrt.end(), act.vars().begin(), act.vars().end());
                        wrt.insert(wrt.end(), sd.vars().begin(), sd.vars().end());
                        std::vector<Tensor> g = tape.gradients(lv.total, wrt);
                        g_enc[i] = flatten(out.params.encoder,
                                           {g.begin(), g.begin() + n_enc});
                        g_act[i] = flatten(out.params.action_decoder,
                                           {g.begin() + n_enc, g.begin() + n_enc + n_act});
                        g_sd[i] = flatten(out.params.state_decoder,
                                          {g.begin() + n_enc + n_act, g.end()});
                    },
                    config.parallel);
            } catch (const NumericalError& e) {
                throw NumericalError(std::string(e.what()) + " (vae training, epoch " +
                                     std::to_string(epoch) + ")");
            }

            std::vector<double> ge(out.params.encoder.size(), 0.0);
            std::vector<double> ga(out.params.action_decoder.size(), 0.0);
            std::vector<double> gs(out.params.state_decoder.size(), 0.0);
            const double w = 1.0 / double(bn);
            for (std::size_t i = 0; i < bn; ++i) {
                epoch_sum += losses[i];
                for (std::size_t k = 0; k < ge.size(); ++k) ge[k] += w * g_enc[i][k];
                for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += w * g_act[i][k];
                for (std::size_t k = 0; k < gs.size(); ++k) gs[k] += w * g_sd[i][k];
            }
            opt.step({ge, ga, gs}, config.clip_norm);
        }
        out.epoch_loss.push_back(epoch_sum / double(n));
    }
    return out;
}

Embedding encode(const VaeSpecs& specs, const VaeParams& params, const Trajectory& traj,
                 Rng& rng) {
    const std::size_t T = traj.horizon();
    require(T >= 1, "encode: trajectory has no transitions");
    const EnvKind kind = kind_from_name(traj.meta.kind);
    const std::vector<Tensor> obs = observations(kind, traj);

    Embedding e;
    auto [mean, log_std] = birnn_encode(params.encoder, specs.encoder,
                                        std::span<const Tensor>(obs.data(), T));
    e.mean = std::move(mean);
    e.log_std = std::move(log_std);
    e.sample = Tensor(Shape::vec(specs.latent_dim()));
    for (std::size_t i = 0; i < e.sample.data.size(); ++i)
        e.sample.data[i] = e.mean[i] + std::exp(e.log_std[i]) * rng.normal();
    return e;
}

Tensor action_mean_forward(const VaeSpecs& specs, const ParamVector& action_decoder,
                           const Tensor& obs, const Tensor& z) {
    require(z.shape == Shape::vec(specs.latent_dim()), "action decoder: embedding shape");
    return mlp_forward(action_decoder, "act", specs.action_mean, concat_tensors(obs, z));
}

Trajectory imitate(const VaeSpecs& specs, const VaeParams& params, const EnvParams& env,
                   const Tensor& z, const EnvState& start, std::size_t T, Rng& rng,
                   bool deterministic) {
    const Policy pol = decoder_policy(specs, params, env.kind, [&z](std::size_t) {
        return z;
    }, rng, deterministic);
    Trajectory traj = rollout(env, start, pol, T);
    return traj;
}

std::vector<Tensor> interpolate_embeddings(const Tensor& z1, const Tensor& z2,
                                           std::span<const double> alphas) {
    require(z1.shape == z2.shape && z1.shape.rank == 1, "interpolate: embedding shapes");
    double prev = 0.0;
    std::vector<Tensor> out;
    out.reserve(alphas.size());
    for (const double a : alphas) {
        require(a >= 0.0 && a <= 1.0, "interpolate: alpha outside [0,1]");
        require(a >= prev, "interpolate: alphas must be sorted ascending");
        prev = a;
        Tensor zi(z1.shape);
        for (std::size_t i = 0; i < zi.data.size(); ++i)
            zi.data[i] = (1.0 - a) * z1.data[i] + a * z2.data[i];
        out.push_back(std::move(zi));
    }
    return out;
}

Trajectory blend_rollout(const VaeSpecs& specs, const VaeParams& params,
                         const EnvParams& env, const Tensor& z1, const Tensor& z2,
                         std::size_t switch_t, std::size_t window, std::size_t T,
                         Rng& rng) {
    require(z1.shape == z2.shape && z1.shape == Shape::vec(specs.latent_dim()),
            "blend: embedding shapes");
    require(switch_t + window <= T, "blend: switch_t + window exceeds the horizon");

    auto z_at = [&z1, &z2, switch_t, window](std::size_t t) {
        if (t < switch_t) return z1;
        if (t >= switch_t + window) return z2;
        const double a = double(t - switch_t + 1) / double(window);
        Tensor zt(z1.shape);
        for (std::size_t i = 0; i < zt.data.size(); ++i)
            zt.data[i] = (1.0 - a) * z1.data[i] + a * z2.data[i];
        return zt;
    };
    const Policy pol = decoder_policy(specs, params, env.kind, z_at, rng, false);
    return rollout(env, env_initial(env), pol, T);
}

}  // namespace imit
