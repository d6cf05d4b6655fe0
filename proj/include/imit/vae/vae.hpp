#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "imit/core/param.hpp"
#include "imit/core/rng.hpp"
#include "imit/envs/env.hpp"
#include "imit/envs/trajectory.hpp"
#include "imit/nets/encoder.hpp"
#include "imit/nets/mlp.hpp"
#include "imit/nets/state_decoder.hpp"

namespace imit {

// Architecture of the trajectory model: a sequence encoder producing a
// Gaussian over the latent, a diagonal-Gaussian action net over
// concat(observation, latent), and an autoregressive next-observation density.
// All three nets consume the observation projection of the environment state,
// so task parameters hidden by the projection can only reach the decoders
// through the latent.
struct VaeSpecs {
    EncoderSpec encoder;             // over observations
    MlpSpec action_mean;             // concat(obs, z) -> action mean
    StateDecoderSpec state_decoder;  // next observation given (obs, z)

    std::size_t latent_dim() const { return encoder.latent_dim; }
    std::size_t obs_dim() const { return encoder.state_dim; }
    std::size_t action_dim() const { return action_mean.output_dim; }
};

VaeSpecs make_vae_specs(EnvKind kind, std::size_t encoder_width, std::size_t latent_dim,
                        std::vector<std::size_t> action_hidden, std::size_t channels,
                        std::size_t num_layers, std::size_t mixture_k);

// The three trainable groups. The action decoder holds the mean net plus a
// state-independent log-std vector ("act.log_std", initialized to zero).
struct VaeParams {
    ParamVector encoder;
    ParamVector action_decoder;
    ParamVector state_decoder;
};

VaeParams init_vae_params(const VaeSpecs& specs, Rng& rng);

struct Embedding {
    Tensor mean;
    Tensor log_std;
    Tensor sample;  // mean + exp(log_std) ⊙ ε with ε recorded at draw time
};

// KL( N(mean, diag exp(log_std)²) || N(0, I) ) = Σ ½(m² + e^{2s} − 1 − 2s).
Var kl_standard_normal(Var mean, Var log_std);
double kl_standard_normal(const Tensor& mean, const Tensor& log_std);

// Log-density of the action model at `action` given concat(obs, z).
Var action_log_prob(const BoundParams& act, const MlpSpec& spec, Var obs, Var z,
                    Var action);

struct VaeLossVars {
    Var total;
    Var recon_action;  // −Σ_t log π(a_t | x_t, z)
    Var recon_state;   // −Σ_t log p(x_{t+1} | x_t, z)
    Var kl;
};

// One-sample reparameterized evidence bound (negated, to minimize). The noise
// vector ε is supplied by the caller: a fixed ε makes the loss a deterministic
// differentiable function of the parameters.
VaeLossVars vae_loss_vars(Tape& tape, const VaeSpecs& specs, const BoundParams& enc,
                          const BoundParams& act, const BoundParams& sd,
                          const Trajectory& traj, const Tensor& eps);

struct VaeLossParts {
    double total = 0.0;
    double recon_action = 0.0;
    double recon_state = 0.0;
    double kl = 0.0;
};

VaeLossParts vae_loss(const VaeSpecs& specs, const VaeParams& params,
                      const Trajectory& traj, const Tensor& eps);

struct VaeTrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 8;
    double learning_rate = 1e-3;
    double clip_norm = 10.0;
    bool parallel = true;  // minibatch gradients on worker threads when available
};

struct VaeTrainResult {
    VaeParams params;
    std::vector<double> epoch_loss;  // mean per-trajectory loss, one per epoch
};

VaeTrainResult train_vae(std::span<const Trajectory> dataset, const VaeSpecs& specs,
                         const VaeTrainConfig& config, Rng& rng);

// Posterior parameters for a demonstration plus one reparameterized sample.
Embedding encode(const VaeSpecs& specs, const VaeParams& params, const Trajectory& traj,
                 Rng& rng);

// Mean action at (obs, z); also the frozen base head of the adversarial-stage
// residual policy.
Tensor action_mean_forward(const VaeSpecs& specs, const ParamVector& action_decoder,
                           const Tensor& obs, const Tensor& z);

// Closed-loop rollout in the true environment driven by the action decoder
// conditioned on a fixed embedding. The next-state density model is never
// used for control.
Trajectory imitate(const VaeSpecs& specs, const VaeParams& params, const EnvParams& env,
                   const Tensor& z, const EnvState& start, std::size_t T, Rng& rng,
                   bool deterministic);

// (1−α)·z1 + α·z2 for each α; alphas must be sorted and within [0,1].
std::vector<Tensor> interpolate_embeddings(const Tensor& z1, const Tensor& z2,
                                           std::span<const double> alphas);

// Rollout conditioned on z1 for t < switch_t, then a linear ramp to z2 over
// `window` steps ((k+1)/window at ramp step k; window 0 switches hard), then
// z2. Action sampling matches `imitate` with deterministic=false.
Trajectory blend_rollout(const VaeSpecs& specs, const VaeParams& params,
                         const EnvParams& env, const Tensor& z1, const Tensor& z2,
                         std::size_t switch_t, std::size_t window, std::size_t T,
                         Rng& rng);

}  // namespace imit
