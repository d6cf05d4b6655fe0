#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "imit/core/param.hpp"
#include "imit/core/rng.hpp"
#include "imit/core/tape.hpp"
#include "imit/envs/trajectory.hpp"
#include "imit/nets/mlp.hpp"
#include "imit/trpo/trpo.hpp"
#include "imit/vae/vae.hpp"

namespace imit {

// ---------------------------------------------------------------------------
// Discriminator: sigmoid MLP over concat(x, a, z). The (x, a) block is
// optionally standardized per dimension with statistics fitted on the
// demonstration set; the conditioning z passes through untouched.
// ---------------------------------------------------------------------------

struct DiscriminatorSpecs {
    MlpSpec mlp;       // input obs+act+latent, output 1 logit
    Tensor shift;      // per-dim offset for concat(obs, act); zeros when off
    Tensor inv_scale;  // per-dim reciprocal spread; ones when off
    std::size_t obs_dim = 0;
    std::size_t act_dim = 0;
    std::size_t latent_dim = 0;
};

DiscriminatorSpecs make_discriminator_specs(std::size_t obs_dim, std::size_t act_dim,
                                            std::size_t latent_dim,
                                            std::span<const std::size_t> hidden);

// Per-dimension mean and reciprocal standard deviation of concat(obs, act)
// over every demonstration step; dimensions with spread below 1e-8 pass
// through unscaled.
void fit_disc_standardizer(DiscriminatorSpecs& specs, std::span<const Trajectory> demos);

ParamVector init_discriminator(const DiscriminatorSpecs& specs, Rng& rng);

Var discriminator_logit_var(const DiscriminatorSpecs& specs, const BoundParams& psi,
                            const Tensor& obs, const Tensor& act, const Tensor& z);
double discriminator_logit(const DiscriminatorSpecs& specs, const ParamVector& psi,
                           const Tensor& obs, const Tensor& act, const Tensor& z);
double discriminator_prob(const DiscriminatorSpecs& specs, const ParamVector& psi,
                          const Tensor& obs, const Tensor& act, const Tensor& z);

// Samples that share one conditioning draw because they came from one source
// trajectory (a demonstration or a rollout imitating it).
struct DiscGroup {
    std::vector<Tensor> obs;
    std::vector<Tensor> act;
    Tensor z;
};

// −(1/n) Σ_j [ (1/T_j) Σ_t log D(x,a|z_j) + (1/T̂_j) Σ_t log(1−D(x̂,â|z_j)) ],
// to be minimized. Expert group j and policy group j share z_j.
Var discriminator_loss_vars(const DiscriminatorSpecs& specs, const BoundParams& psi,
                            std::span<const DiscGroup> expert,
                            std::span<const DiscGroup> policy);
double discriminator_loss(const DiscriminatorSpecs& specs, const ParamVector& psi,
                          std::span<const DiscGroup> expert,
                          std::span<const DiscGroup> policy);

// min(−log(1 − D(x,a|z)), clip_max), computed stably from the logit.
double reward(const DiscriminatorSpecs& specs, const ParamVector& psi, const Tensor& obs,
              const Tensor& act, const Tensor& z, double clip_max = 10.0);

// ---------------------------------------------------------------------------
// Residual conditional policy: N(μ_θ(x,z) + μ_base(x,z), σ_θ(x,z)²) with the
// base mean frozen. μ_θ has a zero-initialized final layer so the mean equals
// the base exactly at initialization; the log-std head is squashed into
// [−5, 2] and initialized at −1.
// ---------------------------------------------------------------------------

struct PolicySpecs {
    MlpSpec mean;     // (obs+latent) → act offset
    MlpSpec log_std;  // (obs+latent) → raw log-std, squashed
};

PolicySpecs make_policy_specs(std::size_t obs_dim, std::size_t act_dim,
                              std::size_t latent_dim,
                              std::span<const std::size_t> hidden);

ParamVector init_policy(const PolicySpecs& specs, Rng& rng);

// Frozen base mean μ(x, z); an empty function means a zero base.
using BaseMeanFn = std::function<Tensor(const Tensor& obs, const Tensor& z)>;

struct PolicyForward {
    Tensor mean;
    Tensor log_std;
};

PolicyForward policy_forward(const PolicySpecs& specs, const ParamVector& theta,
                             const BaseMeanFn& base, const Tensor& obs, const Tensor& z);

// Draws a ~ N(mean, diag σ²) and returns the draw with its log density.
std::pair<Tensor, double> conditional_policy_sample(const PolicySpecs& specs,
                                                    const ParamVector& theta,
                                                    const BaseMeanFn& base,
                                                    const Tensor& obs, const Tensor& z,
                                                    Rng& rng);

// Adapter for the trust-region optimizer: gradients reach θ only, the base
// mean enters the graph as a constant.
PolicyHeadFn policy_head_fn(PolicySpecs specs, BaseMeanFn base);

// ---------------------------------------------------------------------------
// Adversarial training loop.
// ---------------------------------------------------------------------------

struct GailConfig {
    std::size_t iterations = 300;
    std::size_t demos_per_iter = 8;  // n
    std::size_t disc_steps = 10;
    double disc_lr = 1e-4;
    double clip_max = 10.0;
    double gamma = 0.995;
    double lambda = 0.97;
    std::size_t critic_epochs = 5;
    double critic_lr = 1e-3;
    std::vector<std::size_t> policy_hidden = {64, 32};
    std::vector<std::size_t> disc_hidden = {32, 32};
    std::vector<std::size_t> critic_hidden = {64, 32};
    bool standardize_disc_input = true;
    bool parallel = true;
    TrpoConfig trpo;
};

struct GailIterRow {
    std::size_t iteration = 0;
    double mean_reward = 0.0;
    double disc_loss = 0.0;
    double policy_kl_step = 0.0;
    double task_metric = 0.0;  // mean speed difference or mean endpoint error
};

struct GailResult {
    PolicySpecs policy_specs;
    ParamVector policy;
    DiscriminatorSpecs disc_specs;
    ParamVector disc;
    Critic critic;
    std::vector<GailIterRow> metrics;
    std::vector<std::vector<Tensor>> sampled_z;  // [iteration][j], the fresh draws
};

// Algorithm: each iteration samples n demonstrations, draws a fresh posterior
// embedding per demonstration, rolls out the conditional policy, rewards the
// rollout steps through the discriminator, takes one trust-region policy step
// and a critic refit, then disc_steps adaptive-moment discriminator steps.
GailResult diverse_gail_train(const VaeSpecs& vae_specs, const VaeParams& vae_params,
                              std::span<const Trajectory> demos,
                              const GailConfig& config, Rng& rng);

// Same loop with zero-width conditioning and no base policy: the
// mode-collapse baseline.
GailResult unconditional_gail_train(std::span<const Trajectory> demos,
                                    const GailConfig& config, Rng& rng);

}  // namespace imit
