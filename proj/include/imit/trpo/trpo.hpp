#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "imit/core/param.hpp"
#include "imit/core/rng.hpp"
#include "imit/nets/mlp.hpp"

namespace imit {

// One environment step as consumed by the trust-region update: observation,
// conditioning embedding (may be zero-width), the action actually taken, and
// the behavior policy's Gaussian at that step.
struct StepSample {
    Tensor obs;
    Tensor z;
    Tensor action;
    Tensor mean_old;
    Tensor log_std_old;
    double log_prob_old = 0.0;
    double reward = 0.0;
    double value = 0.0;         // critic prediction, filled by compute_advantages
    double advantage = 0.0;     // GAE, normalized when enabled
    double value_target = 0.0;  // raw advantage + value (regression target)
};

struct RolloutBatch {
    std::vector<StepSample> steps;
    std::vector<std::size_t> episode_len;  // partitions `steps`, each ≥ 1

    std::size_t size() const { return steps.size(); }
};

void validate_batch(const RolloutBatch& batch);

// The new policy's Gaussian head at one step, built on theta's tape. The
// adapter owns all structure (conditioning, residual base, squashing); the
// optimizer below only needs mean and log-std as differentiable functions of
// theta.
struct PolicyHead {
    Var mean;
    Var log_std;
};

using PolicyHeadFn =
    std::function<PolicyHead(const BoundParams& theta, const StepSample& step)>;

// Value net over concat(obs, z).
struct Critic {
    MlpSpec spec;
    ParamVector params;
};

Critic make_critic(std::size_t input_dim, std::vector<std::size_t> hidden, Rng& rng);
double critic_value(const Critic& critic, const StepSample& step);

// Generalized advantage estimation within each episode, with terminal value 0
// (episodes end, they are not truncated): δ_t = r_t + γV_{t+1} − V_t,
// A_t = Σ_k (γλ)^k δ_{t+k}. Value targets use the raw advantage; when
// `normalize` is set the stored advantages are shifted/scaled to mean 0,
// std 1 across the whole batch.
void compute_advantages(RolloutBatch& batch, const Critic& critic, double gamma,
                        double lambda, bool normalize = true);

struct SurrogateKlVars {
    Var surrogate;  // mean_t ratio_t · A_t, to be maximized
    Var mean_kl;    // mean_t KL(old_t || new_t), closed form for diagonal Gaussians
};

SurrogateKlVars surrogate_and_kl_vars(const BoundParams& theta, const PolicyHeadFn& head,
                                      const RolloutBatch& batch);

// Evaluation-only form on a fresh tape.
std::pair<double, double> surrogate_and_kl(const ParamVector& theta,
                                           const PolicyHeadFn& head,
                                           const RolloutBatch& batch);

// (∇²_θ mean_kl)·v + damping·v by differentiating the emitted KL gradient a
// second time. `subsample` keeps every k-th step of the batch (k ≥ 1), the
// usual cost reduction for the curvature estimate only.
std::vector<double> fisher_vector_product(const ParamVector& theta,
                                          const PolicyHeadFn& head,
                                          const RolloutBatch& batch,
                                          std::span<const double> v, double damping,
                                          std::size_t subsample = 1);

struct CgResult {
    std::vector<double> x;               // best iterate (smallest residual)
    std::vector<double> residual_norms;  // best residual seen up to each iteration
};

CgResult conjugate_gradient(
    const std::function<std::vector<double>(const std::vector<double>&)>& apply_A,
    const std::vector<double>& b, std::size_t iters, double tol);

struct TrpoConfig {
    double max_kl = 0.01;
    double damping = 0.1;
    std::size_t cg_iters = 10;
    double cg_tol = 1e-10;
    std::size_t backtracks = 10;
    std::size_t fvp_subsample = 1;
};

struct TrpoReport {
    bool accepted = false;
    double surrogate_before = 0.0;
    double surrogate_after = 0.0;   // equals before when rejected
    double kl_after = 0.0;          // 0 when rejected
    double grad_norm = 0.0;
    double step_scale = 0.0;        // sqrt(2·max_kl / dᵀFd), 0 when rejected early
    std::size_t line_search_tries = 0;
};

// One KL-constrained natural-gradient update of theta in place; on rejection
// theta is left untouched. Accepted steps satisfy surrogate_after >
// surrogate_before and kl_after ≤ 1.5·max_kl.
TrpoReport trpo_step(ParamVector& theta, const PolicyHeadFn& head,
                     const RolloutBatch& batch, const TrpoConfig& config);

// Full-batch mean-squared-error regression of the critic onto the value
// targets; returns the final loss. Deterministic (no sampling).
double critic_update(Critic& critic, const RolloutBatch& batch, std::size_t epochs = 5,
                     double lr = 1e-3);

}  // namespace imit
