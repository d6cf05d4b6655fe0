#pragma once

#include <vector>

#include "imit/core/param.hpp"

namespace imit {

// Predicts the next state one component at a time: a stack of causal, dilated
// 1-D convolutions over the component index (dilation 2^layer, kernel 2) with
// gated tanh×sigmoid activations, residual and skip connections, and a
// per-layer linear conditioning on concat(z, x_prev). Each component's output
// is a K-component Gaussian mixture; component d's distribution depends only
// on components < d of the predicted state.
struct StateDecoderSpec {
    std::size_t state_dim = 0;
    std::size_t latent_dim = 0;
    std::size_t channels = 0;
    std::size_t num_layers = 0;
    std::size_t mixture_k = 0;
};

void add_state_decoder_params(ParamVector& params, const StateDecoderSpec& spec, Rng& rng);

// log Σ_k softmax(logits)_k · N(value; means_k, exp(log_stds_k)), all inputs
// K-vectors except the scalar value.
Var mog_log_prob(Var weights_logits, Var means, Var log_stds, Var value);

struct MogHeadVars {
    Var logits;    // vec(K)
    Var means;     // vec(K)
    Var log_stds;  // vec(K)
};

// Mixture heads for every component position, teacher-forced on x_next
// (position d consumes x_next[d-1]; position 0 consumes zero).
std::vector<MogHeadVars> state_decoder_heads(const BoundParams& bound,
                                             const StateDecoderSpec& spec, Var z,
                                             Var x_prev, Var x_next);

// Teacher-forced log p(x_next | x_prev, z) summed over components.
Var state_decoder_apply_log_prob(const BoundParams& bound, const StateDecoderSpec& spec,
                                 Var z, Var x_prev, Var x_next);

// Same sum restricted to components 0..d_max inclusive (causality checks).
Var state_decoder_partial_log_prob(const BoundParams& bound, const StateDecoderSpec& spec,
                                   Var z, Var x_prev, Var x_next, std::size_t d_max);

double state_decoder_log_prob(const ParamVector& params, const StateDecoderSpec& spec,
                              const Tensor& z, const Tensor& x_prev, const Tensor& x_next);

// Samples components left to right, each from its mixture conditional.
Tensor state_decoder_sample(const ParamVector& params, const StateDecoderSpec& spec,
                            const Tensor& z, const Tensor& x_prev, Rng& rng);

}  // namespace imit
