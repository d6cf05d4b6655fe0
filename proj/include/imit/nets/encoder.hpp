#pragma once

#include <span>
#include <utility>
#include <vector>

#include "imit/core/param.hpp"

namespace imit {

// Bi-directional recurrent sequence encoder: two stacked gated recurrent
// layers per direction, second-layer outputs of both directions concatenated
// per step, averaged over time, then one linear map to (mean, log_std) of the
// latent distribution.
struct EncoderSpec {
    std::size_t state_dim = 0;
    std::size_t width = 0;  // recurrent width per direction, both layers
    std::size_t latent_dim = 0;
};

void add_encoder_params(ParamVector& params, const EncoderSpec& spec, Rng& rng);

struct LatentVars {
    Var mean;
    Var log_std;
};

LatentVars birnn_apply(const BoundParams& bound, const EncoderSpec& spec,
                       std::span<const Tensor> states);

std::pair<Tensor, Tensor> birnn_encode(const ParamVector& params, const EncoderSpec& spec,
                                       std::span<const Tensor> states);

// Per-step concatenated [forward; backward] second-layer outputs, exposed for
// the direction-symmetry checks.
std::vector<Tensor> birnn_direction_outputs(const ParamVector& params,
                                            const EncoderSpec& spec,
                                            std::span<const Tensor> states);

}  // namespace imit
