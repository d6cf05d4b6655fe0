#pragma once

#include <string>
#include <vector>

#include "imit/core/param.hpp"

namespace imit {

// Fully connected net: tanh hidden layers, linear output.
struct MlpSpec {
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    std::vector<std::size_t> hidden;
};

// Registers weights/biases under `prefix` ("<prefix>.w0", "<prefix>.b0", ...).
// Weights are uniform ±1/sqrt(fan_in), biases zero. zero_final zeroes the
// output layer, used where a head must start as an exact no-op.
void add_mlp_params(ParamVector& params, const std::string& prefix, const MlpSpec& spec,
                    Rng& rng, bool zero_final = false);

Var mlp_apply(const BoundParams& bound, const std::string& prefix, const MlpSpec& spec,
              Var input);

Tensor mlp_forward(const ParamVector& params, const std::string& prefix,
                   const MlpSpec& spec, const Tensor& input);

}  // namespace imit
