#include "imit/nets/mlp.hpp"

namespace imit {

void add_mlp_params(ParamVector& params, const std::string& prefix, const MlpSpec& spec,
                    Rng& rng, bool zero_final) {
    require(spec.input_dim >= 1 && spec.output_dim >= 1,
            "mlp: input/output dims must be >= 1 (" + prefix + ")");
    for (const std::size_t h : spec.hidden)
        require(h >= 1, "mlp: zero-width hidden layer (" + prefix + ")");

    std::size_t in = spec.input_dim;
    std::size_t layer = 0;
    for (const std::size_t h : spec.hidden) {
        params.add(prefix + ".w" + std::to_string(layer),
                   init_uniform_fan_in(Shape::mat(h, in), in, rng));
        params.add(prefix + ".b" + std::to_string(layer), Shape::vec(h));
        in = h;
        ++layer;
    }
    if (zero_final) {
        params.add(prefix + ".w" + std::to_string(layer), Shape::mat(spec.output_dim, in));
    } else {
        params.add(prefix + ".w" + std::to_string(layer),
                   init_uniform_fan_in(Shape::mat(spec.output_dim, in), in, rng));
    }
    params.add(prefix + ".b" + std::to_string(layer), Shape::vec(spec.output_dim));
}

Var mlp_apply(const BoundParams& bound, const std::string& prefix, const MlpSpec& spec,
              Var input) {
    Tape& t = bound.tape();
    require(t.val(input).shape == Shape::vec(spec.input_dim),
            "mlp " + prefix + ": input shape " + t.val(input).shape.str() +
                ", expected [" + std::to_string(spec.input_dim) + "]");
    Var h = input;
    for (std::size_t layer = 0; layer < spec.hidden.size(); ++layer) {
        const std::string idx = std::to_string(layer);
        h = tanh(add(matvec(bound.at(prefix + ".w" + idx), h),
                     bound.at(prefix + ".b" + idx)));
    }
    const std::string idx = std::to_string(spec.hidden.size());
    return add(matvec(bound.at(prefix + ".w" + idx), h), bound.at(prefix + ".b" + idx));
}

Tensor mlp_forward(const ParamVector& params, const std::string& prefix,
                   const MlpSpec& spec, const Tensor& input) {
    Tape t;
    BoundParams bound(t, params, /*trainable=*/false);
    return t.val(mlp_apply(bound, prefix, spec, t.constant(input)));
}

}  // namespace imit
