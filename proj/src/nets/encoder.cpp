#include "imit/nets/encoder.hpp"

namespace imit {

namespace {

// Gate order inside the stacked pre-activation: input, forget, output, candidate.
struct CellState {
    Var h;
    Var c;
};

CellState lstm_cell(const BoundParams& bound, const std::string& prefix, Var x,
                    CellState prev, std::size_t width) {
    Var joint = concat(x, prev.h);
    Var pre = add(matvec(bound.at(prefix + ".w"), joint), bound.at(prefix + ".b"));
    Var i = sigmoid(slice(pre, 0, width));
    Var f = sigmoid(slice(pre, width, width));
    Var o = sigmoid(slice(pre, 2 * width, width));
    Var g = tanh(slice(pre, 3 * width, width));
    Var c = add(mul(f, prev.c), mul(i, g));
    Var h = mul(o, tanh(c));
    return CellState{h, c};
}

void add_cell_params(ParamVector& params, const std::string& prefix, std::size_t in_dim,
                     std::size_t width, Rng& rng) {
    const std::size_t fan_in = in_dim + width;
    params.add(prefix + ".w",
               init_uniform_fan_in(Shape::mat(4 * width, fan_in), fan_in, rng));
    Tensor b(Shape::vec(4 * width));
    for (std::size_t j = width; j < 2 * width; ++j) b.data[j] = 1.0;  // forget gate open
    params.add(prefix + ".b", b);
}

// Runs the 2-layer stack over `states` in the given order; returns the
// second layer's output per consumed step.
std::vector<Var> run_direction(const BoundParams& bound, const EncoderSpec& spec,
                               std::span<const Tensor> states, bool backward) {
    Tape& t = bound.tape();
    const std::string d = backward ? "enc.bw" : "enc.fw";
    Var zero = t.constant(Tensor::zeros(Shape::vec(spec.width)));
    CellState s0{zero, zero}, s1{zero, zero};
    std::vector<Var> out(states.size());
    for (std::size_t step = 0; step < states.size(); ++step) {
        const std::size_t at = backward ? states.size() - 1 - step : step;
        require(states[at].shape == Shape::vec(spec.state_dim),
                "encoder: state " + std::to_string(at) + " has shape " +
                    states[at].shape.str());
        Var x = t.constant(states[at]);
        s0 = lstm_cell(bound, d + "0", x, s0, spec.width);
        s1 = lstm_cell(bound, d + "1", s0.h, s1, spec.width);
        out[at] = s1.h;
    }
    return out;
}

}  // namespace

void add_encoder_params(ParamVector& params, const EncoderSpec& spec, Rng& rng) {
    require(spec.width >= 1 && spec.latent_dim >= 1 && spec.state_dim >= 1,
            "encoder: all dims must be >= 1");
    for (const char* d : {"enc.fw", "enc.bw"}) {
        add_cell_params(params, std::string(d) + "0", spec.state_dim, spec.width, rng);
        add_cell_params(params, std::string(d) + "1", spec.width, spec.width, rng);
    }
    const std::size_t in = 2 * spec.width;
    params.add("enc.head.w",
               init_uniform_fan_in(Shape::mat(2 * spec.latent_dim, in), in, rng));
    params.add("enc.head.b", Shape::vec(2 * spec.latent_dim));
}

LatentVars birnn_apply(const BoundParams& bound, const EncoderSpec& spec,
                       std::span<const Tensor> states) {
    require(!states.empty(), "encoder: empty state sequence");
    const std::vector<Var> fw = run_direction(bound, spec, states, false);
    const std::vector<Var> bw = run_direction(bound, spec, states, true);

    Var acc = concat(fw[0], bw[0]);
    for (std::size_t step = 1; step < states.size(); ++step)
        acc = add(acc, concat(fw[step], bw[step]));
    Var avg = scale(acc, 1.0 / static_cast<double>(states.size()));

    Var head = add(matvec(bound.at("enc.head.w"), avg), bound.at("enc.head.b"));
    return LatentVars{slice(head, 0, spec.latent_dim),
                      slice(head, spec.latent_dim, spec.latent_dim)};
}

std::pair<Tensor, Tensor> birnn_encode(const ParamVector& params, const EncoderSpec& spec,
                                       std::span<const Tensor> states) {
    Tape t;
    BoundParams bound(t, params, /*trainable=*/false);
    const LatentVars lv = birnn_apply(bound, spec, states);
    return {t.val(lv.mean), t.val(lv.log_std)};
}

std::vector<Tensor> birnn_direction_outputs(const ParamVector& params,
                                            const EncoderSpec& spec,
                                            std::span<const Tensor> states) {
    Tape t;
    BoundParams bound(t, params, /*trainable=*/false);
    const std::vector<Var> fw = run_direction(bound, spec, states, false);
    const std::vector<Var> bw = run_direction(bound, spec, states, true);
    std::vector<Tensor> out;
    out.reserve(states.size());
    for (std::size_t step = 0; step < states.size(); ++step)
        out.push_back(t.val(concat(fw[step], bw[step])));
    return out;
}

}  // namespace imit
