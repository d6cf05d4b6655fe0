#include "imit/nets/state_decoder.hpp"

#include <cmath>
#include <string>

namespace imit {

namespace {

std::string lname(std::size_t layer, const char* part) {
    return "sd.l" + std::to_string(layer) + "." + part;
}

void check_spec(const StateDecoderSpec& spec) {
    require(spec.state_dim >= 1 && spec.latent_dim >= 1 && spec.channels >= 1 &&
                spec.num_layers >= 1 && spec.mixture_k >= 1,
            "state decoder: all spec fields must be >= 1");
}

}  // namespace

void add_state_decoder_params(ParamVector& params, const StateDecoderSpec& spec, Rng& rng) {
    check_spec(spec);
    const std::size_t c = spec.channels;
    const std::size_t cond_in = spec.latent_dim + spec.state_dim;

    params.add("sd.in.w", init_uniform_fan_in(Shape::mat(c, 1), 1, rng));
    params.add("sd.in.b", Shape::vec(c));

    for (std::size_t l = 0; l < spec.num_layers; ++l) {
        for (const char* arm : {"wf0", "wf1", "wg0", "wg1", "res.w", "skip.w"})
            params.add(lname(l, arm), init_uniform_fan_in(Shape::mat(c, c), c, rng));
        for (const char* arm : {"bf", "bg", "res.b", "skip.b"})
            params.add(lname(l, arm), Shape::vec(c));
        for (const char* arm : {"cf", "cg"}) {
            params.add(lname(l, arm) + ".w",
                       init_uniform_fan_in(Shape::mat(c, cond_in), cond_in, rng));
            params.add(lname(l, arm) + ".b", Shape::vec(c));
        }
    }

    params.add("sd.head1.w", init_uniform_fan_in(Shape::mat(c, c), c, rng));
    params.add("sd.head1.b", Shape::vec(c));
    params.add("sd.head2.w",
               init_uniform_fan_in(Shape::mat(3 * spec.mixture_k, c), c, rng));
    params.add("sd.head2.b", Shape::vec(3 * spec.mixture_k));
}

Var mog_log_prob(Var weights_logits, Var means, Var log_stds, Var value) {
    Tape& t = *weights_logits.tape;
    const Shape ks = t.val(weights_logits).shape;
    require(ks.rank == 1 && ks.d0 >= 1 && t.val(means).shape == ks &&
                t.val(log_stds).shape == ks,
            "mixture log-prob: component vectors must share shape [K]");
    constexpr double kHalfLog2Pi = 0.9189385332046727;
    Var v = broadcast(value, ks);
    Var zscore = mul(sub(v, means), exp(neg(log_stds)));
    Var comp_log = sub(neg(log_stds),
                       add_const(scale(mul(zscore, zscore), 0.5), kHalfLog2Pi));
    return logsumexp(add(log_softmax(weights_logits), comp_log));
}

std::vector<MogHeadVars> state_decoder_heads(const BoundParams& bound,
                                             const StateDecoderSpec& spec, Var z,
                                             Var x_prev, Var x_next) {
    check_spec(spec);
    Tape& t = bound.tape();
    const std::size_t d = spec.state_dim;
    const std::size_t c = spec.channels;
    require(t.val(z).shape == Shape::vec(spec.latent_dim),
            "state decoder: z shape " + t.val(z).shape.str());
    require(t.val(x_prev).shape == Shape::vec(d),
            "state decoder: x_prev shape " + t.val(x_prev).shape.str());
    require(t.val(x_next).shape == Shape::vec(d),
            "state decoder: x_next shape " + t.val(x_next).shape.str());

    Var cond_in = concat(z, x_prev);
    Var zero_ch = t.constant(Tensor::zeros(Shape::vec(c)));
    Var zero_in = t.constant(Tensor::zeros(Shape::vec(1)));

    // Shifted input: position p consumes x_next[p-1]; position 0 consumes 0.
    std::vector<Var> h(d);
    for (std::size_t p = 0; p < d; ++p) {
        Var xin = p == 0 ? zero_in : slice(x_next, p - 1, 1);
        h[p] = add(matvec(bound.at("sd.in.w"), xin), bound.at("sd.in.b"));
    }

    std::vector<Var> skip(d, zero_ch);
    for (std::size_t l = 0; l < spec.num_layers; ++l) {
        const std::size_t dil = static_cast<std::size_t>(1) << l;
        Var cond_f = add(matvec(bound.at(lname(l, "cf") + ".w"), cond_in),
                         bound.at(lname(l, "cf") + ".b"));
        Var cond_g = add(matvec(bound.at(lname(l, "cg") + ".w"), cond_in),
                         bound.at(lname(l, "cg") + ".b"));
        std::vector<Var> next(d);
        for (std::size_t p = 0; p < d; ++p) {
            Var back = p >= dil ? h[p - dil] : zero_ch;
            Var f = add(add(matvec(bound.at(lname(l, "wf0")), back),
                            matvec(bound.at(lname(l, "wf1")), h[p])),
                        add(bound.at(lname(l, "bf")), cond_f));
            Var g = add(add(matvec(bound.at(lname(l, "wg0")), back),
                            matvec(bound.at(lname(l, "wg1")), h[p])),
                        add(bound.at(lname(l, "bg")), cond_g));
            Var act = mul(tanh(f), sigmoid(g));
            next[p] = add(h[p], add(matvec(bound.at(lname(l, "res.w")), act),
                                    bound.at(lname(l, "res.b"))));
            skip[p] = add(skip[p], add(matvec(bound.at(lname(l, "skip.w")), act),
                                       bound.at(lname(l, "skip.b"))));
        }
        h = std::move(next);
    }

    const std::size_t k = spec.mixture_k;
    std::vector<MogHeadVars> heads;
    heads.reserve(d);
    for (std::size_t p = 0; p < d; ++p) {
        Var hid = tanh(add(matvec(bound.at("sd.head1.w"), skip[p]),
                           bound.at("sd.head1.b")));
        Var out = add(matvec(bound.at("sd.head2.w"), hid), bound.at("sd.head2.b"));
        heads.push_back(MogHeadVars{slice(out, 0, k), slice(out, k, k),
                                    slice(out, 2 * k, k)});
    }
    return heads;
}

Var state_decoder_partial_log_prob(const BoundParams& bound, const StateDecoderSpec& spec,
                                   Var z, Var x_prev, Var x_next, std::size_t d_max) {
    require(d_max < spec.state_dim, "state decoder: component index out of range");
    const std::vector<MogHeadVars> heads =
        state_decoder_heads(bound, spec, z, x_prev, x_next);
    Var total = mog_log_prob(heads[0].logits, heads[0].means, heads[0].log_stds,
                             pick(x_next, 0));
    for (std::size_t p = 1; p <= d_max; ++p)
        total = add(total, mog_log_prob(heads[p].logits, heads[p].means,
                                        heads[p].log_stds, pick(x_next, p)));
    return total;
}

Var state_decoder_apply_log_prob(const BoundParams& bound, const StateDecoderSpec& spec,
                                 Var z, Var x_prev, Var x_next) {
    return state_decoder_partial_log_prob(bound, spec, z, x_prev, x_next,
                                          spec.state_dim - 1);
}

double state_decoder_log_prob(const ParamVector& params, const StateDecoderSpec& spec,
                              const Tensor& z, const Tensor& x_prev, const Tensor& x_next) {
    require(params.flat().size() > 0, "state decoder: empty parameters");
    for (const double v : params.flat())
        require(std::isfinite(v), "state decoder: non-finite parameter");
    Tape t;
    BoundParams bound(t, params, /*trainable=*/false);
    return t.scalar(state_decoder_apply_log_prob(bound, spec, t.constant(z),
                                                 t.constant(x_prev), t.constant(x_next)));
}

Tensor state_decoder_sample(const ParamVector& params, const StateDecoderSpec& spec,
                            const Tensor& z, const Tensor& x_prev, Rng& rng) {
    check_spec(spec);
    const std::size_t d = spec.state_dim;
    const std::size_t k = spec.mixture_k;
    Tensor sample(Shape::vec(d));
    for (std::size_t p = 0; p < d; ++p) {
        // Causality makes positions > p irrelevant; the partial sample with
        // zero tail yields the exact conditional for position p.
        Tape t;
        BoundParams bound(t, params, /*trainable=*/false);
        const std::vector<MogHeadVars> heads = state_decoder_heads(
            bound, spec, t.constant(z), t.constant(x_prev), t.constant(sample));
        const Tensor logits = t.val(heads[p].logits);
        const Tensor means = t.val(heads[p].means);
        const Tensor log_stds = t.val(heads[p].log_stds);

        // Component draw from softmax(logits).
        double lse = logits.data[0];
        for (std::size_t i = 1; i < k; ++i)
            lse = std::max(lse, logits.data[i]);
        double norm = 0.0;
        for (std::size_t i = 0; i < k; ++i) norm += std::exp(logits.data[i] - lse);
        const double u = rng.uniform() * norm;
        double cum = 0.0;
        std::size_t comp = k - 1;
        for (std::size_t i = 0; i < k; ++i) {
            cum += std::exp(logits.data[i] - lse);
            if (u < cum) {
                comp = i;
                break;
            }
        }
        sample.data[p] = means.data[comp] + std::exp(log_stds.data[comp]) * rng.normal();
    }
    return sample;
}

}  // namespace imit
