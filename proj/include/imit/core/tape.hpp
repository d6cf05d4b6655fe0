#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "imit/core/tensor.hpp"

namespace imit {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid for the tape's lifetime.
struct Var {
    Tape* tape = nullptr;
    std::int32_t id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
};

// Reverse-mode automatic differentiation over a define-by-run tape.
//
// Every operation appends a node and evaluates it eagerly, so Var values are
// always available. The backward pass itself emits ordinary nodes onto the
// tape, which makes gradients differentiable in turn (grad-of-grad), the
// mechanism behind the Fisher-vector products in the trust-region optimizer.
//
// A tape is single-threaded; independent tapes may be used concurrently.
class Tape {
  public:
    enum class Op : std::uint8_t {
        kLeaf,
        kConst,
        kAdd,
        kSub,
        kMul,
        kDiv,
        kNeg,
        kScale,         // x * s
        kAddConst,      // x + s
        kMatVec,        // (m,n)x(n) -> (m)
        kMatMul,        // (m,n)x(n,p) -> (m,p)
        kOuter,         // (m)x(n) -> (m,n)
        kTranspose,
        kTanh,
        kSigmoid,
        kExp,
        kLog,
        kSoftplus,
        kSumAll,        // -> scalar
        kMeanAll,       // -> scalar
        kMaxAll,        // -> scalar, argmax recorded in a0
        kMaximum,       // elementwise max
        kConcat,        // 1-D ++ 1-D
        kSlice,         // 1-D, [a0, a0+a1)
        kScatterSlice,  // 1-D of length a1, input placed at offset a0
        kPick,          // 1-D element a0 -> scalar
        kScatterIndex,  // scalar -> 1-D of length a1, value at index a0
        kBroadcast,     // scalar -> bshape
        kStop,          // identity value, stops gradient
    };

    struct Node {
        Op op;
        std::int32_t in0 = -1;
        std::int32_t in1 = -1;
        std::int64_t a0 = 0;
        std::int64_t a1 = 0;
        double s = 0.0;
        Shape bshape;
        Tensor val;
    };

    Tape() { nodes_.reserve(256); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor v);
    Var constant(Tensor v);
    Var constant_scalar(double v) { return constant(Tensor::scalar(v)); }

    const Tensor& val(Var v) const { return nodes_[v.id].val; }
    double scalar(Var v) const { return nodes_[v.id].val.scalar_value(); }
    std::size_t size() const { return nodes_.size(); }
    const Node& node(std::int32_t id) const { return nodes_[id]; }

    // Emits the backward pass for a scalar `loss` and returns the adjoint of
    // each requested node (a zero constant where no path exists). Adjoints are
    // themselves tape nodes, so they can be differentiated again.
    std::vector<Var> gradient_vars(Var loss, std::span<const Var> wrt);

    std::vector<Tensor> gradients(Var loss, std::span<const Var> wrt);

    Var emit(Op op, std::int32_t in0, std::int32_t in1, std::int64_t a0 = 0,
             std::int64_t a1 = 0, double s = 0.0, Shape bshape = Shape::scalar());

  private:
    Tensor evaluate(Node& n) const;
    std::vector<Node> nodes_;
};

// --- primitive operations ---------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double s);
Var add_const(Var a, double s);
Var matvec(Var m, Var v);
Var matmul(Var a, Var b);
Var outer(Var u, Var v);
Var transpose(Var m);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var softplus(Var a);
Var sum_all(Var a);
Var mean_all(Var a);
Var max_all(Var a);
Var maximum(Var a, Var b);
Var concat(Var a, Var b);
Var concat(std::span<const Var> parts);
Var slice(Var a, std::size_t off, std::size_t len);
Var pick(Var a, std::size_t idx);
Var broadcast(Var scalar, Shape target);
Var stop_gradient(Var a);

// --- composed helpers -------------------------------------------------------

inline Var dot(Var a, Var b) { return sum_all(mul(a, b)); }

// log sum_i exp(v_i) for a 1-D input, shifted by a detached max so that
// entries with magnitude up to ~1e300 cannot overflow.
Var logsumexp(Var v);

Var log_softmax(Var v);

// Sum over components of the diagonal-Gaussian log density of x.
Var gaussian_log_prob(Var x, Var mean, Var log_std);

// Raw twin of the tape form, same summation order.
double gaussian_log_prob(const Tensor& x, const Tensor& mean, const Tensor& log_std);

// Raw scalar twins of the elementwise sigmoid/softplus tape ops.
double sigmoid(double x);
double softplus(double x);

}  // namespace imit
