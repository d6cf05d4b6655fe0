#include "imit/core/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace imit {

namespace {

const char* op_name(Tape::Op op) {
    switch (op) {
        case Tape::Op::kLeaf: return "leaf";
        case Tape::Op::kConst: return "const";
        case Tape::Op::kAdd: return "add";
        case Tape::Op::kSub: return "sub";
        case Tape::Op::kMul: return "mul";
        case Tape::Op::kDiv: return "div";
        case Tape::Op::kNeg: return "neg";
        case Tape::Op::kScale: return "scale";
        case Tape::Op::kAddConst: return "add_const";
        case Tape::Op::kMatVec: return "matvec";
        case Tape::Op::kMatMul: return "matmul";
        case Tape::Op::kOuter: return "outer";
        case Tape::Op::kTranspose: return "transpose";
        case Tape::Op::kTanh: return "tanh";
        case Tape::Op::kSigmoid: return "sigmoid";
        case Tape::Op::kExp: return "exp";
        case Tape::Op::kLog: return "log";
        case Tape::Op::kSoftplus: return "softplus";
        case Tape::Op::kSumAll: return "sum";
        case Tape::Op::kMeanAll: return "mean";
        case Tape::Op::kMaxAll: return "max";
        case Tape::Op::kMaximum: return "maximum";
        case Tape::Op::kConcat: return "concat";
        case Tape::Op::kSlice: return "slice";
        case Tape::Op::kScatterSlice: return "scatter_slice";
        case Tape::Op::kPick: return "pick";
        case Tape::Op::kScatterIndex: return "scatter_index";
        case Tape::Op::kBroadcast: return "broadcast";
        case Tape::Op::kStop: return "stop_gradient";
    }
    return "?";
}

}  // namespace

// Raw scalar twins of the elementwise tape ops; the tape evaluator calls these
// so differentiated and plain forward passes agree bit for bit.
double softplus(double x) {
    // log(1 + e^x) without overflow for large |x|.
    if (x > 30.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Var Tape::leaf(Tensor v) {
    nodes_.push_back(Node{Op::kLeaf, -1, -1, 0, 0, 0.0, Shape::scalar(), std::move(v)});
    return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor v) {
    nodes_.push_back(Node{Op::kConst, -1, -1, 0, 0, 0.0, Shape::scalar(), std::move(v)});
    return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::emit(Op op, std::int32_t in0, std::int32_t in1, std::int64_t a0,
               std::int64_t a1, double s, Shape bshape) {
    Node n{op, in0, in1, a0, a1, s, bshape, Tensor()};
    n.val = evaluate(n);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Tensor Tape::evaluate(Node& n) const {
    auto fail = [&](const std::string& what) -> Tensor {
        throw NumericalError("tape node " + std::to_string(nodes_.size()) + " (" +
                             op_name(n.op) + "): " + what);
    };
    auto in = [&](std::int32_t id) -> const Tensor& { return nodes_[id].val; };

    switch (n.op) {
        case Op::kLeaf:
        case Op::kConst:
            return n.val;

        case Op::kAdd:
        case Op::kSub:
        case Op::kMul:
        case Op::kDiv:
        case Op::kMaximum: {
            const Tensor& a = in(n.in0);
            const Tensor& b = in(n.in1);
            if (!(a.shape == b.shape))
                fail("shape mismatch " + a.shape.str() + " vs " + b.shape.str());
            Tensor out(a.shape);
            const std::size_t sz = a.size();
            for (std::size_t i = 0; i < sz; ++i) {
                switch (n.op) {
                    case Op::kAdd: out.data[i] = a.data[i] + b.data[i]; break;
                    case Op::kSub: out.data[i] = a.data[i] - b.data[i]; break;
                    case Op::kMul: out.data[i] = a.data[i] * b.data[i]; break;
                    case Op::kDiv: out.data[i] = a.data[i] / b.data[i]; break;
                    default: out.data[i] = std::max(a.data[i], b.data[i]); break;
                }
            }
            return out;
        }

        case Op::kNeg:
        case Op::kScale:
        case Op::kAddConst:
        case Op::kTanh:
        case Op::kSigmoid:
        case Op::kExp:
        case Op::kLog:
        case Op::kSoftplus:
        case Op::kStop: {
            const Tensor& a = in(n.in0);
            Tensor out(a.shape);
            const std::size_t sz = a.size();
            for (std::size_t i = 0; i < sz; ++i) {
                const double x = a.data[i];
                switch (n.op) {
                    case Op::kNeg: out.data[i] = -x; break;
                    case Op::kScale: out.data[i] = x * n.s; break;
                    case Op::kAddConst: out.data[i] = x + n.s; break;
                    case Op::kTanh: out.data[i] = std::tanh(x); break;
                    case Op::kSigmoid: out.data[i] = sigmoid(x); break;
                    case Op::kExp: out.data[i] = std::exp(x); break;
                    case Op::kLog: out.data[i] = std::log(x); break;
                    case Op::kSoftplus: out.data[i] = softplus(x); break;
                    default: out.data[i] = x; break;
                }
            }
            return out;
        }

        case Op::kMatVec: {
            const Tensor& m = in(n.in0);
            const Tensor& v = in(n.in1);
            if (m.shape.rank != 2 || v.shape.rank != 1 || m.shape.d1 != v.shape.d0)
                fail("expects (m,n)x(n), got " + m.shape.str() + " x " + v.shape.str());
            Tensor out(Shape::vec(m.shape.d0));
            const std::size_t rows = m.shape.d0, cols = m.shape.d1;
            for (std::size_t r = 0; r < rows; ++r) {
                double acc = 0.0;
                const double* mr = m.data.data() + r * cols;
                for (std::size_t c = 0; c < cols; ++c) acc += mr[c] * v.data[c];
                out.data[r] = acc;
            }
            return out;
        }

        case Op::kMatMul: {
            const Tensor& a = in(n.in0);
            const Tensor& b = in(n.in1);
            if (a.shape.rank != 2 || b.shape.rank != 2 || a.shape.d1 != b.shape.d0)
                fail("expects (m,n)x(n,p), got " + a.shape.str() + " x " + b.shape.str());
            const std::size_t m = a.shape.d0, k = a.shape.d1, p = b.shape.d1;
            Tensor out(Shape::mat(m, p));
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t c = 0; c < k; ++c) {
                    const double av = a.data[i * k + c];
                    const double* br = b.data.data() + c * p;
                    double* outr = out.data.data() + i * p;
                    for (std::size_t j = 0; j < p; ++j) outr[j] += av * br[j];
                }
            return out;
        }

        case Op::kOuter: {
            const Tensor& u = in(n.in0);
            const Tensor& v = in(n.in1);
            if (u.shape.rank != 1 || v.shape.rank != 1)
                fail("expects two vectors, got " + u.shape.str() + " x " + v.shape.str());
            Tensor out(Shape::mat(u.shape.d0, v.shape.d0));
            for (std::size_t i = 0; i < u.shape.d0; ++i)
                for (std::size_t j = 0; j < v.shape.d0; ++j)
                    out.data[i * v.shape.d0 + j] = u.data[i] * v.data[j];
            return out;
        }

        case Op::kTranspose: {
            const Tensor& a = in(n.in0);
            if (a.shape.rank != 2) fail("expects a matrix, got " + a.shape.str());
            Tensor out(Shape::mat(a.shape.d1, a.shape.d0));
            for (std::size_t i = 0; i < a.shape.d0; ++i)
                for (std::size_t j = 0; j < a.shape.d1; ++j)
                    out.data[j * a.shape.d0 + i] = a.data[i * a.shape.d1 + j];
            return out;
        }

        case Op::kSumAll:
        case Op::kMeanAll: {
            const Tensor& a = in(n.in0);
            if (n.op == Op::kMeanAll && a.size() == 0) fail("mean of empty tensor");
            double acc = 0.0;
            for (const double x : a.data) acc += x;
            if (n.op == Op::kMeanAll) acc /= static_cast<double>(a.size());
            return Tensor::scalar(acc);
        }

        case Op::kMaxAll: {
            const Tensor& a = in(n.in0);
            if (a.size() == 0) fail("max of empty tensor");
            std::size_t best = 0;
            for (std::size_t i = 1; i < a.size(); ++i)
                if (a.data[i] > a.data[best]) best = i;
            n.a0 = static_cast<std::int64_t>(best);
            return Tensor::scalar(a.data[best]);
        }

        case Op::kConcat: {
            const Tensor& a = in(n.in0);
            const Tensor& b = in(n.in1);
            if (a.shape.rank != 1 || b.shape.rank != 1)
                fail("expects two vectors, got " + a.shape.str() + " ++ " + b.shape.str());
            Tensor out(Shape::vec(a.shape.d0 + b.shape.d0));
            std::copy(a.data.begin(), a.data.end(), out.data.begin());
            std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.shape.d0);
            return out;
        }

        case Op::kSlice: {
            const Tensor& a = in(n.in0);
            const auto off = static_cast<std::size_t>(n.a0);
            const auto len = static_cast<std::size_t>(n.a1);
            if (a.shape.rank != 1 || off + len > a.shape.d0)
                fail("slice [" + std::to_string(off) + "," + std::to_string(off + len) +
                     ") out of " + a.shape.str());
            Tensor out(Shape::vec(len));
            std::copy(a.data.begin() + off, a.data.begin() + off + len, out.data.begin());
            return out;
        }

        case Op::kScatterSlice: {
            const Tensor& a = in(n.in0);
            const auto off = static_cast<std::size_t>(n.a0);
            const auto total = static_cast<std::size_t>(n.a1);
            if (a.shape.rank != 1 || off + a.shape.d0 > total)
                fail("scatter of " + a.shape.str() + " at " + std::to_string(off) +
                     " into length " + std::to_string(total));
            Tensor out(Shape::vec(total));
            std::copy(a.data.begin(), a.data.end(), out.data.begin() + off);
            return out;
        }

        case Op::kPick: {
            const Tensor& a = in(n.in0);
            const auto idx = static_cast<std::size_t>(n.a0);
            if (a.shape.rank != 1 || idx >= a.shape.d0)
                fail("index " + std::to_string(idx) + " out of " + a.shape.str());
            return Tensor::scalar(a.data[idx]);
        }

        case Op::kScatterIndex: {
            const Tensor& a = in(n.in0);
            const auto idx = static_cast<std::size_t>(n.a0);
            const auto total = static_cast<std::size_t>(n.a1);
            if (a.shape.rank != 0 || idx >= total)
                fail("scalar scatter to index " + std::to_string(idx) + " of length " +
                     std::to_string(total));
            Tensor out(Shape::vec(total));
            out.data[idx] = a.data[0];
            return out;
        }

        case Op::kBroadcast: {
            const Tensor& a = in(n.in0);
            if (a.shape.rank != 0) fail("expects a scalar, got " + a.shape.str());
            return Tensor::full(n.bshape, a.data[0]);
        }
    }
    return Tensor();
}

std::vector<Var> Tape::gradient_vars(Var loss, std::span<const Var> wrt) {
    require(loss.tape == this, "gradient: loss from a different tape");
    require(nodes_[loss.id].val.shape.rank == 0, "gradient: loss must be a scalar");

    // Adjoint node id per node, -1 where no gradient has been accumulated.
    // Only nodes at or below the loss can influence it.
    std::vector<std::int32_t> adj(static_cast<std::size_t>(loss.id) + 1, -1);
    adj[loss.id] = constant_scalar(1.0).id;

    auto bump = [&](std::int32_t target, Var contrib) {
        if (adj[target] < 0) {
            adj[target] = contrib.id;
        } else {
            adj[target] = add(Var{this, adj[target]}, contrib).id;
        }
    };

    for (std::int32_t id = loss.id; id >= 0; --id) {
        if (adj[id] < 0) continue;
        // Copy the header: emitting contributions reallocates nodes_.
        const Op op = nodes_[id].op;
        const std::int32_t in0 = nodes_[id].in0;
        const std::int32_t in1 = nodes_[id].in1;
        const std::int64_t a0 = nodes_[id].a0;
        const double s = nodes_[id].s;
        const Var g{this, adj[id]};
        const Var y{this, id};
        const Var x0{this, in0};
        const Var x1{this, in1};

        switch (op) {
            case Op::kLeaf:
            case Op::kConst:
            case Op::kStop:
                break;
            case Op::kAdd:
                bump(in0, g);
                bump(in1, g);
                break;
            case Op::kSub:
                bump(in0, g);
                bump(in1, neg(g));
                break;
            case Op::kMul:
                bump(in0, mul(g, x1));
                bump(in1, mul(g, x0));
                break;
            case Op::kDiv:
                bump(in0, div(g, x1));
                bump(in1, neg(mul(g, div(y, x1))));
                break;
            case Op::kNeg:
                bump(in0, neg(g));
                break;
            case Op::kScale:
                bump(in0, scale(g, s));
                break;
            case Op::kAddConst:
                bump(in0, g);
                break;
            case Op::kMatVec:
                bump(in0, outer(g, x1));
                bump(in1, matvec(transpose(x0), g));
                break;
            case Op::kMatMul:
                bump(in0, matmul(g, transpose(x1)));
                bump(in1, matmul(transpose(x0), g));
                break;
            case Op::kOuter:
                bump(in0, matvec(g, x1));
                bump(in1, matvec(transpose(g), x0));
                break;
            case Op::kTranspose:
                bump(in0, transpose(g));
                break;
            case Op::kTanh: {
                Var ones = constant(Tensor::full(nodes_[id].val.shape, 1.0));
                bump(in0, mul(g, sub(ones, mul(y, y))));
                break;
            }
            case Op::kSigmoid: {
                Var ones = constant(Tensor::full(nodes_[id].val.shape, 1.0));
                bump(in0, mul(g, mul(y, sub(ones, y))));
                break;
            }
            case Op::kExp:
                bump(in0, mul(g, y));
                break;
            case Op::kLog:
                bump(in0, div(g, x0));
                break;
            case Op::kSoftplus:
                bump(in0, mul(g, sigmoid(x0)));
                break;
            case Op::kSumAll:
                bump(in0, broadcast(g, nodes_[in0].val.shape));
                break;
            case Op::kMeanAll:
                bump(in0, broadcast(scale(g, 1.0 / static_cast<double>(
                                                    nodes_[in0].val.size())),
                                    nodes_[in0].val.shape));
                break;
            case Op::kMaxAll:
                bump(in0, emit(Op::kScatterIndex, adj[id], -1, a0,
                               static_cast<std::int64_t>(nodes_[in0].val.size())));
                break;
            case Op::kMaximum: {
                const Tensor& a = nodes_[in0].val;
                const Tensor& b = nodes_[in1].val;
                Tensor m0(a.shape), m1(a.shape);
                for (std::size_t i = 0; i < a.size(); ++i) {
                    m0.data[i] = a.data[i] >= b.data[i] ? 1.0 : 0.0;
                    m1.data[i] = 1.0 - m0.data[i];
                }
                bump(in0, mul(g, constant(std::move(m0))));
                bump(in1, mul(g, constant(std::move(m1))));
                break;
            }
            case Op::kConcat: {
                const std::size_t la = nodes_[in0].val.shape.d0;
                const std::size_t lb = nodes_[in1].val.shape.d0;
                if (la > 0) bump(in0, slice(g, 0, la));
                if (lb > 0) bump(in1, slice(g, la, lb));
                break;
            }
            case Op::kSlice:
                bump(in0, emit(Op::kScatterSlice, adj[id], -1, a0,
                               static_cast<std::int64_t>(nodes_[in0].val.size())));
                break;
            case Op::kScatterSlice:
                bump(in0, slice(g, static_cast<std::size_t>(a0),
                                nodes_[in0].val.size()));
                break;
            case Op::kPick:
                bump(in0, emit(Op::kScatterIndex, adj[id], -1, a0,
                               static_cast<std::int64_t>(nodes_[in0].val.size())));
                break;
            case Op::kScatterIndex:
                bump(in0, pick(g, static_cast<std::size_t>(a0)));
                break;
            case Op::kBroadcast:
                bump(in0, sum_all(g));
                break;
        }
    }

    std::vector<Var> out;
    out.reserve(wrt.size());
    for (const Var w : wrt) {
        require(w.tape == this, "gradient: wrt var from a different tape");
        if (w.id <= loss.id && adj[w.id] >= 0) {
            out.push_back(Var{this, adj[w.id]});
        } else {
            out.push_back(constant(Tensor::zeros(nodes_[w.id].val.shape)));
        }
    }
    return out;
}

std::vector<Tensor> Tape::gradients(Var loss, std::span<const Var> wrt) {
    std::vector<Tensor> out;
    const std::vector<Var> vars = gradient_vars(loss, wrt);
    out.reserve(vars.size());
    for (const Var v : vars) out.push_back(val(v));
    return out;
}

// --- free functions ----------------------------------------------------------

namespace {
Tape& same_tape(Var a, Var b) {
    require(a.tape != nullptr && a.tape == b.tape, "tape op: operands on different tapes");
    return *a.tape;
}
}  // namespace

Var add(Var a, Var b) { return same_tape(a, b).emit(Tape::Op::kAdd, a.id, b.id); }
Var sub(Var a, Var b) { return same_tape(a, b).emit(Tape::Op::kSub, a.id, b.id); }
Var mul(Var a, Var b) { return same_tape(a, b).emit(Tape::Op::kMul, a.id, b.id); }
Var div(Var a, Var b) { return same_tape(a, b).emit(Tape::Op::kDiv, a.id, b.id); }
Var neg(Var a) { return a.tape->emit(Tape::Op::kNeg, a.id, -1); }
Var scale(Var a, double s) { return a.tape->emit(Tape::Op::kScale, a.id, -1, 0, 0, s); }
Var add_const(Var a, double s) { return a.tape->emit(Tape::Op::kAddConst, a.id, -1, 0, 0, s); }
Var matvec(Var m, Var v) { return same_tape(m, v).emit(Tape::Op::kMatVec, m.id, v.id); }
Var matmul(Var a, Var b) { return same_tape(a, b).emit(Tape::Op::kMatMul, a.id, b.id); }
Var outer(Var u, Var v) { return same_tape(u, v).emit(Tape::Op::kOuter, u.id, v.id); }
Var transpose(Var m) { return m.tape->emit(Tape::Op::kTranspose, m.id, -1); }
Var tanh(Var a) { return a.tape->emit(Tape::Op::kTanh, a.id, -1); }
Var sigmoid(Var a) { return a.tape->emit(Tape::Op::kSigmoid, a.id, -1); }
Var exp(Var a) { return a.tape->emit(Tape::Op::kExp, a.id, -1); }
Var log(Var a) { return a.tape->emit(Tape::Op::kLog, a.id, -1); }
Var softplus(Var a) { return a.tape->emit(Tape::Op::kSoftplus, a.id, -1); }
Var sum_all(Var a) { return a.tape->emit(Tape::Op::kSumAll, a.id, -1); }
Var mean_all(Var a) { return a.tape->emit(Tape::Op::kMeanAll, a.id, -1); }
Var max_all(Var a) { return a.tape->emit(Tape::Op::kMaxAll, a.id, -1); }
Var maximum(Var a, Var b) { return same_tape(a, b).emit(Tape::Op::kMaximum, a.id, b.id); }
Var concat(Var a, Var b) { return same_tape(a, b).emit(Tape::Op::kConcat, a.id, b.id); }

Var concat(std::span<const Var> parts) {
    require(!parts.empty(), "concat: no parts");
    Var acc = parts[0];
    for (std::size_t i = 1; i < parts.size(); ++i) acc = concat(acc, parts[i]);
    return acc;
}

Var slice(Var a, std::size_t off, std::size_t len) {
    return a.tape->emit(Tape::Op::kSlice, a.id, -1, static_cast<std::int64_t>(off),
                        static_cast<std::int64_t>(len));
}

Var pick(Var a, std::size_t idx) {
    return a.tape->emit(Tape::Op::kPick, a.id, -1, static_cast<std::int64_t>(idx));
}

Var broadcast(Var scalar, Shape target) {
    return scalar.tape->emit(Tape::Op::kBroadcast, scalar.id, -1, 0, 0, 0.0, target);
}

Var stop_gradient(Var a) { return a.tape->emit(Tape::Op::kStop, a.id, -1); }

Var logsumexp(Var v) {
    Tape& t = *v.tape;
    require(t.val(v).shape.rank == 1 && t.val(v).size() > 0,
            "logsumexp: expects a non-empty vector, got " + t.val(v).shape.str());
    // The shift is detached; the gradient is exact either way and this keeps
    // the max kink out of the differentiated path.
    Var m = stop_gradient(max_all(v));
    Var shifted = sub(v, broadcast(m, t.val(v).shape));
    return add(m, log(sum_all(exp(shifted))));
}

Var log_softmax(Var v) {
    // Copy the shape before logsumexp emits nodes: emission may reallocate the
    // node array and invalidate references returned by val().
    const Shape shape = v.tape->val(v).shape;
    return sub(v, broadcast(logsumexp(v), shape));
}

Var gaussian_log_prob(Var x, Var mean, Var log_std) {
    constexpr double kHalfLog2Pi = 0.9189385332046727;  // log(2*pi)/2
    Tape& t = *x.tape;
    const Shape shape = t.val(x).shape;
    require(shape == t.val(mean).shape && shape == t.val(log_std).shape,
            "gaussian_log_prob: shape mismatch");
    Var z = mul(sub(x, mean), exp(neg(log_std)));
    Var per = sub(neg(log_std), add_const(scale(mul(z, z), 0.5), kHalfLog2Pi));
    return sum_all(per);
}

double gaussian_log_prob(const Tensor& x, const Tensor& mean, const Tensor& log_std) {
    constexpr double kHalfLog2Pi = 0.9189385332046727;
    require(x.shape == mean.shape && x.shape == log_std.shape,
            "gaussian_log_prob: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double z = (x.data[i] - mean.data[i]) * std::exp(-log_std.data[i]);
        acc += -log_std.data[i] - (0.5 * z * z + kHalfLog2Pi);
    }
    return acc;
}

}  // namespace imit
