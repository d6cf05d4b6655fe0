#include "imit/core/tensor.hpp"

namespace imit {

std::string Shape::str() const {
    if (rank == 0) return "[]";
    if (rank == 1) return "[" + std::to_string(d0) + "]";
    return "[" + std::to_string(d0) + "," + std::to_string(d1) + "]";
}

Tensor concat_tensors(const Tensor& a, const Tensor& b) {
    require(a.shape.rank == 1 && b.shape.rank == 1, "concat_tensors: expects vectors");
    Tensor out(Shape::vec(a.data.size() + b.data.size()));
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
}

}  // namespace imit
