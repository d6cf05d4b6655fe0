#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "imit/core/error.hpp"

namespace imit {

// Extents of a dense tensor. Everything in this project is a scalar (rank 0),
// vector (rank 1) or matrix (rank 2); unused extents are kept at 1.
struct Shape {
    std::uint8_t rank = 0;
    std::size_t d0 = 1;
    std::size_t d1 = 1;

    static Shape scalar() { return {}; }
    static Shape vec(std::size_t n) { return {1, n, 1}; }
    static Shape mat(std::size_t r, std::size_t c) { return {2, r, c}; }

    std::size_t count() const { return rank == 0 ? 1 : (rank == 1 ? d0 : d0 * d1); }
    std::vector<std::size_t> extents() const {
        if (rank == 0) return {};
        if (rank == 1) return {d0};
        return {d0, d1};
    }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

// Dense 64-bit real tensor, row-major.
class Tensor {
  public:
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(s), data(s.count(), 0.0) {}
    Tensor(Shape s, std::vector<double> d) : shape(s), data(std::move(d)) {
        require(shape.count() == data.size(),
                "tensor: shape " + shape.str() + " does not match data length " +
                    std::to_string(data.size()));
    }

    static Tensor scalar(double v) { return Tensor(Shape::scalar(), {v}); }
    static Tensor zeros(Shape s) { return Tensor(s); }
    static Tensor full(Shape s, double v) {
        Tensor t(s);
        for (double& x : t.data) x = v;
        return t;
    }
    static Tensor vec(std::vector<double> v) {
        const std::size_t n = v.size();
        return Tensor(Shape::vec(n), std::move(v));
    }

    std::size_t size() const { return data.size(); }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }
    double& at(std::size_t r, std::size_t c) { return data[r * shape.d1 + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * shape.d1 + c]; }

    double scalar_value() const {
        require(shape.rank == 0, "tensor: scalar access on shape " + shape.str());
        return data[0];
    }

    bool all_finite() const {
        for (const double x : data)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

// Joins two vectors (either may be empty) into one.
Tensor concat_tensors(const Tensor& a, const Tensor& b);

}  // namespace imit
