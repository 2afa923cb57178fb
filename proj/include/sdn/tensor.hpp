#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "sdn/errors.hpp"

namespace sdn {

// Dense row-major tensor of 64-bit reals. Immutable-by-convention value type:
// library code never mutates a tensor it did not create.
class Tensor {
public:
    Tensor() = default;

    // Zero-filled tensor of the given extents.
    explicit Tensor(std::vector<std::size_t> shape);

    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double value);
    // 1-D tensor from a list of values.
    static Tensor vector(std::vector<double> values);
    // 2-D tensor from row-major data.
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const;

    // Rank-2 accessors.
    std::size_t rows() const;
    std::size_t cols() const;
    double& at(std::size_t i, std::size_t j);
    double at(std::size_t i, std::size_t j) const;

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& values() const { return data_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    // Throws EvaluationError naming `context` if any entry is NaN or Inf.
    void ensure_finite(const char* context) const;

    // In-place arithmetic used by optimizers and accumulators.
    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(double factor);
    void fill(double value);

    double sum() const;
    double max_abs() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);

}  // namespace sdn
