#include "sdn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sdn {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e == 0) throw InvalidInput("tensor shape has a zero extent");
        n *= e;
    }
    return n;
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
        throw InvalidInput("tensor data length does not match shape (" +
                           std::to_string(data_.size()) + " values)");
    }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::vector(std::vector<double> values) {
    std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return Tensor({rows, cols}, std::move(data));
}

std::size_t Tensor::extent(std::size_t axis) const {
    if (axis >= shape_.size()) throw InvalidInput("tensor axis out of range");
    return shape_[axis];
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw InvalidInput("rows() requires a rank-2 tensor");
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw InvalidInput("cols() requires a rank-2 tensor");
    return shape_[1];
}

double& Tensor::at(std::size_t i, std::size_t j) {
    return data_[i * cols() + j];
}

double Tensor::at(std::size_t i, std::size_t j) const {
    return data_[i * cols() + j];
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
}

void Tensor::ensure_finite(const char* context) const {
    if (!all_finite()) {
        throw EvaluationError(std::string(context) + ": non-finite tensor entry");
    }
}

Tensor& Tensor::operator+=(const Tensor& other) {
    if (!same_shape(other)) throw InvalidInput("tensor shape mismatch in +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double factor) {
    for (double& v : data_) v *= factor;
    return *this;
}

void Tensor::fill(double value) {
    std::fill(data_.begin(), data_.end(), value);
}

double Tensor::sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace sdn
