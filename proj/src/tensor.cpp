#include "entangle/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace entangle {

namespace {
std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw std::invalid_argument("Tensor: zero-sized dimension");
    n *= d;
  }
  return n;
}
}  // namespace

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  std::size_t n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  std::size_t n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::vec(std::vector<double> values) {
  std::vector<std::size_t> shape{values.size()};
  return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (values.size() != rows * cols)
    throw std::invalid_argument("Tensor::matrix: value count does not match rows*cols");
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw std::logic_error("Tensor::rows: tensor is not rank-2");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw std::logic_error("Tensor::cols: tensor is not rank-2");
  return shape_[1];
}

double& Tensor::at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

double Tensor::at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::fill(double value) {
  for (double& v : data_) v = value;
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
  os << "]";
  return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const std::string& where) {
  if (!a.same_shape(b))
    throw std::invalid_argument(where + ": shape mismatch " + a.shape_string() + " vs " +
                                b.shape_string());
}

void require_vector(const Tensor& t, std::size_t dim, const std::string& where) {
  if (t.rank() != 1 || t.size() != dim)
    throw std::invalid_argument(where + ": expected vector of length " + std::to_string(dim) +
                                ", got " + t.shape_string());
}

}  // namespace entangle
