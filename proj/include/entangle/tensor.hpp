#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace entangle {

/// Dense rank-1/2 array of doubles, row-major flat storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  /// Rank-1 tensor from explicit values.
  static Tensor vec(std::vector<double> values);
  /// Rank-2 tensor from row-major values; values.size() must equal rows*cols.
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  void fill(double value);

  std::string shape_string() const;

 private:
  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {}

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// Throws std::invalid_argument mentioning `where` if shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const std::string& where);
/// Throws std::invalid_argument if t is not rank-1 of length `dim`.
void require_vector(const Tensor& t, std::size_t dim, const std::string& where);

}  // namespace entangle
