#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "hygrpo/error.hpp"

namespace hygrpo {

// Dense real vector. Binary operations require equal sizes; nothing broadcasts.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t size, double fill = 0.0) : data_(size, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}
  explicit Vector(std::span<const double> values)
      : data_(values.begin(), values.end()) {}

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  operator std::span<const double>() const { return data_; }

  const std::vector<double>& values() const { return data_; }

  bool operator==(const Vector&) const = default;

 private:
  std::vector<double> data_;
};

// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return std::span<double>(data_).subspan(r * cols_, cols_);
  }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": size " + std::to_string(a) +
                     " vs " + std::to_string(b));
  }
}

Vector operator+(const Vector& a, const Vector& b);
Vector operator-(const Vector& a, const Vector& b);
Vector operator*(double s, const Vector& a);
Vector hadamard(const Vector& a, const Vector& b);
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double sum(std::span<const double> a);
// Unit vector in the direction of `a`; throws ContractViolation on zero norm.
Vector normalized(std::span<const double> a);
Vector concat(std::initializer_list<std::span<const double>> parts);

// y = W x (+ b). `weight` is row-major rows x cols. Shared by the plain and
// taped forward passes so both produce bit-identical values.
void affine_into(std::span<const double> weight, std::span<const double> bias,
                 std::size_t rows, std::size_t cols,
                 std::span<const double> x, std::span<double> y);
Vector matvec(const Matrix& w, std::span<const double> x);
Vector transpose_matvec(const Matrix& w, std::span<const double> x);

// Elementwise mean of equally sized vectors, summed in order then divided.
void mean_into(std::span<const std::span<const double>> items,
               std::span<double> out);

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log softmax(logits)[index] with max-subtraction.
double softmax_logprob(std::span<const double> logits, std::size_t index);
Vector log_softmax(std::span<const double> logits);
Vector softmax(std::span<const double> logits);

// Rank of a matrix via Gram-Schmidt with the given tolerance.
std::size_t column_rank(const Matrix& m, double tol = 1e-10);

bool all_finite(std::span<const double> v);

}  // namespace hygrpo
