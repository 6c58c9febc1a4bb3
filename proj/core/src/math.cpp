#include "hygrpo/math.hpp"

#include <algorithm>
#include <limits>

namespace hygrpo {

Vector operator+(const Vector& a, const Vector& b) {
  require_same_size(a.size(), b.size(), "vector add");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Vector operator-(const Vector& a, const Vector& b) {
  require_same_size(a.size(), b.size(), "vector sub");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vector operator*(double s, const Vector& a) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
  return out;
}

Vector hadamard(const Vector& a, const Vector& b) {
  require_same_size(a.size(), b.size(), "hadamard");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double sum(std::span<const double> a) {
  double s = 0.0;
  for (double x : a) s += x;
  return s;
}

Vector normalized(std::span<const double> a) {
  const double n = norm(a);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw ContractViolation("normalized: zero or non-finite norm");
  }
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] / n;
  return out;
}

Vector concat(std::initializer_list<std::span<const double>> parts) {
  std::vector<double> out;
  for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
  return Vector(std::move(out));
}

void affine_into(std::span<const double> weight, std::span<const double> bias,
                 std::size_t rows, std::size_t cols,
                 std::span<const double> x, std::span<double> y) {
  require_same_size(weight.size(), rows * cols, "affine weight");
  require_same_size(x.size(), cols, "affine input");
  require_same_size(y.size(), rows, "affine output");
  if (!bias.empty()) require_same_size(bias.size(), rows, "affine bias");
  for (std::size_t r = 0; r < rows; ++r) {
    const double* w = weight.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += w[c] * x[c];
    y[r] = bias.empty() ? acc : acc + bias[r];
  }
}

Vector matvec(const Matrix& w, std::span<const double> x) {
  Vector y(w.rows());
  affine_into(w.span(), {}, w.rows(), w.cols(), x, y.span());
  return y;
}

Vector transpose_matvec(const Matrix& w, std::span<const double> x) {
  require_same_size(x.size(), w.rows(), "transpose matvec");
  Vector y(w.cols());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    for (std::size_t c = 0; c < w.cols(); ++c) y[c] += w(r, c) * x[r];
  }
  return y;
}

void mean_into(std::span<const std::span<const double>> items,
               std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (items.empty()) return;
  for (auto item : items) {
    require_same_size(item.size(), out.size(), "mean");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += item[i];
  }
  const double n = static_cast<double>(items.size());
  for (double& v : out) v /= n;
}

double softmax_logprob(std::span<const double> logits, std::size_t index) {
  if (index >= logits.size()) {
    throw ShapeError("softmax_logprob: index " + std::to_string(index) +
                     " out of range " + std::to_string(logits.size()));
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  return logits[index] - m - std::log(z);
}

Vector log_softmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("log_softmax: empty logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  const double lse = m + std::log(z);
  Vector out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

Vector softmax(std::span<const double> logits) {
  Vector out = log_softmax(logits);
  for (double& v : out) v = std::exp(v);
  return out;
}

std::size_t column_rank(const Matrix& m, double tol) {
  std::vector<Vector> basis;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    Vector col(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) col[r] = m(r, c);
    // Two passes of modified Gram-Schmidt.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis) {
        const double p = dot(col, b);
        for (std::size_t r = 0; r < col.size(); ++r) col[r] -= p * b[r];
      }
    }
    const double n = norm(col);
    if (n > tol) basis.push_back((1.0 / n) * col);
  }
  return basis.size();
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace hygrpo
