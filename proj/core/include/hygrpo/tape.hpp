#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hygrpo/math.hpp"

namespace hygrpo {

enum class Activation : std::uint8_t { kTanh, kIdentity, kSoftplus };

// Handle to a value recorded on a GradTape.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

// Vector-granular reverse-mode tape.
//
// Parameter leaves do not copy their values: they keep a span into the owning
// model and an offset into the flat parameter vector, so the model must
// outlive the tape and must not be modified while the tape is in use.
// backward() returns dloss/dtheta laid out like the model's flat vector.
class GradTape {
 public:
  explicit GradTape(std::size_t parameter_count)
      : parameter_count_(parameter_count) {}

  std::size_t parameter_count() const { return parameter_count_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Vector value);
  Var scalar(double value) { return constant(Vector{value}); }
  Var parameter(std::span<const double> values, std::size_t offset);

  // W x + b with W (rows x cols) and b taken from the parameter vector.
  // An empty `bias` span means no bias term.
  Var affine(std::span<const double> weight, std::size_t weight_offset,
             std::span<const double> bias, std::size_t bias_offset,
             std::size_t rows, std::size_t cols, Var x);
  Var activate(Var x, Activation act);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  Var add_n(std::span<const Var> items);
  Var mean(std::span<const Var> items);
  Var concat(std::span<const Var> items);
  Var sum(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var min(Var a, Var b);
  Var clip(Var a, double lo, double hi);

  Var log_softmax_at(Var logits, std::size_t index);
  // KL(softmax(logits) || softmax(ref_logits)).
  Var categorical_kl(Var logits, std::span<const double> ref_logits);
  // Diagonal Gaussian log density of a constant point.
  Var gaussian_logpdf(std::span<const double> x, Var mean, Var var);
  // KL(N(mean, var) || N(ref_mean, ref_var)), all diagonal.
  Var gaussian_kl(Var mean, Var var, std::span<const double> ref_mean,
                  std::span<const double> ref_var);

  const Vector& value(Var v) const { return nodes_.at(v.id).value; }
  double scalar_value(Var v) const;

  // Reverse accumulation from a scalar node. Throws ShapeError if `loss` is
  // not a scalar. The tape may be reused for further backward passes.
  Vector backward(Var loss) const;

 private:
  enum class Op : std::uint8_t {
    kConstant, kParameter, kAffine, kActivate, kAdd, kSub, kMul, kScale,
    kAddScalar, kAddN, kMean, kConcat, kSum, kExp, kLog, kMin, kClip,
    kLogSoftmaxAt, kCategoricalKl, kGaussianLogpdf, kGaussianKl,
  };

  struct Node {
    Op op = Op::kConstant;
    Activation act = Activation::kIdentity;
    std::uint32_t a = UINT32_MAX;
    std::uint32_t b = UINT32_MAX;
    std::uint32_t c = UINT32_MAX;
    std::vector<std::uint32_t> inputs;
    Vector value;
    Vector aux;   // constant operands or cached intermediates
    Vector aux2;
    std::span<const double> weight;
    std::span<const double> bias;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    double k0 = 0.0;
    double k1 = 0.0;
  };

  Var push(Node node);
  const Node& node(Var v) const;

  std::size_t parameter_count_;
  std::vector<Node> nodes_;
};

}  // namespace hygrpo
