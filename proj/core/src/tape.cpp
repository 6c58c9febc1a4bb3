#include "hygrpo/tape.hpp"

#include <algorithm>
#include <numbers>
#include <string>

namespace hygrpo {

namespace {

double apply_activation(double x, Activation act) {
  switch (act) {
    case Activation::kTanh:
      return std::tanh(x);
    case Activation::kSoftplus:
      return softplus(x);
    case Activation::kIdentity:
      break;
  }
  return x;
}

void check_positive(std::span<const double> var, const char* what) {
  for (double v : var) {
    if (!(v > 0.0)) {
      throw ContractViolation(std::string(what) + ": non-positive variance");
    }
  }
}

}  // namespace

Var GradTape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const GradTape::Node& GradTape::node(Var v) const {
  if (v.id >= nodes_.size()) throw ContractViolation("tape: invalid Var");
  return nodes_[v.id];
}

double GradTape::scalar_value(Var v) const {
  const Vector& val = node(v).value;
  if (val.size() != 1) {
    throw ShapeError("tape: expected scalar, got size " +
                     std::to_string(val.size()));
  }
  return val[0];
}

Var GradTape::constant(Vector value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var GradTape::parameter(std::span<const double> values, std::size_t offset) {
  if (offset + values.size() > parameter_count_) {
    throw ShapeError("tape: parameter slice exceeds parameter count");
  }
  Node n;
  n.op = Op::kParameter;
  n.value = Vector(values);
  n.weight_offset = offset;
  return push(std::move(n));
}

Var GradTape::affine(std::span<const double> weight, std::size_t weight_offset,
                     std::span<const double> bias, std::size_t bias_offset,
                     std::size_t rows, std::size_t cols, Var x) {
  if (weight_offset + weight.size() > parameter_count_ ||
      (!bias.empty() && bias_offset + bias.size() > parameter_count_)) {
    throw ShapeError("tape: affine parameters exceed parameter count");
  }
  Node n;
  n.op = Op::kAffine;
  n.a = x.id;
  n.weight = weight;
  n.bias = bias;
  n.weight_offset = weight_offset;
  n.bias_offset = bias_offset;
  n.rows = rows;
  n.cols = cols;
  n.value = Vector(rows);
  affine_into(weight, bias, rows, cols, node(x).value, n.value.span());
  return push(std::move(n));
}

Var GradTape::activate(Var x, Activation act) {
  Node n;
  n.op = Op::kActivate;
  n.act = act;
  n.a = x.id;
  const Vector& in = node(x).value;
  n.value = Vector(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    n.value[i] = apply_activation(in[i], act);
  }
  return push(std::move(n));
}

Var GradTape::add(Var a, Var b) {
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.value = node(a).value + node(b).value;
  return push(std::move(n));
}

Var GradTape::sub(Var a, Var b) {
  Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.value = node(a).value - node(b).value;
  return push(std::move(n));
}

Var GradTape::mul(Var a, Var b) {
  Node n;
  n.op = Op::kMul;
  n.a = a.id;
  n.b = b.id;
  n.value = hadamard(node(a).value, node(b).value);
  return push(std::move(n));
}

Var GradTape::scale(Var a, double s) {
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.k0 = s;
  n.value = s * node(a).value;
  return push(std::move(n));
}

Var GradTape::add_scalar(Var a, double s) {
  Node n;
  n.op = Op::kAddScalar;
  n.a = a.id;
  n.value = node(a).value;
  for (double& v : n.value) v += s;
  return push(std::move(n));
}

Var GradTape::add_n(std::span<const Var> items) {
  if (items.empty()) throw ShapeError("tape: add_n of nothing");
  Node n;
  n.op = Op::kAddN;
  n.value = Vector(node(items[0]).value.size());
  for (Var v : items) {
    const Vector& x = node(v).value;
    require_same_size(x.size(), n.value.size(), "tape add_n");
    for (std::size_t i = 0; i < x.size(); ++i) n.value[i] += x[i];
    n.inputs.push_back(v.id);
  }
  return push(std::move(n));
}

Var GradTape::mean(std::span<const Var> items) {
  if (items.empty()) throw ShapeError("tape: mean of nothing");
  Node n;
  n.op = Op::kMean;
  std::vector<std::span<const double>> spans;
  spans.reserve(items.size());
  for (Var v : items) {
    spans.push_back(node(v).value.span());
    n.inputs.push_back(v.id);
  }
  n.value = Vector(spans.front().size());
  mean_into(spans, n.value.span());
  return push(std::move(n));
}

Var GradTape::concat(std::span<const Var> items) {
  Node n;
  n.op = Op::kConcat;
  std::vector<double> out;
  for (Var v : items) {
    const Vector& x = node(v).value;
    out.insert(out.end(), x.begin(), x.end());
    n.inputs.push_back(v.id);
  }
  n.value = Vector(std::move(out));
  return push(std::move(n));
}

Var GradTape::sum(Var a) {
  Node n;
  n.op = Op::kSum;
  n.a = a.id;
  n.value = Vector{hygrpo::sum(node(a).value)};
  return push(std::move(n));
}

Var GradTape::exp(Var a) {
  Node n;
  n.op = Op::kExp;
  n.a = a.id;
  n.value = node(a).value;
  for (double& v : n.value) v = std::exp(v);
  return push(std::move(n));
}

Var GradTape::log(Var a) {
  Node n;
  n.op = Op::kLog;
  n.a = a.id;
  n.value = node(a).value;
  for (double& v : n.value) v = std::log(v);
  return push(std::move(n));
}

Var GradTape::min(Var a, Var b) {
  Node n;
  n.op = Op::kMin;
  n.a = a.id;
  n.b = b.id;
  const Vector& x = node(a).value;
  const Vector& y = node(b).value;
  require_same_size(x.size(), y.size(), "tape min");
  n.value = Vector(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = std::min(x[i], y[i]);
  return push(std::move(n));
}

Var GradTape::clip(Var a, double lo, double hi) {
  Node n;
  n.op = Op::kClip;
  n.a = a.id;
  n.k0 = lo;
  n.k1 = hi;
  n.value = node(a).value;
  for (double& v : n.value) v = std::clamp(v, lo, hi);
  return push(std::move(n));
}

Var GradTape::log_softmax_at(Var logits, std::size_t index) {
  Node n;
  n.op = Op::kLogSoftmaxAt;
  n.a = logits.id;
  n.rows = index;
  const Vector& l = node(logits).value;
  n.value = Vector{softmax_logprob(l, index)};
  n.aux = softmax(l);
  return push(std::move(n));
}

Var GradTape::categorical_kl(Var logits, std::span<const double> ref_logits) {
  Node n;
  n.op = Op::kCategoricalKl;
  n.a = logits.id;
  const Vector& l = node(logits).value;
  require_same_size(l.size(), ref_logits.size(), "categorical_kl");
  const Vector lp = log_softmax(l);
  const Vector lq = log_softmax(ref_logits);
  n.aux = Vector(l.size());    // p
  n.aux2 = Vector(l.size());   // log p - log q
  double kl = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    n.aux[i] = std::exp(lp[i]);
    n.aux2[i] = lp[i] - lq[i];
    kl += n.aux[i] * n.aux2[i];
  }
  n.value = Vector{kl};
  return push(std::move(n));
}

Var GradTape::gaussian_logpdf(std::span<const double> x, Var mean, Var var) {
  Node n;
  n.op = Op::kGaussianLogpdf;
  n.a = mean.id;
  n.b = var.id;
  const Vector& mu = node(mean).value;
  const Vector& v = node(var).value;
  require_same_size(x.size(), mu.size(), "gaussian_logpdf mean");
  require_same_size(x.size(), v.size(), "gaussian_logpdf var");
  check_positive(v, "gaussian_logpdf");
  n.aux = Vector(x);
  double acc = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double diff = x[d] - mu[d];
    acc += std::log(2.0 * std::numbers::pi * v[d]) + diff * diff / v[d];
  }
  n.value = Vector{-0.5 * acc};
  return push(std::move(n));
}

Var GradTape::gaussian_kl(Var mean, Var var, std::span<const double> ref_mean,
                          std::span<const double> ref_var) {
  Node n;
  n.op = Op::kGaussianKl;
  n.a = mean.id;
  n.b = var.id;
  const Vector& mu = node(mean).value;
  const Vector& v = node(var).value;
  require_same_size(mu.size(), ref_mean.size(), "gaussian_kl mean");
  require_same_size(v.size(), ref_var.size(), "gaussian_kl var");
  require_same_size(mu.size(), v.size(), "gaussian_kl");
  check_positive(v, "gaussian_kl");
  check_positive(ref_var, "gaussian_kl reference");
  n.aux = Vector(ref_mean);
  n.aux2 = Vector(ref_var);
  double acc = 0.0;
  for (std::size_t d = 0; d < mu.size(); ++d) {
    const double diff = mu[d] - ref_mean[d];
    acc += v[d] / ref_var[d] + diff * diff / ref_var[d] - 1.0 +
           std::log(ref_var[d] / v[d]);
  }
  n.value = Vector{0.5 * acc};
  return push(std::move(n));
}

Vector GradTape::backward(Var loss) const {
  const Node& root = node(loss);
  if (root.value.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got size " +
                     std::to_string(root.value.size()));
  }
  Vector out(parameter_count_);
  std::vector<Vector> grads(loss.id + 1);
  grads[loss.id] = Vector{1.0};

  auto accumulate = [&](std::uint32_t id, std::size_t i, double g) {
    Vector& dst = grads[id];
    if (dst.empty()) dst = Vector(nodes_[id].value.size());
    dst[i] += g;
  };

  for (std::size_t idx = loss.id + 1; idx-- > 0;) {
    const Vector& g = grads[idx];
    if (g.empty()) continue;
    const Node& n = nodes_[idx];
    switch (n.op) {
      case Op::kConstant:
        break;
      case Op::kParameter:
        for (std::size_t i = 0; i < g.size(); ++i) out[n.weight_offset + i] += g[i];
        break;
      case Op::kAffine: {
        const Vector& x = nodes_[n.a].value;
        for (std::size_t r = 0; r < n.rows; ++r) {
          const double gr = g[r];
          if (gr == 0.0) continue;
          double* gw = out.data() + n.weight_offset + r * n.cols;
          const double* w = n.weight.data() + r * n.cols;
          for (std::size_t c = 0; c < n.cols; ++c) {
            gw[c] += gr * x[c];
            accumulate(n.a, c, gr * w[c]);
          }
          if (!n.bias.empty()) out[n.bias_offset + r] += gr;
        }
        break;
      }
      case Op::kActivate: {
        const Vector& x = nodes_[n.a].value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          double d = 1.0;
          if (n.act == Activation::kTanh) {
            d = 1.0 - n.value[i] * n.value[i];
          } else if (n.act == Activation::kSoftplus) {
            d = sigmoid(x[i]);
          }
          accumulate(n.a, i, g[i] * d);
        }
        break;
      }
      case Op::kAdd:
        for (std::size_t i = 0; i < g.size(); ++i) {
          accumulate(n.a, i, g[i]);
          accumulate(n.b, i, g[i]);
        }
        break;
      case Op::kSub:
        for (std::size_t i = 0; i < g.size(); ++i) {
          accumulate(n.a, i, g[i]);
          accumulate(n.b, i, -g[i]);
        }
        break;
      case Op::kMul: {
        const Vector& x = nodes_[n.a].value;
        const Vector& y = nodes_[n.b].value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          accumulate(n.a, i, g[i] * y[i]);
          accumulate(n.b, i, g[i] * x[i]);
        }
        break;
      }
      case Op::kScale:
        for (std::size_t i = 0; i < g.size(); ++i) accumulate(n.a, i, g[i] * n.k0);
        break;
      case Op::kAddScalar:
        for (std::size_t i = 0; i < g.size(); ++i) accumulate(n.a, i, g[i]);
        break;
      case Op::kAddN:
        for (std::uint32_t in : n.inputs) {
          for (std::size_t i = 0; i < g.size(); ++i) accumulate(in, i, g[i]);
        }
        break;
      case Op::kMean: {
        const double inv = 1.0 / static_cast<double>(n.inputs.size());
        for (std::uint32_t in : n.inputs) {
          for (std::size_t i = 0; i < g.size(); ++i) accumulate(in, i, g[i] * inv);
        }
        break;
      }
      case Op::kConcat: {
        std::size_t pos = 0;
        for (std::uint32_t in : n.inputs) {
          const std::size_t len = nodes_[in].value.size();
          for (std::size_t i = 0; i < len; ++i) accumulate(in, i, g[pos + i]);
          pos += len;
        }
        break;
      }
      case Op::kSum: {
        const std::size_t len = nodes_[n.a].value.size();
        for (std::size_t i = 0; i < len; ++i) accumulate(n.a, i, g[0]);
        break;
      }
      case Op::kExp:
        for (std::size_t i = 0; i < g.size(); ++i) accumulate(n.a, i, g[i] * n.value[i]);
        break;
      case Op::kLog: {
        const Vector& x = nodes_[n.a].value;
        for (std::size_t i = 0; i < g.size(); ++i) accumulate(n.a, i, g[i] / x[i]);
        break;
      }
      case Op::kMin: {
        const Vector& x = nodes_[n.a].value;
        const Vector& y = nodes_[n.b].value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (x[i] <= y[i]) {
            accumulate(n.a, i, g[i]);
          } else {
            accumulate(n.b, i, g[i]);
          }
        }
        break;
      }
      case Op::kClip: {
        const Vector& x = nodes_[n.a].value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (x[i] >= n.k0 && x[i] <= n.k1) accumulate(n.a, i, g[i]);
        }
        break;
      }
      case Op::kLogSoftmaxAt:
        for (std::size_t i = 0; i < n.aux.size(); ++i) {
          const double onehot = (i == n.rows) ? 1.0 : 0.0;
          accumulate(n.a, i, g[0] * (onehot - n.aux[i]));
        }
        break;
      case Op::kCategoricalKl: {
        const double kl = n.value[0];
        for (std::size_t i = 0; i < n.aux.size(); ++i) {
          accumulate(n.a, i, g[0] * n.aux[i] * (n.aux2[i] - kl));
        }
        break;
      }
      case Op::kGaussianLogpdf: {
        const Vector& mu = nodes_[n.a].value;
        const Vector& v = nodes_[n.b].value;
        for (std::size_t d = 0; d < mu.size(); ++d) {
          const double diff = n.aux[d] - mu[d];
          accumulate(n.a, d, g[0] * diff / v[d]);
          accumulate(n.b, d, g[0] * -0.5 * (1.0 / v[d] - diff * diff / (v[d] * v[d])));
        }
        break;
      }
      case Op::kGaussianKl: {
        const Vector& mu = nodes_[n.a].value;
        const Vector& v = nodes_[n.b].value;
        for (std::size_t d = 0; d < mu.size(); ++d) {
          accumulate(n.a, d, g[0] * (mu[d] - n.aux[d]) / n.aux2[d]);
          accumulate(n.b, d, g[0] * 0.5 * (1.0 / n.aux2[d] - 1.0 / v[d]));
        }
        break;
      }
    }
  }
  return out;
}

}  // namespace hygrpo
