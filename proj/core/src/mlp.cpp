#include "hygrpo/mlp.hpp"

#include <algorithm>

#include "hygrpo/rng.hpp"

namespace hygrpo {

Mlp::Mlp(std::size_t input_width, std::span<const LayerSpec> layers,
         std::uint64_t seed)
    : input_width_(input_width), seed_(seed) {
  std::size_t fan_in = input_width;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Layer layer;
    layer.weight = Matrix(layers[l].width, fan_in);
    layer.bias = Vector(layers[l].width);
    layer.activation = layers[l].activation;
    Rng rng(stream_seed({seed, l}));
    const double bound = fan_in > 0 ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 0.0;
    for (double& w : layer.weight.span()) w = rng.uniform(-bound, bound);
    for (double& b : layer.bias) b = rng.uniform(-bound, bound);
    layers_.push_back(std::move(layer));
    fan_in = layers[l].width;
  }
}

std::size_t Mlp::output_width() const {
  return layers_.empty() ? input_width_ : layers_.back().weight.rows();
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

Vector Mlp::forward(std::span<const double> x) const {
  require_same_size(x.size(), input_width_, "mlp input");
  Vector h(x);
  for (const auto& layer : layers_) {
    Vector y(layer.weight.rows());
    affine_into(layer.weight.span(), layer.bias, layer.weight.rows(),
                layer.weight.cols(), h, y.span());
    switch (layer.activation) {
      case Activation::kTanh:
        for (double& v : y) v = std::tanh(v);
        break;
      case Activation::kSoftplus:
        for (double& v : y) v = softplus(v);
        break;
      case Activation::kIdentity:
        break;
    }
    h = std::move(y);
  }
  return h;
}

Var Mlp::forward(GradTape& tape, Var x, std::size_t param_offset) const {
  require_same_size(tape.value(x).size(), input_width_, "mlp input");
  Var h = x;
  std::size_t offset = param_offset;
  for (const auto& layer : layers_) {
    const std::size_t w_size = layer.weight.size();
    h = tape.affine(layer.weight.span(), offset, layer.bias, offset + w_size,
                    layer.weight.rows(), layer.weight.cols(), h);
    if (layer.activation != Activation::kIdentity) {
      h = tape.activate(h, layer.activation);
    }
    offset += w_size + layer.bias.size();
  }
  return h;
}

Vector Mlp::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  flatten_into(out);
  return Vector(std::move(out));
}

void Mlp::flatten_into(std::vector<double>& out) const {
  for (const auto& l : layers_) {
    out.insert(out.end(), l.weight.span().begin(), l.weight.span().end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
}

void Mlp::restore(std::span<const double> flat) {
  if (flat.size() < parameter_count()) {
    throw ShapeError("mlp restore: need " + std::to_string(parameter_count()) +
                     " values, got " + std::to_string(flat.size()));
  }
  std::size_t pos = 0;
  for (auto& l : layers_) {
    auto w = l.weight.span();
    std::copy_n(flat.begin() + pos, w.size(), w.begin());
    pos += w.size();
    std::copy_n(flat.begin() + pos, l.bias.size(), l.bias.begin());
    pos += l.bias.size();
  }
}

}  // namespace hygrpo
