#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hygrpo/math.hpp"
#include "hygrpo/tape.hpp"

namespace hygrpo {

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::kIdentity;

  bool operator==(const Layer&) const = default;
};

struct LayerSpec {
  std::size_t width;
  Activation activation;
};

// Fully connected network. Flat parameter order is, per layer in sequence,
// the row-major weight matrix followed by the bias.
class Mlp {
 public:
  Mlp() = default;
  // Weights and biases drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)]
  // with a seed derived from (seed, layer index).
  Mlp(std::size_t input_width, std::span<const LayerSpec> layers,
      std::uint64_t seed);

  std::size_t input_width() const { return input_width_; }
  std::size_t output_width() const;
  std::size_t parameter_count() const;
  std::uint64_t seed() const { return seed_; }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  Vector forward(std::span<const double> x) const;
  // Same computation recorded on `tape`; parameter gradients land at
  // `param_offset + <flat index>`.
  Var forward(GradTape& tape, Var x, std::size_t param_offset) const;

  Vector flatten() const;
  void flatten_into(std::vector<double>& out) const;
  // Consumes exactly parameter_count() values from the front of `flat`.
  void restore(std::span<const double> flat);

  bool operator==(const Mlp&) const = default;

 private:
  std::size_t input_width_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<Layer> layers_;
};

}  // namespace hygrpo
