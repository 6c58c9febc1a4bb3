#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "hygrpo/math.hpp"
#include "hygrpo/tape.hpp"

namespace hygrpo {

// Two frozen visual encoders with separate learned projections.
//
// f_a is a coarse global summary tanh(C x) and f_b a fine per-joint linear
// read-out B x; both are fixed by `encoder_seed`. Only W_a and W_b are
// parameters. Each branch is projected on its own and the two projected
// tokens are handed to the backbone side by side.
class DualFusion {
 public:
  DualFusion() = default;
  DualFusion(std::size_t image_dim, std::size_t coarse_dim, std::size_t fine_dim,
             std::size_t out_dim, std::uint64_t encoder_seed,
             std::uint64_t projection_seed);

  std::size_t image_dim() const { return encoder_coarse_.cols(); }
  std::size_t out_dim() const { return w_a_.rows(); }
  bool enabled() const { return image_dim() > 0; }

  Vector coarse_features(std::span<const double> image) const;
  Vector fine_features(std::span<const double> image) const;

  // {W_a f_a(x), W_b f_b(x)}.
  std::array<Vector, 2> fuse(std::span<const double> image) const;
  std::array<Var, 2> fuse(GradTape& tape, std::span<const double> image,
                          std::size_t param_offset) const;

  Matrix& coarse_projection() { return w_a_; }
  Matrix& fine_projection() { return w_b_; }
  const Matrix& coarse_projection() const { return w_a_; }
  const Matrix& fine_projection() const { return w_b_; }

  // Flat order: W_a row-major, then W_b row-major.
  std::size_t parameter_count() const { return w_a_.size() + w_b_.size(); }
  void flatten_into(std::vector<double>& out) const;
  void restore(std::span<const double> flat);

  bool operator==(const DualFusion&) const = default;

 private:
  Matrix encoder_coarse_;  // coarse_dim x image_dim
  Matrix encoder_fine_;    // fine_dim x image_dim
  Matrix w_a_;             // out_dim x coarse_dim
  Matrix w_b_;             // out_dim x fine_dim
};

}  // namespace hygrpo
