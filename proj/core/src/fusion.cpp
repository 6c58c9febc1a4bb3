#include "hygrpo/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "hygrpo/rng.hpp"

namespace hygrpo {

namespace {

Matrix seeded_uniform(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Matrix m(rows, cols);
  Rng rng(seed);
  const double bound = cols > 0 ? 1.0 / std::sqrt(static_cast<double>(cols)) : 0.0;
  for (double& v : m.span()) v = rng.uniform(-bound, bound);
  return m;
}

}  // namespace

DualFusion::DualFusion(std::size_t image_dim, std::size_t coarse_dim,
                       std::size_t fine_dim, std::size_t out_dim,
                       std::uint64_t encoder_seed, std::uint64_t projection_seed)
    : encoder_coarse_(seeded_uniform(coarse_dim, image_dim, stream_seed({encoder_seed, 0}))),
      encoder_fine_(seeded_uniform(fine_dim, image_dim, stream_seed({encoder_seed, 1}))),
      w_a_(seeded_uniform(out_dim, coarse_dim, stream_seed({projection_seed, 0}))),
      w_b_(seeded_uniform(out_dim, fine_dim, stream_seed({projection_seed, 1}))) {}

Vector DualFusion::coarse_features(std::span<const double> image) const {
  Vector v = matvec(encoder_coarse_, image);
  for (double& x : v) x = std::tanh(x);
  return v;
}

Vector DualFusion::fine_features(std::span<const double> image) const {
  return matvec(encoder_fine_, image);
}

std::array<Vector, 2> DualFusion::fuse(std::span<const double> image) const {
  return {matvec(w_a_, coarse_features(image)), matvec(w_b_, fine_features(image))};
}

std::array<Var, 2> DualFusion::fuse(GradTape& tape, std::span<const double> image,
                                    std::size_t param_offset) const {
  Var va = tape.constant(coarse_features(image));
  Var vb = tape.constant(fine_features(image));
  Var pa = tape.affine(w_a_.span(), param_offset, {}, 0, w_a_.rows(), w_a_.cols(), va);
  Var pb = tape.affine(w_b_.span(), param_offset + w_a_.size(), {}, 0, w_b_.rows(),
                       w_b_.cols(), vb);
  return {pa, pb};
}

void DualFusion::flatten_into(std::vector<double>& out) const {
  out.insert(out.end(), w_a_.span().begin(), w_a_.span().end());
  out.insert(out.end(), w_b_.span().begin(), w_b_.span().end());
}

void DualFusion::restore(std::span<const double> flat) {
  if (flat.size() < parameter_count()) {
    throw ShapeError("fusion restore: too few values");
  }
  std::copy_n(flat.begin(), w_a_.size(), w_a_.span().begin());
  std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(w_a_.size()), w_b_.size(),
              w_b_.span().begin());
}

}  // namespace hygrpo
