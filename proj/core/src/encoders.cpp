#include "hygrpo/encoders.hpp"

#include "hygrpo/error.hpp"
#include "hygrpo/rng.hpp"

namespace hygrpo {

namespace {

// Orthonormal columns from a seeded Gaussian matrix.
Matrix orthonormal_columns(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (cols > rows) throw ContractViolation("encoder: pose_dim exceeds embed_dim");
  Rng rng(seed);
  Matrix q(rows, cols);
  for (std::size_t c = 0; c < cols; ++c) {
    Vector v(rows);
    for (double& x : v) x = rng.normal();
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < c; ++k) {
        double p = 0.0;
        for (std::size_t r = 0; r < rows; ++r) p += q(r, k) * v[r];
        for (std::size_t r = 0; r < rows; ++r) v[r] -= p * q(r, k);
      }
    }
    const double n = norm(v);
    for (std::size_t r = 0; r < rows; ++r) q(r, c) = v[r] / n;
  }
  return q;
}

}  // namespace

RetrievalEncoders::RetrievalEncoders(std::size_t vocab_size, std::size_t pose_dim,
                                     std::size_t embed_dim, double planted_norm,
                                     std::uint64_t seed)
    : pose_map_(orthonormal_columns(embed_dim, pose_dim, stream_seed({seed, 0}))),
      text_map_(pose_dim, vocab_size),
      scale_(1.0 / planted_norm) {
  if (!(planted_norm > 0.0)) throw ContractViolation("planted_norm must be positive");
  for (double& v : pose_map_.span()) v *= scale_;
  Rng rng(stream_seed({seed, 1}));
  for (double& v : text_map_.span()) v = rng.normal();
}

Vector RetrievalEncoders::encode_text(std::span<const TokenId> tokens) const {
  Vector counts(text_map_.cols());
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= counts.size()) {
      throw ContractViolation("encode_text: token outside vocabulary");
    }
    counts[static_cast<std::size_t>(t)] += 1.0;
  }
  return normalized(matvec(pose_map_, matvec(text_map_, counts)));
}

Vector RetrievalEncoders::encode_pose(std::span<const double> pose) const {
  return normalized(matvec(pose_map_, pose));
}

Vector RetrievalEncoders::planted_pose(std::span<const TokenId> tokens) const {
  // P = scale * Q, so P^+ = Q^T / scale.
  Vector p = transpose_matvec(pose_map_, encode_text(tokens));
  const double inv = 1.0 / (scale_ * scale_);
  for (double& v : p) v *= inv;
  return p;
}

Vector TextEmbedder::embed(std::span<const TokenId> tokens) const {
  Vector counts(vocab_size_);
  bool any = false;
  for (TokenId t : tokens) {
    if (t == end_) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_size_) {
      throw ContractViolation("text embed: token outside vocabulary");
    }
    counts[static_cast<std::size_t>(t)] += 1.0;
    any = true;
  }
  return any ? normalized(counts) : counts;
}

}  // namespace hygrpo
