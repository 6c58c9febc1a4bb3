#pragma once

#include <cstdint>
#include <span>

#include "hygrpo/math.hpp"
#include "hygrpo/types.hpp"

namespace hygrpo {

// Fixed text/pose encoders into a shared unit-sphere embedding space.
//
// encode_pose(p) = normalize(P p) with P = Q / planted_norm, Q having
// orthonormal columns; encode_text(bag) = normalize(P T counts(bag)). Text
// embeddings therefore lie in the range of P, and the minimum-norm preimage
// P^+ encode_text(bag) is a pose that maps onto the text embedding exactly.
class RetrievalEncoders {
 public:
  RetrievalEncoders(std::size_t vocab_size, std::size_t pose_dim,
                    std::size_t embed_dim, double planted_norm, std::uint64_t seed);

  std::size_t embed_dim() const { return pose_map_.rows(); }
  std::size_t pose_dim() const { return pose_map_.cols(); }

  Vector encode_text(std::span<const TokenId> tokens) const;
  Vector encode_pose(std::span<const double> pose) const;
  // Minimum-norm pose whose embedding equals encode_text(tokens).
  Vector planted_pose(std::span<const TokenId> tokens) const;

  const Matrix& pose_map() const { return pose_map_; }

 private:
  Matrix pose_map_;  // embed_dim x pose_dim
  Matrix text_map_;  // pose_dim x vocab
  double scale_;
};

// Normalized token-count vector; distinct tokens are orthogonal. END tokens
// are ignored. An empty bag maps to the zero vector.
class TextEmbedder {
 public:
  TextEmbedder(std::size_t vocab_size, TokenId end_token)
      : vocab_size_(vocab_size), end_(end_token) {}

  Vector embed(std::span<const TokenId> tokens) const;

 private:
  std::size_t vocab_size_;
  TokenId end_;
};

}  // namespace hygrpo
