#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace hygrpo {

// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Order-sensitive hash of a tuple of integers into a stream seed.
constexpr std::uint64_t stream_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc908ULL;
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

// Domain tags that keep independent random streams apart.
enum class StreamTag : std::uint64_t {
  kInit = 1,
  kTaskBatch = 2,
  kCandidate = 3,
  kPretrain = 4,
  kEvalTasks = 5,
  kEvalSample = 6,
  kEnvFixed = 7,
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(engine_); }
  std::uint64_t next_u64() { return engine_(); }
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  // Inverse-CDF draw from a probability vector.
  std::size_t categorical(std::span<const double> probs) {
    const double u = uniform();
    double c = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      c += probs[i];
      if (u < c) return i;
    }
    return probs.size() - 1;
  }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline Rng make_rng(StreamTag tag, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = stream_seed({static_cast<std::uint64_t>(tag)});
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return Rng(h);
}

}  // namespace hygrpo
