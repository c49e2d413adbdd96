#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <utility>
#include <vector>

namespace flsim {

// Stateless splitmix64 finalizer.
uint64_t mix64(uint64_t x);

// Derives an independent stream seed from a master seed and a role path,
// e.g. seed_chain(master, {stream::kClient, client_id, round}). Streams with
// different paths never alias in practice.
uint64_t seed_chain(uint64_t seed, std::initializer_list<uint64_t> path);

// Role tags for seed_chain. Each (role, ...) path owns its own stream; no
// stream is reused across roles.
namespace stream {
inline constexpr uint64_t kData = 1;
inline constexpr uint64_t kSplit = 2;
inline constexpr uint64_t kPartition = 3;
inline constexpr uint64_t kInit = 4;
inline constexpr uint64_t kClient = 5;
inline constexpr uint64_t kServer = 6;
inline constexpr uint64_t kPublicData = 7;
inline constexpr uint64_t kPublicBatch = 8;
inline constexpr uint64_t kPseudoClass = 9;
}  // namespace stream

// Deterministic RNG. All samplers are hand-rolled on top of the raw 64-bit
// engine so streams are byte-stable across standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform();
  // (0, 1), safe for log()
  double uniform_pos();
  double uniform(double lo, double hi);

  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Gamma(shape, 1) via Marsaglia-Tsang.
  double gamma(double shape);

  // Symmetric Dirichlet over n components.
  std::vector<double> dirichlet(double alpha, int n);

  // Unbiased integer in [0, n).
  int uniform_int(int n);

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace flsim
