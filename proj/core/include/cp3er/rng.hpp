#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace cp3er {

// Seeded random stream. Draw counters let tests assert how many variates an
// operation consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double normal() {
    ++normal_draws_;
    return normal_(engine_);
  }
  double uniform() { return uniform(0.0, 1.0); }
  double uniform(double lo, double hi) {
    ++uniform_draws_;
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  // Uniform integer on [lo, hi] inclusive.
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    ++uniform_draws_;
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }
  // Independent child stream derived from this one.
  Rng split() { return Rng(engine_()); }

  std::uint64_t normal_draws() const { return normal_draws_; }
  std::uint64_t uniform_draws() const { return uniform_draws_; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
  std::uint64_t normal_draws_ = 0;
  std::uint64_t uniform_draws_ = 0;
};

}  // namespace cp3er
