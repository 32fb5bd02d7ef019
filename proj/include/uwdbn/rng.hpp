#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace uwdbn {

// Deterministic random source. mt19937_64 is fully pinned by the standard,
// but the std:: distributions are not, so the draws below are hand-rolled:
// the same seed has to produce the same bytes on every build.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  // counter-based stream derivation used throughout the harness
  static Rng derive(uint64_t master_seed, uint64_t index) {
    return Rng(master_seed ^ index);
  }

  uint64_t next_u64() { return gen_(); }

  // [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; the second value of each pair is cached
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double gaussian(double mu, double sigma) { return mu + sigma * gaussian(); }

  size_t categorical(std::span<const double> probs) {
    double u = uniform();
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return probs.empty() ? 0 : probs.size() - 1;
  }

  // [0, n); multiply-shift bound, bias negligible for n << 2^64
  uint64_t below(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(gen_()) * n) >> 64);
  }

  // Fisher-Yates (std::shuffle is implementation-defined)
  template <typename T>
  void shuffle(std::span<T> xs) {
    for (size_t i = xs.size(); i > 1; --i)
      std::swap(xs[i - 1], xs[below(i)]);
  }

  template <typename T>
  void shuffle(std::vector<T>& xs) {
    shuffle(std::span<T>(xs));
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace uwdbn
