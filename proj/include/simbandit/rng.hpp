#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace simbandit {

// Independent random streams. A (seed, stream) pair is a key; the n-th draw of
// a stream is a pure function of (key, n), so components never share state and
// any draw can be regenerated from its counter alone.
enum class Stream : std::uint64_t {
  noise = 1,       // payoff realizations, counter = round
  algorithm = 2,   // internal randomization of policies (EXP3, taxonomy descent)
  instance = 3,    // instance generation (needles, drift paths, random spaces)
  arrivals = 4,    // random context-arrival schedules, counter = round
  audit = 5,       // sampled validator checks
};

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t stream_key(std::uint64_t seed, Stream stream, std::uint64_t salt = 0) {
  return mix64(mix64(seed ^ 0x6A09E667F3BCC909ULL) + static_cast<std::uint64_t>(stream) * 0x9E3779B97F4A7C15ULL +
               mix64(salt + 0x3C6EF372FE94F82BULL));
}

inline constexpr std::uint64_t counter_draw(std::uint64_t key, std::uint64_t counter) {
  return mix64(key + (counter + 1) * 0x9E3779B97F4A7C15ULL);
}

inline double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Counter-based generator (SplitMix-style mixing of key + counter). Satisfies
// UniformRandomBitGenerator, but callers should prefer the explicit helpers
// below: std distributions are not bit-reproducible across standard libraries.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng() = default;
  CounterRng(std::uint64_t seed, Stream stream, std::uint64_t salt = 0)
      : key_(stream_key(seed, stream, salt)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return counter_draw(key_, counter_++); }

  // Uniform in [0, 1).
  double uniform() { return to_unit((*this)()); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire-style multiply-shift; bias is < n / 2^64, negligible here.
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  double gaussian() {
    // Box-Muller; the second variate is discarded to keep draws counter-aligned.
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  std::uint64_t counter() const { return counter_; }
  void seek(std::uint64_t counter) { counter_ = counter; }
  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_ = stream_key(0, Stream::algorithm);
  std::uint64_t counter_ = 0;
};

}  // namespace simbandit
