#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string_view>

namespace vsynth {

enum class Family { Normal, LogNormal, UniformCont, UniformInt, Gamma };

std::string_view family_name(Family family);
std::optional<Family> family_from_name(std::string_view name);

/// Parameters of one sampled quantity.
///
/// Meaning of (a, b) by family:
///   Normal       mean, variance
///   LogNormal    mean and variance of log(x)
///   UniformCont  lower, upper bound
///   UniformInt   lower, upper bound (inclusive, integer valued)
///   Gamma        mean, standard deviation
struct DistSpec {
  Family family = Family::UniformCont;
  double a = 0.0;
  double b = 0.0;

  static DistSpec normal(double mean, double variance) { return {Family::Normal, mean, variance}; }
  static DistSpec lognormal(double mu, double variance) { return {Family::LogNormal, mu, variance}; }
  static DistSpec uniform(double lo, double hi) { return {Family::UniformCont, lo, hi}; }
  static DistSpec uniform_int(double lo, double hi) { return {Family::UniformInt, lo, hi}; }
  static DistSpec gamma(double mean, double sd) { return {Family::Gamma, mean, sd}; }
  /// Degenerate distribution that always yields `value`.
  static DistSpec constant(double value) { return {Family::UniformCont, value, value}; }

  /// Throws DomainError when the parameters violate the family's domain.
  void validate() const;

  bool operator==(const DistSpec&) const = default;
};

/// PCG64 (pcg_setseq_128, XSL-RR 128/64 output, PCG reference v0.94).
///
/// A 64-bit seed is expanded into the 128-bit state and stream increment with
/// four SplitMix64 outputs. Continuous distributions are implemented here
/// rather than through <random> so that a seed yields the same stream on every
/// standard library.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform01();
  /// Standard normal (Box-Muller, one output per two words).
  double normal();
  /// Gamma with the given shape and unit scale (Marsaglia-Tsang).
  double gamma_unit_scale(double shape);
  /// Uniform integer on [lo, hi] inclusive, without modulo bias.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  std::uint64_t seed() const { return seed_; }

 private:
  unsigned __int128 state_ = 0;
  unsigned __int128 inc_ = 0;
  std::uint64_t seed_ = 0;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Deterministic sub-seed for (seed, a, b). Used for per-patch and per-stage
/// streams so that independent work never shares a generator.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// One draw from `spec`. UniformInt returns an integer-valued double.
double sample(const DistSpec& spec, Rng& rng);

/// Draw from an integer-valued spec and round to the nearest integer.
std::int64_t sample_integer(const DistSpec& spec, Rng& rng);

}  // namespace vsynth
