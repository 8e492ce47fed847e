#include "vsynth/sampling.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <numbers>
#include <string>

#include "vsynth/errors.hpp"

namespace vsynth {

namespace {

constexpr unsigned __int128 kPcgMultiplier =
    (static_cast<unsigned __int128>(2549297995355413924ULL) << 64) | 4865540595714422341ULL;

constexpr std::array<std::pair<Family, std::string_view>, 5> kFamilyNames{{
    {Family::Normal, "normal"},
    {Family::LogNormal, "lognormal"},
    {Family::UniformCont, "uniform"},
    {Family::UniformInt, "uniform_int"},
    {Family::Gamma, "gamma"},
}};

bool is_integral(double v) { return std::isfinite(v) && std::floor(v) == v; }

}  // namespace

std::string_view family_name(Family family) {
  for (const auto& [f, name] : kFamilyNames) {
    if (f == family) return name;
  }
  return "unknown";
}

std::optional<Family> family_from_name(std::string_view name) {
  for (const auto& [f, n] : kFamilyNames) {
    if (n == name) return f;
  }
  return std::nullopt;
}

void DistSpec::validate() const {
  if (!std::isfinite(a) || !std::isfinite(b)) {
    throw DomainError("distribution parameters must be finite");
  }
  switch (family) {
    case Family::UniformCont:
      if (a > b) throw DomainError("uniform requires a <= b");
      break;
    case Family::UniformInt:
      if (!is_integral(a) || !is_integral(b)) {
        throw DomainError("uniform_int bounds must be integers");
      }
      if (a > b) throw DomainError("uniform_int requires a <= b");
      break;
    case Family::Normal:
    case Family::LogNormal:
      if (b < 0) throw DomainError(std::string(family_name(family)) + " requires variance >= 0");
      break;
    case Family::Gamma:
      if (b < 0) throw DomainError("gamma requires sd >= 0");
      if (a <= 0) throw DomainError("gamma requires mean > 0");
      break;
  }
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(mix64(seed) ^ a) ^ (b * 0xd1342543de82ef95ULL + 1));
}

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  auto next = [&sm] {
    std::uint64_t out = mix64(sm);
    sm += 0x9e3779b97f4a7c15ULL;
    return out;
  };
  const unsigned __int128 init_state = (static_cast<unsigned __int128>(next()) << 64) | next();
  const unsigned __int128 init_seq = (static_cast<unsigned __int128>(next()) << 64) | next();
  // pcg_setseq_128_srandom_r
  state_ = 0;
  inc_ = (init_seq << 1) | 1u;
  state_ = state_ * kPcgMultiplier + inc_;
  state_ += init_state;
  state_ = state_ * kPcgMultiplier + inc_;
}

std::uint64_t Rng::next_u64() {
  state_ = state_ * kPcgMultiplier + inc_;
  const auto hi = static_cast<std::uint64_t>(state_ >> 64);
  const auto lo = static_cast<std::uint64_t>(state_);
  const auto rot = static_cast<int>(state_ >> 122);
  return std::rotr(hi ^ lo, rot);
}

double Rng::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  const double u1 = 1.0 - uniform01();  // (0, 1]
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gamma_unit_scale(double shape) {
  if (!(shape > 0)) throw DomainError("gamma shape must be positive");
  if (shape < 1.0) {
    // Boost: G(k) = G(k + 1) * U^(1/k)
    const double g = gamma_unit_scale(shape + 1.0);
    const double u = 1.0 - uniform01();
    return g * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0;
    double v = 0;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0);
    v = v * v * v;
    const double u = 1.0 - uniform01();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw DomainError("uniform_int requires lo <= hi");
  const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
  if (range == 0) return static_cast<std::int64_t>(next_u64());  // full 64-bit span
  const std::uint64_t threshold = (0 - range) % range;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return lo + static_cast<std::int64_t>(r % range);
  }
}

double sample(const DistSpec& spec, Rng& rng) {
  spec.validate();
  switch (spec.family) {
    case Family::Normal:
      return spec.a + std::sqrt(spec.b) * rng.normal();
    case Family::LogNormal:
      return std::exp(spec.a + std::sqrt(spec.b) * rng.normal());
    case Family::UniformCont:
      if (spec.a == spec.b) return spec.a;
      return spec.a + (spec.b - spec.a) * rng.uniform01();
    case Family::UniformInt:
      return static_cast<double>(
          rng.uniform_int(static_cast<std::int64_t>(spec.a), static_cast<std::int64_t>(spec.b)));
    case Family::Gamma: {
      if (spec.b == 0) return spec.a;
      const double shape = (spec.a * spec.a) / (spec.b * spec.b);
      const double scale = (spec.b * spec.b) / spec.a;
      return rng.gamma_unit_scale(shape) * scale;
    }
  }
  throw DomainError("unknown distribution family");
}

std::int64_t sample_integer(const DistSpec& spec, Rng& rng) {
  return std::llround(sample(spec, rng));
}

}  // namespace vsynth
