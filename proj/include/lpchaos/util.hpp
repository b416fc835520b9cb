#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>

namespace lpchaos {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// 64-bit FNV-1a; stable across platforms, used for config hashes and seed labels.
[[nodiscard]] constexpr std::uint64_t fnv1a(std::string_view text,
                                            std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seeds depend only on (parent, label/index), never on scheduling order.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return splitmix64(parent ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view label) noexcept {
  return derive_seed(parent, fnv1a(label));
}

namespace detail {

[[nodiscard]] inline double mean(std::span<const double> x) noexcept {
  if (x.empty()) return kNaN;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Sample standard deviation (n - 1 denominator).
[[nodiscard]] inline double sample_sd(std::span<const double> x) noexcept {
  if (x.size() < 2) return kNaN;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

// Least-squares slope of x against 0, 1, ..., n-1.
[[nodiscard]] inline double trend_slope(std::span<const double> x) noexcept {
  const auto n = static_cast<double>(x.size());
  if (x.size() < 2) return 0.0;
  const double tbar = (n - 1.0) / 2.0;
  const double xbar = mean(x);
  double sxy = 0.0;
  double stt = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dt = static_cast<double>(i) - tbar;
    sxy += dt * (x[i] - xbar);
    stt += dt * dt;
  }
  return sxy / stt;
}

}  // namespace detail
}  // namespace lpchaos
