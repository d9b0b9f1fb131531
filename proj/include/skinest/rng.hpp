#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace skinest {

/// Seeded Gaussian source for synthetic measurement noise. mt19937_64 has a
/// standardized sequence and the Box-Muller transform below uses plain
/// arithmetic, so a given seed yields the same stream on every platform
/// (std::normal_distribution does not guarantee that).
class NoiseSampler {
 public:
  explicit NoiseSampler(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in (0, 1].
  double uniform() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal draw.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  double gaussian(double std_dev) { return std_dev <= 0.0 ? 0.0 : std_dev * gaussian(); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace skinest
