#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "steermetrics/error.hpp"

namespace steermetrics {

/// Second-order Butterworth low-pass section (bilinear transform, prewarped).
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  static Biquad butterworth_lowpass(double rate, double cutoff) {
    if (!(rate > 0.0) || !(cutoff > 0.0) || !(cutoff < rate / 2.0))
      throw Error(ErrorCode::InvalidCutoff, "cutoff " + std::to_string(cutoff) +
                                                " Hz must lie in (0, " + std::to_string(rate / 2.0) +
                                                ") Hz");
    const double k = std::tan(std::numbers::pi * cutoff / rate);
    const double k2 = k * k;
    const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k2);
    Biquad f;
    f.b0 = k2 * norm;
    f.b1 = 2.0 * f.b0;
    f.b2 = f.b0;
    f.a1 = 2.0 * (k2 - 1.0) * norm;
    f.a2 = (1.0 - std::numbers::sqrt2 * k + k2) * norm;
    return f;
  }

  // Direct form II transposed; the state starts at the steady state for a
  // constant input equal to `initial`.
  void run(std::span<double> x, double initial) const {
    double z1 = (1.0 - b0) * initial;
    double z2 = (b2 - a2) * initial;
    for (double& v : x) {
      const double in = v;
      const double out = b0 * in + z1;
      z1 = b1 * in - a1 * out + z2;
      z2 = b2 * in - a2 * out;
      v = out;
    }
  }
};

/// Zero-phase low-pass: the Butterworth section applied forward then
/// backward over an odd-reflected extension of the signal. Output length
/// equals input length.
inline std::vector<double> lowpass(std::span<const double> theta, double rate, double cutoff) {
  const Biquad f = Biquad::butterworth_lowpass(rate, cutoff);
  const std::size_t n = theta.size();
  if (n < 2) return {theta.begin(), theta.end()};

  const std::size_t pad = std::min<std::size_t>(9, n - 1);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * theta.front() - theta[i]);
  ext.insert(ext.end(), theta.begin(), theta.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * theta.back() - theta[n - 1 - i]);

  f.run(ext, ext.front());
  std::reverse(ext.begin(), ext.end());
  f.run(ext, ext.front());
  std::reverse(ext.begin(), ext.end());

  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

}  // namespace steermetrics
