#pragma once

// Reference implementations used only by tests. Each one follows a different
// route than the library code it checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

/// Maximum number of alternating swings of at least `gap` over an ordered
/// list of turning-point values, by dynamic programming over every pair.
inline std::size_t reversal_count(const std::vector<double>& turns, double gap) {
  const std::size_t m = turns.size();
  // up[j] / down[j]: best count of alternating swings ending at j whose last swing rose / fell.
  std::vector<std::size_t> up(m, 0), down(m, 0);
  std::size_t best = 0;
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      if (turns[j] - turns[i] >= gap) up[j] = std::max(up[j], down[i] + 1);
      if (turns[i] - turns[j] >= gap) down[j] = std::max(down[j], up[i] + 1);
    }
    best = std::max({best, up[j], down[j]});
  }
  return best;
}

/// Interior turning points of a piecewise-linear signal given by its vertex
/// values; runs of equal values count as one vertex.
inline std::vector<double> turning_vertices(const std::vector<double>& vertices) {
  std::vector<double> v;
  for (double x : vertices)
    if (v.empty() || v.back() != x) v.push_back(x);
  std::vector<double> out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    const bool peak = v[i] > v[i - 1] && v[i] > v[i + 1];
    const bool trough = v[i] < v[i - 1] && v[i] < v[i + 1];
    if (peak || trough) out.push_back(v[i]);
  }
  return out;
}

/// Random piecewise-linear signal with vertices on integer sample positions.
/// Some segments are flat to exercise plateau handling.
struct PiecewiseLinear {
  std::vector<double> vertices;
  std::vector<double> samples;
};

inline PiecewiseLinear random_piecewise_linear(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_vertices(2, 40);
  std::uniform_int_distribution<int> seg_len(1, 12);
  std::uniform_real_distribution<double> value(-8.0, 8.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  PiecewiseLinear s;
  const int nv = n_vertices(rng);
  s.vertices.push_back(value(rng));
  s.samples.push_back(s.vertices.back());
  for (int k = 1; k < nv; ++k) {
    const double prev = s.vertices.back();
    const double next = coin(rng) < 0.1 ? prev : value(rng);
    const int len = seg_len(rng);
    for (int i = 1; i <= len; ++i) s.samples.push_back(prev + (next - prev) * i / len);
    s.samples.back() = next;
    s.vertices.push_back(next);
  }
  return s;
}

/// Bin of a residual against the signed edge list, then Shannon entropy in
/// log base 9 via log2.
inline double entropy(const std::vector<double>& residuals, double alpha) {
  const std::array<double, 8> edges{-5 * alpha, -2.5 * alpha, -alpha, -0.5 * alpha,
                                    0.5 * alpha, alpha,       2.5 * alpha, 5 * alpha};
  std::array<double, 9> counts{};
  for (double e : residuals) {
    std::size_t bin;
    if (e >= 0)
      bin = static_cast<std::size_t>(std::count_if(edges.begin(), edges.end(), [&](double x) { return x <= e; }));
    else
      bin = static_cast<std::size_t>(std::count_if(edges.begin(), edges.end(), [&](double x) { return x < e; }));
    counts[bin] += 1.0;
  }
  double h = 0.0;
  for (double c : counts) {
    if (c == 0.0) continue;
    const double p = c / static_cast<double>(residuals.size());
    h -= p * std::log2(p) / std::log2(9.0);
  }
  return h;
}

/// Group id of every event: the number of gaps >= t_max seen up to it.
inline std::vector<std::size_t> group_ids(const std::vector<double>& times, double t_max) {
  std::vector<std::size_t> ids(times.size(), 0);
  for (std::size_t i = 0; i < times.size(); ++i)
    for (std::size_t k = 1; k <= i; ++k)
      if (!(times[k] - times[k - 1] < t_max)) ++ids[i];
  return ids;
}

/// Amplitude of the `freq` component of x (sampled at `rate`) by least
/// squares on sin/cos, over samples [from, to).
inline double amplitude(const std::vector<double>& x, double rate, double freq, std::size_t from,
                        std::size_t to) {
  double ss = 0, cc = 0, sc = 0, xs = 0, xc = 0;
  for (std::size_t i = from; i < to; ++i) {
    const double w = 2.0 * M_PI * freq * static_cast<double>(i) / rate;
    const double s = std::sin(w), c = std::cos(w);
    ss += s * s;
    cc += c * c;
    sc += s * c;
    xs += x[i] * s;
    xc += x[i] * c;
  }
  const double det = ss * cc - sc * sc;
  const double a = (xs * cc - xc * sc) / det;
  const double b = (xc * ss - xs * sc) / det;
  return std::hypot(a, b);
}

}  // namespace oracle
