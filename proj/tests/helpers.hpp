#pragma once

// Shared generators and independent oracles for the test suites.

#include <algorithm>
#include <cmath>
#include <vector>

#include "ecgot/beat.hpp"
#include "ecgot/density.hpp"
#include "ecgot/rng.hpp"

namespace testutil {

/// Smooth bump density with a positive floor, normalized to unit mass.
inline ecgot::DensityOnGrid bump_density(int grid, double center, double sigma,
                                         double floor = 1e-3) {
  ecgot::DensityOnGrid d;
  d.mass.resize(grid);
  double sum = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double x = static_cast<double>(i) / (grid - 1);
    d.mass[i] = std::exp(-0.5 * (x - center) * (x - center) / (sigma * sigma)) +
                floor / grid;
    sum += d.mass[i];
  }
  for (double& m : d.mass) m /= sum;
  return d;
}

/// Dirac at the grid node closest to position p.
inline ecgot::DensityOnGrid dirac_density(int grid, double p) {
  ecgot::DensityOnGrid d;
  d.mass.assign(grid, 0.0);
  const int k = std::clamp(static_cast<int>(std::lround(p * (grid - 1))), 0,
                           grid - 1);
  d.mass[k] = 1.0;
  return d;
}

/// Single-lead beat made of Gaussian bumps (amp, center_s, sigma_s) sampled
/// at `fs`, plus optional white noise.
inline ecgot::BeatTensor bump_beat(
    int beat_len, double fs,
    const std::vector<std::array<double, 3>>& bumps, double noise_sigma = 0.0,
    std::uint64_t seed = 0, int label = 0) {
  ecgot::BeatTensor b;
  b.n_leads = 1;
  b.beat_len = beat_len;
  b.sample_rate = fs;
  b.label = label;
  b.samples.resize(beat_len);
  ecgot::SplitMix64 rng(seed);
  for (int t = 0; t < beat_len; ++t) {
    double v = 0.0;
    const double ts = t / fs;
    for (const auto& [amp, c, w] : bumps)
      v += amp * std::exp(-0.5 * (ts - c) * (ts - c) / (w * w));
    if (noise_sigma > 0.0) v += noise_sigma * rng.normal();
    b.samples[t] = static_cast<float>(v);
  }
  return b;
}

/// Topographic prominence of every local maximum; used to count dominant
/// peaks independently of the library under test.
inline std::vector<std::pair<int, double>> peak_prominences(
    const std::vector<double>& x) {
  std::vector<std::pair<int, double>> out;
  const int n = static_cast<int>(x.size());
  for (int i = 1; i + 1 < n; ++i) {
    if (!(x[i] > x[i - 1] && x[i] >= x[i + 1])) continue;
    double left_min = x[i], right_min = x[i];
    for (int l = i - 1; l >= 0; --l) {
      if (x[l] > x[i]) break;
      left_min = std::min(left_min, x[l]);
    }
    for (int r = i + 1; r < n; ++r) {
      if (x[r] > x[i]) break;
      right_min = std::min(right_min, x[r]);
    }
    out.push_back({i, x[i] - std::max(left_min, right_min)});
  }
  return out;
}

/// Number of peaks whose prominence reaches `frac` of the global maximum.
inline int count_dominant_peaks(const std::vector<double>& x, double frac) {
  const double mx = *std::max_element(x.begin(), x.end());
  if (mx <= 0.0) return 0;
  int count = 0;
  for (const auto& [idx, prom] : peak_prominences(x))
    if (prom >= frac * mx) ++count;
  return count;
}

inline std::vector<double> lead_as_doubles(const ecgot::BeatTensor& b,
                                           int lead = 0) {
  auto s = b.lead(lead);
  return std::vector<double>(s.begin(), s.end());
}

}  // namespace testutil
