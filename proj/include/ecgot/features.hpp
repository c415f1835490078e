#pragma once

// Per-lead time-domain and frequency-domain statistics, and assembly of the
// concatenated beat vector (raw | time | frequency blocks, lead-major
// inside each block).

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgot/beat.hpp"
#include "ecgot/signal.hpp"

namespace ecgot {

constexpr int kTimeFeatureCount = 13;
constexpr int kFreqFeatureCount = 9;

/// One-sided magnitude spectrum with its frequency axis.
struct SpectrumView {
  std::vector<double> magnitudes;  // F(k) >= 0
  std::vector<double> freqs_hz;    // f(k)

  int size() const { return static_cast<int>(magnitudes.size()); }

  void validate() const {
    if (magnitudes.size() != freqs_hz.size() || magnitudes.size() < 2)
      throw std::invalid_argument("spectrum: bad shape");
    for (double v : magnitudes)
      if (!std::isfinite(v) || v < 0.0)
        throw std::invalid_argument("spectrum: magnitudes must be >= 0");
    for (double v : freqs_hz)
      if (!std::isfinite(v))
        throw std::invalid_argument("spectrum: non-finite frequency");
  }

  static SpectrumView of(std::span<const double> signal, double sample_rate) {
    auto [freqs, mags] = fft_spectrum(signal, sample_rate);
    return {std::move(mags), std::move(freqs)};
  }
};

inline const std::array<const char*, kTimeFeatureCount>& time_feature_names() {
  static const std::array<const char*, kTimeFeatureCount> names = {
      "max",      "min",       "range",    "mean",          "median",
      "mode",     "std",       "rms",      "mean_square",   "skewness",
      "kurtosis", "waveform_factor", "pulse_factor"};
  return names;
}

/// Thirteen time-domain statistics in the order of time_feature_names().
/// Degenerate inputs follow fixed conventions: zero variance gives zero
/// skewness/kurtosis, zero mean |x| gives zero factor features.
inline std::vector<double> time_features(std::span<const double> lead) {
  const int n = static_cast<int>(lead.size());
  if (n < 2)
    throw std::invalid_argument("time_features: need at least 2 samples");
  detail::check_finite(lead, "time_features");

  const double max = *std::max_element(lead.begin(), lead.end());
  const double min = *std::min_element(lead.begin(), lead.end());
  const double range = max - min;

  double mean = 0.0, mean_sq = 0.0, mean_abs = 0.0;
  for (double v : lead) {
    mean += v;
    mean_sq += v * v;
    mean_abs += std::abs(v);
  }
  mean /= n;
  mean_sq /= n;
  mean_abs /= n;

  std::vector<double> sorted(lead.begin(), lead.end());
  std::sort(sorted.begin(), sorted.end());
  const double median = n % 2 == 1
                            ? sorted[n / 2]
                            : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

  // mode of a continuous signal: 16 uniform bins over [min, max], ties to
  // the lower bin
  double mode = min;
  if (range > 0.0) {
    constexpr int kBins = 16;
    std::array<int, kBins> hist{};
    for (double v : lead) {
      int bin = static_cast<int>((v - min) / range * kBins);
      hist[std::clamp(bin, 0, kBins - 1)] += 1;
    }
    const int best =
        static_cast<int>(std::max_element(hist.begin(), hist.end()) -
                         hist.begin());
    mode = min + (best + 0.5) * range / kBins;
  }

  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : lead) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  const double stddev = std::sqrt(m2);
  const double skewness = m2 > 0.0 ? m3 / (stddev * stddev * stddev) : 0.0;
  const double kurtosis = m2 > 0.0 ? m4 / (m2 * m2) : 0.0;

  const double rms = std::sqrt(mean_sq);
  const double max_abs = std::max(std::abs(max), std::abs(min));
  const double waveform_factor = mean_abs > 0.0 ? rms / mean_abs : 0.0;
  const double pulse_factor = mean_abs > 0.0 ? max_abs / mean_abs : 0.0;

  return {max,      min,      range, mean,           median,
          mode,     stddev,   rms,   mean_sq,        skewness,
          kurtosis, waveform_factor, pulse_factor};
}

/// Spectral statistics Z1..Z9 (optionally Z10 for inspection): mean,
/// variance (1/(N-1)), spectral entropy in bits, energy, standardized skew
/// and kurt, and the printed shape statistics mixing f(k) and F(k) verbatim.
/// Conventions: Z2 = 0 forces Z5 = Z6 = 0; a zero total magnitude forces
/// Z3 and Z7..Z10 to 0.
inline std::vector<double> freq_features(const SpectrumView& spec,
                                         bool include_z10 = false) {
  spec.validate();
  const int n = spec.size();
  const auto& F = spec.magnitudes;
  const auto& f = spec.freqs_hz;

  double z1 = 0.0;
  for (double v : F) z1 += v;
  const double total = z1;
  z1 /= n;

  double z2 = 0.0;
  for (double v : F) z2 += (v - z1) * (v - z1);
  z2 /= (n - 1);

  double z3 = 0.0;
  if (total > 0.0) {
    for (double v : F) {
      const double p = v / total;  // = F(k) / (Z1 * N)
      if (p > 0.0) z3 -= p * std::log2(p);
    }
  }

  double z4 = 0.0;
  for (double v : F) z4 += v * v;
  z4 /= n;

  double z5 = 0.0, z6 = 0.0;
  if (z2 > 0.0) {
    const double s = std::sqrt(z2);
    for (double v : F) {
      const double d = (v - z1) / s;
      z5 += d * d * d;
      z6 += d * d * d * d;
    }
    z5 /= n;
    z6 /= n;
  }

  double z7 = 0.0, z8 = 0.0, z9 = 0.0, z10 = 0.0;
  if (total > 0.0) {
    double num7 = 0.0, num8 = 0.0, num9 = 0.0, num10 = 0.0;
    for (int k = 0; k < n; ++k) {
      num7 += f[k] - F[k];
      num8 += (f[k] - z6) * (f[k] - z6) * F[k];
      const double d = f[k] - F[k];
      num9 += d * d * d * F[k];
      num10 += d * d * d * d * F[k];
    }
    z7 = num7 / total;
    z8 = std::sqrt(num8 / total);
    z9 = num9 / total;
    z10 = num10 / total;
  }

  std::vector<double> out{z1, z2, z3, z4, z5, z6, z7, z8, z9};
  if (include_z10) out.push_back(z10);
  return out;
}

/// Expected beat shape for feature assembly.
struct FeatureConfig {
  int n_leads = 12;
  int beat_len = 50;

  int raw_dim() const { return n_leads * beat_len; }
  int time_dim() const { return n_leads * kTimeFeatureCount; }
  int freq_dim() const { return n_leads * kFreqFeatureCount; }
  int total_dim() const { return raw_dim() + time_dim() + freq_dim(); }
};

struct FeatureVector {
  std::vector<double> values;
  std::array<int, 3> dims{};  // raw | time | frequency block lengths

  int size() const { return static_cast<int>(values.size()); }
};

/// Concatenates per-lead raw samples, time features, and frequency features
/// into one flat vector: [raw x leads | time x leads | freq x leads].
inline FeatureVector assemble_vector(const BeatTensor& beat,
                                     const FeatureConfig& config) {
  if (beat.n_leads != config.n_leads || beat.beat_len != config.beat_len)
    throw std::invalid_argument("assemble_vector: beat shape does not match config");
  FeatureVector out;
  out.dims = {config.raw_dim(), config.time_dim(), config.freq_dim()};
  out.values.reserve(config.total_dim());
  std::vector<std::vector<double>> leads(beat.n_leads);
  for (int l = 0; l < beat.n_leads; ++l) {
    const auto s = beat.lead(l);
    leads[l].assign(s.begin(), s.end());
    out.values.insert(out.values.end(), leads[l].begin(), leads[l].end());
  }
  for (int l = 0; l < beat.n_leads; ++l) {
    const auto t = time_features(leads[l]);
    out.values.insert(out.values.end(), t.begin(), t.end());
  }
  for (int l = 0; l < beat.n_leads; ++l) {
    const auto z =
        freq_features(SpectrumView::of(leads[l], beat.sample_rate));
    out.values.insert(out.values.end(), z.begin(), z.end());
  }
  return out;
}

}  // namespace ecgot
