#pragma once

// Beats as probability densities over normalized time, and the 1-D
// squared-distance transport machinery computed in closed form from
// quantile functions.
//
// A DensityOnGrid places mass m_i at node x_i = i/(G-1) on [0,1] and reads
// it as spread uniformly over the node's Voronoi cell (half cells at the two
// boundaries). The CDF is then piecewise linear with knots at the cell
// edges and the quantile function is piecewise linear in the level q, which
// makes both the transport cost integral and displacement interpolation
// exact per level segment.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "ecgot/beat.hpp"

namespace ecgot {

/// Mass floor applied by to_density, as a fraction of the signal range.
constexpr double kDensityFloorEta = 1e-3;

struct DensityOnGrid {
  std::vector<double> mass;  // nonnegative, sums to 1
  double offset = 0.0;       // subtracted baseline, signal units
  double scale = 1.0;        // pre-normalization total mass, signal units

  int size() const { return static_cast<int>(mass.size()); }

  void validate() const {
    if (mass.size() < 2)
      throw std::invalid_argument("density: grid must have >= 2 points");
    double sum = 0.0;
    for (double m : mass) {
      if (!(m >= 0.0) || !std::isfinite(m))
        throw std::invalid_argument("density: mass must be finite and >= 0");
      sum += m;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw std::invalid_argument("density: mass must sum to 1");
  }
};

namespace detail {

/// Edge e_i of the Voronoi cells, i in [0, G]; cell i spans [e_i, e_{i+1}].
inline double cell_edge(int G, int i) {
  if (i <= 0) return 0.0;
  if (i >= G) return 1.0;
  return (2.0 * i - 1.0) / (2.0 * (G - 1));
}

/// Index of the cell containing position p (Voronoi cell of nearest node).
inline int cell_of_position(int G, double p) {
  const int k = static_cast<int>(std::floor(p * (G - 1) + 0.5));
  return std::clamp(k, 0, G - 1);
}

/// Cumulative masses rescaled so the final entry is exactly 1.
inline std::vector<double> normalized_cum(const std::vector<double>& mass) {
  std::vector<double> cum(mass.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    acc += mass[i];
    cum[i] = acc;
  }
  if (acc <= 0.0) throw std::invalid_argument("density: zero total mass");
  for (double& c : cum) c /= acc;
  cum.back() = 1.0;
  return cum;
}

/// Position of quantile level q inside cell `i` of a density with
/// normalized cumulative masses `cum`.
inline double quantile_in_cell(const std::vector<double>& cum, int i,
                               double q) {
  const int G = static_cast<int>(cum.size());
  const double before = i > 0 ? cum[i - 1] : 0.0;
  const double m = cum[i] - before;
  const double left = cell_edge(G, i);
  if (m <= 0.0) return left;
  const double t = std::clamp((q - before) / m, 0.0, 1.0);
  return left + t * (cell_edge(G, i + 1) - left);
}

/// Sweeps the merged level breakpoints of two densities. Within each
/// segment both quantile functions are linear; visit(q0, q1, a0, a1, b0, b1)
/// receives the segment and the quantile positions at its endpoints.
template <typename Visit>
void sweep_quantiles(const DensityOnGrid& a, const DensityOnGrid& b,
                     Visit&& visit) {
  const auto ca = normalized_cum(a.mass);
  const auto cb = normalized_cum(b.mass);
  std::vector<double> levels;
  levels.reserve(ca.size() + cb.size() + 2);
  levels.push_back(0.0);
  for (double v : ca)
    if (v > 0.0 && v < 1.0) levels.push_back(v);
  for (double v : cb)
    if (v > 0.0 && v < 1.0) levels.push_back(v);
  levels.push_back(1.0);
  std::sort(levels.begin(), levels.end());

  double q0 = 0.0;
  for (std::size_t s = 1; s < levels.size(); ++s) {
    const double q1 = levels[s];
    if (q1 <= q0) continue;
    const double qm = 0.5 * (q0 + q1);
    const int ia = std::clamp(
        static_cast<int>(std::upper_bound(ca.begin(), ca.end(), qm) -
                         ca.begin()),
        0, static_cast<int>(ca.size()) - 1);
    const int ib = std::clamp(
        static_cast<int>(std::upper_bound(cb.begin(), cb.end(), qm) -
                         cb.begin()),
        0, static_cast<int>(cb.size()) - 1);
    visit(q0, q1, quantile_in_cell(ca, ia, q0), quantile_in_cell(ca, ia, q1),
          quantile_in_cell(cb, ib, q0), quantile_in_cell(cb, ib, q1));
    q0 = q1;
  }
}

}  // namespace detail

/// Normalizes one lead to a density over [0,1]: shift by the per-lead
/// minimum, add a floor of eta*range/L, normalize to unit mass. A constant
/// lead maps to the uniform density (floor only, scale 0).
template <typename T>
DensityOnGrid to_density(std::span<T> lead) {
  const int n = static_cast<int>(lead.size());
  if (n < 2) throw std::invalid_argument("to_density: need >= 2 samples");
  double lo = lead[0], hi = lead[0];
  for (T v : lead) {
    if (!std::isfinite(static_cast<double>(v)))
      throw std::invalid_argument("to_density: non-finite sample");
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
  }
  DensityOnGrid d;
  d.mass.resize(n);
  d.offset = lo;
  const double range = hi - lo;
  if (range <= 0.0) {
    std::fill(d.mass.begin(), d.mass.end(), 1.0 / n);
    d.scale = 0.0;
    return d;
  }
  const double floor_term = kDensityFloorEta * range / n;
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    d.mass[i] = static_cast<double>(lead[i]) - lo + floor_term;
    z += d.mass[i];
  }
  for (double& m : d.mass) m /= z;
  d.scale = z;
  return d;
}

inline DensityOnGrid to_density(const std::vector<double>& lead) {
  return to_density(std::span<const double>(lead));
}

/// Squared-distance transport cost between two densities on [0,1], computed
/// exactly as the integral of (F^-1(q) - G^-1(q))^2 over levels q. Grids may
/// differ in length.
inline double w2_1d(const DensityOnGrid& mu, const DensityOnGrid& nu) {
  mu.validate();
  nu.validate();
  double cost = 0.0;
  detail::sweep_quantiles(
      mu, nu, [&](double q0, double q1, double a0, double a1, double b0,
                  double b1) {
        const double d0 = a0 - b0;
        const double d1 = a1 - b1;
        const double dm = 0.5 * (d0 + d1);
        // exact integral of the quadratic (Simpson)
        cost += (q1 - q0) * (d0 * d0 + 4.0 * dm * dm + d1 * d1) / 6.0;
      });
  return std::max(cost, 0.0);
}

/// Displacement interpolation at parameter alpha: the quantile function of
/// the result is (1-alpha)*F^-1 + alpha*G^-1, re-binned exactly onto mu's
/// grid. Offset and scale interpolate linearly.
inline DensityOnGrid quantile_interpolate(const DensityOnGrid& mu,
                                          const DensityOnGrid& nu,
                                          double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("quantile_interpolate: alpha out of [0,1]");
  mu.validate();
  nu.validate();
  const int G = mu.size();
  std::vector<double> cell_mass(G, 0.0);
  std::vector<double> cell_pos(G, 0.0);  // mass-weighted position sums

  auto deposit = [&](double p0, double p1, double mass) {
    if (mass <= 0.0) return;
    p0 = std::clamp(p0, 0.0, 1.0);
    p1 = std::clamp(p1, 0.0, 1.0);
    if (p1 - p0 <= 1e-15) {
      const int k = detail::cell_of_position(G, 0.5 * (p0 + p1));
      cell_mass[k] += mass;
      cell_pos[k] += mass * 0.5 * (p0 + p1);
      return;
    }
    int k = detail::cell_of_position(G, p0);
    while (k < G && detail::cell_edge(G, k) < p1) {
      const double lo = std::max(p0, detail::cell_edge(G, k));
      const double hi = std::min(p1, detail::cell_edge(G, k + 1));
      if (hi > lo) {
        const double piece = mass * (hi - lo) / (p1 - p0);
        cell_mass[k] += piece;
        cell_pos[k] += piece * 0.5 * (lo + hi);
      }
      ++k;
    }
  };

  detail::sweep_quantiles(mu, nu,
                          [&](double q0, double q1, double a0, double a1,
                              double b0, double b1) {
                            deposit((1.0 - alpha) * a0 + alpha * b0,
                                    (1.0 - alpha) * a1 + alpha * b1, q1 - q0);
                          });

  // Re-reading a cell as uniform puts its mass at the cell midpoint; shift
  // the mean deviation into a neighbor so each cell's deposited barycenter
  // is preserved. This keeps the displacement identity first-order exact
  // while leaving exactly representable inputs (alpha 0 or 1) untouched.
  std::vector<double> out = cell_mass;
  for (int k = 0; k < G; ++k) {
    if (cell_mass[k] <= 0.0) continue;
    const double center =
        0.5 * (detail::cell_edge(G, k) + detail::cell_edge(G, k + 1));
    const double dev = cell_pos[k] / cell_mass[k] - center;
    if (dev > 0.0 && k + 1 < G) {
      const double next_center =
          0.5 * (detail::cell_edge(G, k + 1) + detail::cell_edge(G, k + 2));
      const double moved =
          std::min(cell_mass[k], cell_mass[k] * dev / (next_center - center));
      out[k] -= moved;
      out[k + 1] += moved;
    } else if (dev < 0.0 && k > 0) {
      const double prev_center =
          0.5 * (detail::cell_edge(G, k - 1) + detail::cell_edge(G, k));
      const double moved =
          std::min(cell_mass[k], cell_mass[k] * (-dev) / (center - prev_center));
      out[k] -= moved;
      out[k - 1] += moved;
    }
  }

  double sum = 0.0;
  for (double m : out) sum += m;
  if (sum <= 0.0)
    throw std::runtime_error("quantile_interpolate: lost all mass");
  for (double& m : out) m /= sum;

  DensityOnGrid d;
  d.mass = std::move(out);
  d.offset = (1.0 - alpha) * mu.offset + alpha * nu.offset;
  d.scale = (1.0 - alpha) * mu.scale + alpha * nu.scale;
  return d;
}

/// Inverts per-lead densities back to a beat: mass resampled to target_len
/// node positions, un-normalized by scale*G/target_len, shifted by offset.
inline BeatTensor density_to_beat(const std::vector<DensityOnGrid>& leads,
                                  int target_len, double sample_rate = 0.0) {
  if (leads.empty())
    throw std::invalid_argument("density_to_beat: no leads");
  if (target_len < 2)
    throw std::invalid_argument("density_to_beat: target_len must be >= 2");
  const int G = leads.front().size();
  for (const auto& d : leads) {
    d.validate();
    if (d.size() != G)
      throw std::invalid_argument("density_to_beat: inconsistent grids");
  }
  BeatTensor beat;
  beat.n_leads = static_cast<int>(leads.size());
  beat.beat_len = target_len;
  beat.sample_rate = sample_rate;
  beat.samples.resize(static_cast<std::size_t>(beat.n_leads) * target_len);
  const double gain = static_cast<double>(G) / target_len;
  for (int l = 0; l < beat.n_leads; ++l) {
    const auto& d = leads[l];
    for (int j = 0; j < target_len; ++j) {
      const double u = static_cast<double>(j) / (target_len - 1) * (G - 1);
      const int i0 = std::min(static_cast<int>(u), G - 2);
      const double t = u - i0;
      const double val = (1.0 - t) * d.mass[i0] + t * d.mass[i0 + 1];
      beat.samples[static_cast<std::size_t>(l) * target_len + j] =
          static_cast<float>(val * d.scale * gain + d.offset);
    }
  }
  return beat;
}

}  // namespace ecgot
