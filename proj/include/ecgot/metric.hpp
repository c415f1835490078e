#pragma once

// Beat-shape ground metric: each lead is normalized to a density over time
// and compared with the closed-form 1-D squared-distance transport cost;
// leads combine by (optionally weighted) summation.

#include <span>
#include <stdexcept>
#include <vector>

#include "ecgot/beat.hpp"
#include "ecgot/density.hpp"
#include "ecgot/ot.hpp"

namespace ecgot {

inline std::vector<DensityOnGrid> beat_densities(const BeatTensor& beat) {
  std::vector<DensityOnGrid> out;
  out.reserve(beat.n_leads);
  for (int l = 0; l < beat.n_leads; ++l) out.push_back(to_density(beat.lead(l)));
  return out;
}

namespace detail {

inline double density_distance(const std::vector<DensityOnGrid>& x,
                               const std::vector<DensityOnGrid>& y,
                               std::span<const double> lead_weights) {
  if (x.size() != y.size())
    throw std::invalid_argument("beat_distance: lead count mismatch");
  if (!lead_weights.empty() && lead_weights.size() != x.size())
    throw std::invalid_argument("beat_distance: lead weight count mismatch");
  double cost = 0.0;
  for (std::size_t l = 0; l < x.size(); ++l) {
    const double w = lead_weights.empty() ? 1.0 : lead_weights[l];
    cost += w * w2_1d(x[l], y[l]);
  }
  return cost;
}

}  // namespace detail

/// Shape cost between two beats: sum over leads of the per-lead density
/// transport cost (squared-distance, un-rooted).
inline double beat_distance(const BeatTensor& x, const BeatTensor& y,
                            std::span<const double> lead_weights = {}) {
  if (x.n_leads != y.n_leads)
    throw std::invalid_argument("beat_distance: lead count mismatch");
  return detail::density_distance(beat_densities(x), beat_densities(y),
                                  lead_weights);
}

/// All pairwise beat distances between two batches. Densities are computed
/// once per beat; entries are independent, so any parallel schedule yields
/// the same matrix.
inline CostMatrix pairwise_cost(std::span<const BeatTensor> batch_a,
                                std::span<const BeatTensor> batch_b,
                                std::span<const double> lead_weights = {}) {
  if (batch_a.empty() || batch_b.empty())
    throw std::invalid_argument("pairwise_cost: empty batch");
  const int leads = batch_a.front().n_leads;
  for (const auto& b : batch_a)
    if (b.n_leads != leads)
      throw std::invalid_argument("pairwise_cost: mixed lead counts");
  for (const auto& b : batch_b)
    if (b.n_leads != leads)
      throw std::invalid_argument("pairwise_cost: mixed lead counts");

  std::vector<std::vector<DensityOnGrid>> da, db;
  da.reserve(batch_a.size());
  db.reserve(batch_b.size());
  for (const auto& b : batch_a) da.push_back(beat_densities(b));
  for (const auto& b : batch_b) db.push_back(beat_densities(b));

  CostMatrix cost;
  cost.metric_tag = "beat-shape";
  cost.m.resize(static_cast<Eigen::Index>(batch_a.size()),
                static_cast<Eigen::Index>(batch_b.size()));
  for (std::size_t i = 0; i < batch_a.size(); ++i)
    for (std::size_t j = 0; j < batch_b.size(); ++j)
      cost.m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          detail::density_distance(da[i], db[j], lead_weights);
  return cost;
}

}  // namespace ecgot
