#pragma once

// Geodesic data augmentation: minibatch entropic couplings under the
// beat-shape metric select source/target pairs, which are then interpolated
// per lead along the 1-D Wasserstein geodesic. Linear mixup, random
// oversampling, and a SMOTE-like interpolator serve as baselines.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgot/beat.hpp"
#include "ecgot/density.hpp"
#include "ecgot/metric.hpp"
#include "ecgot/ot.hpp"
#include "ecgot/rng.hpp"

namespace ecgot {

enum class PairingMode { kSampleProportional, kRowArgmax };
enum class LabelPolicy { kTarget, kSource };

struct AugmentSpec {
  int source_class = 0;
  int target_class = 1;
  double alpha_min = 0.5;
  double alpha_max = 0.9;
  int batch_source = 32;
  int batch_target = 32;
  int n_augment = 1;
  // Minibatch beat-shape costs can be low-contrast, which slows the scaling
  // iteration. Couplings only steer pair sampling, so a 1e-5 marginal
  // tolerance is ample; the budget is raised to cover the slow cases.
  SinkhornParams sinkhorn{.lambda = 0.0, .tol = 1e-5, .max_iter = 50000};
  PairingMode pairing = PairingMode::kSampleProportional;
  LabelPolicy label_policy = LabelPolicy::kTarget;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(alpha_min >= 0.0 && alpha_min <= alpha_max && alpha_max <= 1.0))
      throw std::invalid_argument("augment: need 0 <= alpha_min <= alpha_max <= 1");
    if (batch_source < 1 || batch_target < 1)
      throw std::invalid_argument("augment: batch sizes must be >= 1");
    if (n_augment < 1)
      throw std::invalid_argument("augment: n_augment must be >= 1");
  }
};

namespace detail {

inline void check_same_shape(const BeatTensor& a, const BeatTensor& b,
                             const char* who) {
  if (a.n_leads != b.n_leads || a.beat_len != b.beat_len)
    throw std::invalid_argument(std::string(who) + ": beat shape mismatch");
}

// First `count` entries of a seeded partial Fisher-Yates shuffle of 0..n-1.
inline std::vector<int> sample_indices(int n, int count, SplitMix64& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  count = std::min(count, n);
  for (int t = 0; t < count; ++t) {
    const int swap_with =
        t + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - t)));
    std::swap(idx[t], idx[swap_with]);
  }
  idx.resize(count);
  return idx;
}

// lead-summed density distance without re-deriving densities
inline double density_batch_distance(const std::vector<DensityOnGrid>& a,
                                     const std::vector<DensityOnGrid>& b) {
  return density_distance(a, b, {});
}

}  // namespace detail

/// Draws n_augment beats. Each draw is fully determined by (seed, draw
/// index): a fresh source/target minibatch, one entropic coupling, a pair
/// (i, j) chosen from the coupling row per `pairing`, a uniform alpha in
/// [alpha_min, alpha_max], and per-lead quantile interpolation inverted back
/// to a beat. When `full_cost` (a source x target beat-shape matrix) is
/// given, minibatch costs are sliced from it instead of recomputed.
inline std::vector<BeatTensor> geodesic_augment(
    std::span<const BeatTensor> source, std::span<const BeatTensor> target,
    const AugmentSpec& spec, const CostMatrix* full_cost = nullptr) {
  spec.validate();
  if (source.empty() || target.empty())
    throw std::invalid_argument("augment: empty batch");
  detail::check_same_shape(source.front(), target.front(), "augment");
  if (full_cost &&
      (full_cost->m.rows() != static_cast<Eigen::Index>(source.size()) ||
       full_cost->m.cols() != static_cast<Eigen::Index>(target.size())))
    throw std::invalid_argument("augment: cached cost shape mismatch");

  // densities are reused across draws
  std::vector<std::vector<DensityOnGrid>> src_dens(source.size());
  std::vector<std::vector<DensityOnGrid>> tgt_dens(target.size());
  for (std::size_t i = 0; i < source.size(); ++i)
    src_dens[i] = beat_densities(source[i]);
  for (std::size_t j = 0; j < target.size(); ++j)
    tgt_dens[j] = beat_densities(target[j]);

  const int beat_len = source.front().beat_len;
  const int n_leads = source.front().n_leads;
  std::vector<BeatTensor> out;
  out.reserve(spec.n_augment);

  for (int draw = 0; draw < spec.n_augment; ++draw) {
    SplitMix64 rng(substream_seed(spec.seed, static_cast<std::uint64_t>(draw)));
    const auto src_batch = detail::sample_indices(
        static_cast<int>(source.size()), spec.batch_source, rng);
    const auto tgt_batch = detail::sample_indices(
        static_cast<int>(target.size()), spec.batch_target, rng);
    const int bs = static_cast<int>(src_batch.size());
    const int bt = static_cast<int>(tgt_batch.size());

    CostMatrix cost;
    cost.metric_tag = "beat-shape";
    cost.m.resize(bs, bt);
    for (int i = 0; i < bs; ++i)
      for (int j = 0; j < bt; ++j)
        cost.m(i, j) =
            full_cost ? full_cost->m(src_batch[i], tgt_batch[j])
                      : detail::density_batch_distance(
                            src_dens[src_batch[i]], tgt_dens[tgt_batch[j]]);

    const auto coupling = sinkhorn(cost, DiscreteMeasure::uniform(bs),
                                   DiscreteMeasure::uniform(bt), spec.sinkhorn);
    if (!coupling.converged)
      throw std::runtime_error(
          "augment: sinkhorn did not converge (marginal violation " +
          std::to_string(coupling.marginal_violation) + ")");

    const int i0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(bs)));
    int j0 = 0;
    if (spec.pairing == PairingMode::kRowArgmax) {
      coupling.plan.m.row(i0).maxCoeff(&j0);
    } else {
      const double row_sum = coupling.plan.m.row(i0).sum();
      const double u = rng.uniform() * row_sum;
      double acc = 0.0;
      j0 = bt - 1;
      for (int j = 0; j < bt; ++j) {
        acc += coupling.plan.m(i0, j);
        if (u < acc) {
          j0 = j;
          break;
        }
      }
    }

    const double alpha = spec.alpha_min == spec.alpha_max
                             ? spec.alpha_min
                             : rng.uniform(spec.alpha_min, spec.alpha_max);
    const auto& src_beat = source[src_batch[i0]];
    const auto& tgt_beat = target[tgt_batch[j0]];

    std::vector<DensityOnGrid> mixed(n_leads);
    for (int l = 0; l < n_leads; ++l)
      mixed[l] = quantile_interpolate(src_dens[src_batch[i0]][l],
                                      tgt_dens[tgt_batch[j0]][l], alpha);
    BeatTensor beat =
        density_to_beat(mixed, beat_len, src_beat.sample_rate);
    beat.label = spec.label_policy == LabelPolicy::kTarget
                     ? spec.target_class
                     : spec.source_class;
    beat.source_id = "aug:" + std::to_string(draw) + ":" + src_beat.source_id +
                     "->" + tgt_beat.source_id;
    out.push_back(std::move(beat));
  }
  return out;
}

/// Plain signal-space interpolation (the l2 baseline the shape metric is
/// contrasted against): samples = (1-alpha)*x + alpha*y. The label follows
/// the nearer endpoint (ties toward y).
inline BeatTensor linear_mixup(const BeatTensor& x, const BeatTensor& y,
                               double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("mixup: alpha out of [0,1]");
  detail::check_same_shape(x, y, "mixup");
  BeatTensor out = x;
  for (std::size_t i = 0; i < x.samples.size(); ++i)
    out.samples[i] = static_cast<float>((1.0 - alpha) * x.samples[i] +
                                        alpha * y.samples[i]);
  out.label = alpha >= 0.5 ? y.label : x.label;
  out.source_id = "mixup:" + x.source_id + "->" + y.source_id;
  return out;
}

/// Duplicates uniformly sampled members of each class until the requested
/// per-class counts are met. Classes absent from target_counts are left
/// unchanged.
inline std::vector<BeatTensor> random_oversample(
    std::span<const BeatTensor> dataset,
    const std::map<int, std::size_t>& target_counts, std::uint64_t seed) {
  std::map<int, std::vector<int>> by_class;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    by_class[dataset[i].label].push_back(static_cast<int>(i));

  std::vector<BeatTensor> out(dataset.begin(), dataset.end());
  for (const auto& [cls, want] : target_counts) {
    const auto it = by_class.find(cls);
    const std::size_t have = it == by_class.end() ? 0 : it->second.size();
    if (want < have)
      throw std::invalid_argument(
          "oversample: target below current count for class " +
          std::to_string(cls));
    if (have == 0 && want > 0)
      throw std::invalid_argument("oversample: class " + std::to_string(cls) +
                                  " has no members");
    SplitMix64 rng(substream_seed(seed, static_cast<std::uint64_t>(cls)));
    for (std::size_t k = have; k < want; ++k)
      out.push_back(dataset[it->second[rng.below(have)]]);
  }
  return out;
}

/// SMOTE-style interpolation: each new beat lies between a class member and
/// one of its k nearest neighbors in flattened signal space, at a uniform
/// position along the segment.
inline std::vector<BeatTensor> smote_like(std::span<const BeatTensor> dataset,
                                          int class_id, int k, int n_new,
                                          std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("smote: k must be >= 1");
  if (n_new < 0) throw std::invalid_argument("smote: n_new must be >= 0");
  std::vector<int> members;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (dataset[i].label == class_id) members.push_back(static_cast<int>(i));
  const int m = static_cast<int>(members.size());
  if (m < k + 1)
    throw std::invalid_argument("smote: class needs at least k+1 members");
  for (int idx : members)
    detail::check_same_shape(dataset[members[0]], dataset[idx], "smote");

  // brute-force kNN in flattened signal space
  std::vector<std::vector<int>> neighbors(m);
  for (int a = 0; a < m; ++a) {
    std::vector<std::pair<double, int>> dist;
    dist.reserve(m - 1);
    for (int b = 0; b < m; ++b) {
      if (a == b) continue;
      double d2 = 0.0;
      const auto& xa = dataset[members[a]].samples;
      const auto& xb = dataset[members[b]].samples;
      for (std::size_t t = 0; t < xa.size(); ++t) {
        const double d = static_cast<double>(xa[t]) - xb[t];
        d2 += d * d;
      }
      dist.push_back({d2, b});
    }
    std::sort(dist.begin(), dist.end());
    for (int t = 0; t < k; ++t) neighbors[a].push_back(dist[t].second);
  }

  std::vector<BeatTensor> out;
  out.reserve(n_new);
  for (int draw = 0; draw < n_new; ++draw) {
    SplitMix64 rng(substream_seed(seed, static_cast<std::uint64_t>(draw)));
    const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
    const int b =
        neighbors[a][rng.below(static_cast<std::uint64_t>(k))];
    const double lambda = rng.uniform();
    const auto& xa = dataset[members[a]];
    const auto& xb = dataset[members[b]];
    BeatTensor beat = xa;
    for (std::size_t t = 0; t < beat.samples.size(); ++t)
      beat.samples[t] = static_cast<float>(
          xa.samples[t] + lambda * (static_cast<double>(xb.samples[t]) -
                                    xa.samples[t]));
    beat.label = class_id;
    beat.source_id = "smote:" + std::to_string(draw) + ":" + xa.source_id;
    out.push_back(std::move(beat));
  }
  return out;
}

}  // namespace ecgot
