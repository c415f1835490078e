#pragma once

// Differentiable softmax-linear classifier over feature vectors with exact
// gradients, an l-infinity PGD attack in standardized feature space, and
// rank-based evaluation metrics.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace ecgot {

struct ClassifierModel {
  Eigen::MatrixXd weights;       // n_classes x dim
  Eigen::VectorXd bias;          // n_classes
  Eigen::VectorXd feature_mean;  // dim
  Eigen::VectorXd feature_std;   // dim, clamped at 1e-8

  int n_classes() const { return static_cast<int>(weights.rows()); }
  int dim() const { return static_cast<int>(weights.cols()); }

  Eigen::MatrixXd standardize(const Eigen::MatrixXd& x) const {
    if (x.cols() != dim())
      throw std::invalid_argument("classifier: feature dimension mismatch");
    return (x.rowwise() - feature_mean.transpose()).array().rowwise() /
           feature_std.transpose().array();
  }
};

struct TrainParams {
  double lr = 0.1;
  double l2 = 1e-4;
  int epochs = 500;
  std::uint64_t seed = 0;  // recorded for provenance; training is
                           // deterministic from a zero initialization
};

struct AttackSpec {
  double epsilon = 0.0;  // l-inf radius in standardized feature units
  int steps = 40;
  double step_size = 0.0;  // <= 0 resolves to 2.5 * epsilon / steps
  std::uint64_t seed = 0;

  double resolve_step() const {
    if (step_size > 0.0) return step_size;
    return steps > 0 ? std::max(2.5 * epsilon / steps, 1e-12) : 1e-12;
  }

  void validate() const {
    if (epsilon < 0.0) throw std::invalid_argument("attack: epsilon < 0");
    if (steps < 1) throw std::invalid_argument("attack: steps must be >= 1");
    if (resolve_step() <= 0.0)
      throw std::invalid_argument("attack: step size must be > 0");
  }
};

struct MetricsReport {
  double auroc_macro = 0.0;
  double f1_macro = 0.0;
  std::vector<double> per_class_auroc;
  std::vector<double> per_class_f1;
  std::vector<std::vector<long>> confusion;
  double epsilon = 0.0;
};

namespace detail {

inline Eigen::MatrixXd softmax_rows(Eigen::MatrixXd logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - mx).exp();
    logits.row(i) /= logits.row(i).sum();
  }
  return logits;
}

inline void check_labels(const std::vector<int>& y, int n_classes,
                         const char* who) {
  for (int v : y)
    if (v < 0 || v >= n_classes)
      throw std::invalid_argument(std::string(who) + ": label outside class set");
}

inline Eigen::MatrixXd logits_std(const ClassifierModel& m,
                                  const Eigen::MatrixXd& xs) {
  return (xs * m.weights.transpose()).rowwise() + m.bias.transpose();
}

// per-sample cross entropy on standardized inputs
inline Eigen::VectorXd ce_per_sample(const ClassifierModel& m,
                                     const Eigen::MatrixXd& xs,
                                     const std::vector<int>& y) {
  const Eigen::MatrixXd p = softmax_rows(logits_std(m, xs));
  Eigen::VectorXd out(xs.rows());
  for (Eigen::Index i = 0; i < xs.rows(); ++i)
    out[i] = -std::log(std::max(p(i, y[i]), 1e-300));
  return out;
}

}  // namespace detail

/// Largest plain-GD step known to keep the regularized cross-entropy
/// non-increasing: 2 / (0.5 * lambda_max(Xs' Xs / N) + l2). The 0.5 factor
/// bounds the softmax Hessian.
inline double stable_learning_rate_bound(const Eigen::MatrixXd& xs,
                                         double l2) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(xs.cols()).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXd w = xs.transpose() * (xs * v) / xs.rows();
    lambda = w.norm();
    if (lambda <= 0.0) break;
    v = w / lambda;
  }
  return 2.0 / (0.5 * lambda + l2);
}

struct TrainResult {
  ClassifierModel model;
  std::vector<double> loss_history;  // epochs + 1 entries
};

/// Full-batch gradient descent on mean cross-entropy + 0.5*l2*|W|^2 over
/// standardized features. The objective is convex, so training starts from
/// zero weights and is fully deterministic.
inline TrainResult train_softmax(const Eigen::MatrixXd& x,
                                 const std::vector<int>& y,
                                 const TrainParams& params) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (n == 0 || static_cast<Eigen::Index>(y.size()) != n)
    throw std::invalid_argument("train: shape mismatch");
  if (!x.allFinite())
    throw std::invalid_argument("train: non-finite features");
  const int n_classes = *std::max_element(y.begin(), y.end()) + 1;
  detail::check_labels(y, n_classes, "train");
  {
    std::vector<bool> seen(n_classes, false);
    for (int v : y) seen[v] = true;
    int present = 0;
    for (bool s : seen) present += s;
    if (present < 2)
      throw std::invalid_argument("train: need at least 2 classes present");
  }
  if (params.lr <= 0.0 || params.epochs < 1 || params.l2 < 0.0)
    throw std::invalid_argument("train: bad hyperparameters");

  ClassifierModel model;
  model.feature_mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - model.feature_mean.transpose();
  model.feature_std =
      (centered.array().square().colwise().sum() / static_cast<double>(n))
          .sqrt()
          .max(1e-8)
          .matrix();
  const Eigen::MatrixXd xs =
      centered.array().rowwise() / model.feature_std.transpose().array();

  model.weights = Eigen::MatrixXd::Zero(n_classes, d);
  model.bias = Eigen::VectorXd::Zero(n_classes);

  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, n_classes);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, y[i]) = 1.0;

  TrainResult result;
  result.loss_history.reserve(params.epochs + 1);
  auto loss_of = [&](const Eigen::MatrixXd& p) {
    double ce = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      ce -= std::log(std::max(p(i, y[i]), 1e-300));
    return ce / static_cast<double>(n) +
           0.5 * params.l2 * model.weights.squaredNorm();
  };

  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    const Eigen::MatrixXd p =
        detail::softmax_rows(detail::logits_std(model, xs));
    result.loss_history.push_back(loss_of(p));
    const Eigen::MatrixXd dz = (p - onehot) / static_cast<double>(n);
    const Eigen::MatrixXd gw =
        dz.transpose() * xs + params.l2 * model.weights;
    const Eigen::VectorXd gb = dz.colwise().sum();
    model.weights -= params.lr * gw;
    model.bias -= params.lr * gb;
  }
  result.loss_history.push_back(
      loss_of(detail::softmax_rows(detail::logits_std(model, xs))));
  result.model = std::move(model);
  return result;
}

/// Class probabilities for raw (unstandardized) feature rows.
inline Eigen::MatrixXd predict_proba(const ClassifierModel& model,
                                     const Eigen::MatrixXd& x) {
  return detail::softmax_rows(detail::logits_std(model, model.standardize(x)));
}

/// l-infinity PGD on the per-sample cross-entropy, run in standardized
/// feature space with the best (maximum-loss) iterate kept per sample.
/// Returns raw-space features; the standardized perturbation never exceeds
/// spec.epsilon coordinate-wise.
inline Eigen::MatrixXd pgd_attack(const ClassifierModel& model,
                                  const Eigen::MatrixXd& x,
                                  const std::vector<int>& y,
                                  const AttackSpec& spec) {
  spec.validate();
  if (x.rows() != static_cast<Eigen::Index>(y.size()))
    throw std::invalid_argument("pgd: shape mismatch");
  detail::check_labels(y, model.n_classes(), "pgd");
  const Eigen::MatrixXd xs = model.standardize(x);
  const Eigen::Index n = x.rows();

  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(n, x.cols());
  Eigen::MatrixXd best_delta = delta;
  Eigen::VectorXd best_loss = detail::ce_per_sample(model, xs, y);
  const double step = spec.resolve_step();

  for (int it = 0; it < spec.steps && spec.epsilon > 0.0; ++it) {
    const Eigen::MatrixXd p =
        detail::softmax_rows(detail::logits_std(model, xs + delta));
    Eigen::MatrixXd dz = p;
    for (Eigen::Index i = 0; i < n; ++i) dz(i, y[i]) -= 1.0;
    const Eigen::MatrixXd grad = dz * model.weights;  // d loss_i / d x_i
    delta += step * grad.array().sign().matrix();
    delta = delta.cwiseMax(-spec.epsilon).cwiseMin(spec.epsilon);
    const Eigen::VectorXd loss = detail::ce_per_sample(model, xs + delta, y);
    for (Eigen::Index i = 0; i < n; ++i)
      if (loss[i] > best_loss[i]) {
        best_loss[i] = loss[i];
        best_delta.row(i) = delta.row(i);
      }
  }
  return x + (best_delta.array().rowwise() *
              model.feature_std.transpose().array())
                 .matrix();
}

struct AurocResult {
  std::vector<double> per_class;  // NaN where a class lacks pos or neg
  double macro = std::numeric_limits<double>::quiet_NaN();
};

/// One-vs-rest AUROC with midrank tie handling (Mann-Whitney). Classes
/// without both positives and negatives are reported NaN and excluded from
/// the macro average.
inline AurocResult auroc(const Eigen::MatrixXd& scores,
                         const std::vector<int>& y) {
  if (scores.rows() != static_cast<Eigen::Index>(y.size()))
    throw std::invalid_argument("auroc: shape mismatch");
  const int n_classes = static_cast<int>(scores.cols());
  detail::check_labels(y, n_classes, "auroc");
  const Eigen::Index n = scores.rows();

  AurocResult result;
  result.per_class.assign(n_classes,
                          std::numeric_limits<double>::quiet_NaN());
  double macro_sum = 0.0;
  int macro_count = 0;
  std::vector<int> order(n);
  std::vector<double> ranks(n);
  for (int k = 0; k < n_classes; ++k) {
    long n_pos = 0;
    for (int v : y) n_pos += v == k;
    const long n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) continue;

    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return scores(a, k) < scores(b, k);
    });
    for (Eigen::Index i = 0; i < n;) {
      Eigen::Index j = i;
      while (j < n && scores(order[j], k) == scores(order[i], k)) ++j;
      const double midrank = 0.5 * static_cast<double>(i + j + 1);
      for (Eigen::Index t = i; t < j; ++t) ranks[order[t]] = midrank;
      i = j;
    }
    double rank_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (y[i] == k) rank_sum += ranks[i];
    const double u =
        rank_sum - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
    result.per_class[k] = u / (static_cast<double>(n_pos) * n_neg);
    macro_sum += result.per_class[k];
    ++macro_count;
  }
  if (macro_count > 0) result.macro = macro_sum / macro_count;
  return result;
}

struct F1Result {
  std::vector<double> per_class;
  double macro = 0.0;
  std::vector<std::vector<long>> confusion;  // [true][predicted]
};

/// Per-class F1 (2PR/(P+R), zero when P+R = 0) and the confusion matrix.
/// The macro average runs over classes present in the truth.
inline F1Result f1_and_confusion(const std::vector<int>& pred,
                                 const std::vector<int>& y, int n_classes) {
  if (pred.size() != y.size())
    throw std::invalid_argument("f1: length mismatch");
  detail::check_labels(pred, n_classes, "f1");
  detail::check_labels(y, n_classes, "f1");

  F1Result result;
  result.confusion.assign(n_classes, std::vector<long>(n_classes, 0));
  for (std::size_t i = 0; i < y.size(); ++i)
    result.confusion[y[i]][pred[i]] += 1;

  result.per_class.assign(n_classes, 0.0);
  double macro_sum = 0.0;
  int macro_count = 0;
  for (int k = 0; k < n_classes; ++k) {
    long tp = result.confusion[k][k];
    long truth = 0, predicted = 0;
    for (int j = 0; j < n_classes; ++j) {
      truth += result.confusion[k][j];
      predicted += result.confusion[j][k];
    }
    const double precision =
        predicted > 0 ? static_cast<double>(tp) / predicted : 0.0;
    const double recall = truth > 0 ? static_cast<double>(tp) / truth : 0.0;
    result.per_class[k] = precision + recall > 0.0
                              ? 2.0 * precision * recall / (precision + recall)
                              : 0.0;
    if (truth > 0) {
      macro_sum += result.per_class[k];
      ++macro_count;
    }
  }
  result.macro = macro_count > 0 ? macro_sum / macro_count : 0.0;
  return result;
}

/// Clean evaluation: probabilities as scores, argmax as predictions.
inline MetricsReport evaluate(const ClassifierModel& model,
                              const Eigen::MatrixXd& x,
                              const std::vector<int>& y, double epsilon = 0.0) {
  const Eigen::MatrixXd proba = predict_proba(model, x);
  std::vector<int> pred(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index arg = 0;
    proba.row(i).maxCoeff(&arg);
    pred[i] = static_cast<int>(arg);
  }
  const auto roc = auroc(proba, y);
  const auto f1 = f1_and_confusion(pred, y, model.n_classes());
  MetricsReport report;
  report.auroc_macro = roc.macro;
  report.f1_macro = f1.macro;
  report.per_class_auroc = roc.per_class;
  report.per_class_f1 = f1.per_class;
  report.confusion = f1.confusion;
  report.epsilon = epsilon;
  return report;
}

struct RobustnessRow {
  double epsilon = 0.0;
  double auroc_macro = 0.0;
  std::vector<double> per_class_auroc;
};

/// Attacks the model at each epsilon (rows ordered as given) and evaluates
/// AUROC on the adversarial features. Epsilon zero reduces to the clean
/// evaluation exactly.
inline std::vector<RobustnessRow> robustness_sweep(
    const ClassifierModel& model, const Eigen::MatrixXd& x,
    const std::vector<int>& y, const std::vector<double>& epsilons,
    AttackSpec attack_template = {}) {
  std::vector<RobustnessRow> rows;
  rows.reserve(epsilons.size());
  for (double eps : epsilons) {
    AttackSpec spec = attack_template;
    spec.epsilon = eps;
    const Eigen::MatrixXd x_adv = pgd_attack(model, x, y, spec);
    const auto roc = auroc(predict_proba(model, x_adv), y);
    rows.push_back({eps, roc.macro, roc.per_class});
  }
  return rows;
}

}  // namespace ecgot
