#include "rulescope/anomaly.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "rulescope/error.h"

namespace rulescope {
namespace {

void SoftmaxRowsInPlace(Eigen::MatrixXd& logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - top).exp().matrix();
    logits.row(i) /= logits.row(i).sum();
  }
}

}  // namespace

LogisticModel::LogisticModel(Eigen::MatrixXd weights, Eigen::VectorXd bias)
    : weights_(std::move(weights)), bias_(std::move(bias)) {
  if (weights_.rows() != bias_.size()) throw ValidationError("logistic shape mismatch");
}

LogisticModel LogisticModel::Degenerate(std::size_t num_classes, std::size_t dimension,
                                        std::size_t only_class) {
  LogisticModel model(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_classes),
                                            static_cast<Eigen::Index>(dimension)),
                      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_classes)));
  model.degenerate_ = true;
  model.only_class_ = only_class;
  model.converged_ = true;
  return model;
}

Eigen::VectorXd LogisticModel::Probabilities(std::span<const double> x) const {
  if (x.size() != dimension()) throw ValidationError("feature dimension mismatch");
  Eigen::VectorXd p;
  if (degenerate_) {
    p = Eigen::VectorXd::Zero(bias_.size());
    p[static_cast<Eigen::Index>(only_class_)] = 1.0;
    return p;
  }
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::VectorXd logits = weights_ * v + bias_;
  logits.array() -= logits.maxCoeff();
  p = logits.array().exp().matrix();
  return p / p.sum();
}

double LogisticObjective::Evaluate(const Eigen::VectorXd& params,
                                   Eigen::VectorXd* gradient) const {
  const auto c = static_cast<Eigen::Index>(num_classes);
  const Eigen::Index d = features.cols();
  const Eigen::Index n = features.rows();
  const Eigen::Map<const Eigen::MatrixXd> w(params.data(), c, d);
  const auto b = params.segment(c * d, c);

  Eigen::MatrixXd probs = features * w.transpose();
  probs.rowwise() += b.transpose();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double top = probs.row(i).maxCoeff();
    const double lse = top + std::log((probs.row(i).array() - top).exp().sum());
    loss += lse - probs(i, static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]));
  }
  loss /= static_cast<double>(n);
  loss += 0.5 * l2 * w.squaredNorm();

  if (gradient != nullptr) {
    SoftmaxRowsInPlace(probs);
    for (Eigen::Index i = 0; i < n; ++i) {
      probs(i, static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)])) -= 1.0;
    }
    probs /= static_cast<double>(n);
    gradient->resize(params.size());
    Eigen::Map<Eigen::MatrixXd> gw(gradient->data(), c, d);
    gw = probs.transpose() * features + l2 * w;
    gradient->segment(c * d, c) = probs.colwise().sum().transpose();
  }
  return loss;
}

LogisticObjective MakeLogisticObjective(std::span<const RuleFeatureVector> features,
                                        std::span<const std::size_t> labels,
                                        std::size_t num_classes, double l2) {
  if (features.size() != labels.size()) throw ValidationError("feature/label count mismatch");
  if (features.empty()) throw ValidationError("logistic regression needs at least one rule");
  const std::size_t d = features.front().size();
  if (d == 0) throw ValidationError("feature dimension must be positive");
  LogisticObjective objective;
  objective.features.resize(static_cast<Eigen::Index>(features.size()),
                            static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != d) throw ValidationError("feature dimension mismatch");
    if (labels[i] >= num_classes) throw ValidationError("label out of range");
    for (std::size_t k = 0; k < d; ++k) {
      objective.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          features[i][k];
    }
  }
  objective.labels.assign(labels.begin(), labels.end());
  objective.num_classes = num_classes;
  objective.l2 = l2;
  return objective;
}

LogisticModel FitLogistic(std::span<const RuleFeatureVector> features,
                          std::span<const std::size_t> labels, std::size_t num_classes,
                          const LogisticConfig& config) {
  const LogisticObjective objective =
      MakeLogisticObjective(features, labels, num_classes, config.l2);
  const auto c = static_cast<Eigen::Index>(num_classes);
  const Eigen::Index d = objective.features.cols();

  const std::set<std::size_t> observed(labels.begin(), labels.end());
  if (observed.size() == 1) {
    return LogisticModel::Degenerate(num_classes, static_cast<std::size_t>(d),
                                     *observed.begin());
  }

  Eigen::VectorXd params = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(
      objective.num_parameters()));
  Eigen::VectorXd gradient;
  double loss = objective.Evaluate(params, &gradient);
  double step = 1.0;
  int iter = 0;
  bool converged = false;
  for (; iter < config.max_iters; ++iter) {
    const double gnorm2 = gradient.squaredNorm();
    if (std::sqrt(gnorm2) <= config.tol) {
      converged = true;
      break;
    }
    // Armijo backtracking; the step grows again after each accepted move.
    Eigen::VectorXd candidate;
    double candidate_loss = loss;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      candidate = params - step * gradient;
      candidate_loss = objective.Evaluate(candidate, nullptr);
      if (candidate_loss <= loss - 0.5 * step * gnorm2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    params = std::move(candidate);
    loss = objective.Evaluate(params, &gradient);
    step = std::min(step * 2.0, 1e6);
  }
  if (!converged && iter < config.max_iters) converged = gradient.norm() <= config.tol;

  const Eigen::Map<const Eigen::MatrixXd> w(params.data(), c, d);
  LogisticModel model(Eigen::MatrixXd(w), Eigen::VectorXd(params.segment(c * d, c)));
  model.iterations_ = iter;
  model.converged_ = converged;
  return model;
}

std::vector<double> AnomalyScores(const LogisticModel& model,
                                  std::span<const RuleFeatureVector> features,
                                  std::span<const std::size_t> labels) {
  if (features.size() != labels.size()) throw ValidationError("feature/label count mismatch");
  std::vector<double> scores(features.size());
  for (std::size_t j = 0; j < features.size(); ++j) {
    const Eigen::VectorXd p = model.Probabilities(features[j]);
    scores[j] = std::clamp(1.0 - p[static_cast<Eigen::Index>(labels[j])], 0.0, 1.0);
  }
  return scores;
}

}  // namespace rulescope
