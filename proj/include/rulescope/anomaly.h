#ifndef RULESCOPE_ANOMALY_H_
#define RULESCOPE_ANOMALY_H_

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rulescope/features.h"

namespace rulescope {

struct LogisticConfig {
  double l2 = 1e-4;
  int max_iters = 500;
  double tol = 1e-6;
};

// Multinomial softmax regression. Parameters are zero-initialized.
class LogisticModel {
 public:
  LogisticModel() = default;
  LogisticModel(Eigen::MatrixXd weights, Eigen::VectorXd bias);
  static LogisticModel Degenerate(std::size_t num_classes, std::size_t dimension,
                                  std::size_t only_class);

  std::size_t num_classes() const { return static_cast<std::size_t>(bias_.size()); }
  std::size_t dimension() const { return static_cast<std::size_t>(weights_.cols()); }
  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::VectorXd& bias() const { return bias_; }

  // True when all training labels were one class; Probabilities then puts
  // mass 1 on that class.
  bool degenerate() const { return degenerate_; }
  int iterations() const { return iterations_; }
  bool converged() const { return converged_; }

  Eigen::VectorXd Probabilities(std::span<const double> x) const;

 private:
  friend LogisticModel FitLogistic(std::span<const RuleFeatureVector>,
                                   std::span<const std::size_t>, std::size_t,
                                   const LogisticConfig&);

  Eigen::MatrixXd weights_;  // C x D
  Eigen::VectorXd bias_;     // C
  bool degenerate_ = false;
  std::size_t only_class_ = 0;
  int iterations_ = 0;
  bool converged_ = false;
};

// Mean cross-entropy plus (l2 / 2) * ||W||^2; the bias is not penalized.
// Parameters are packed as [vec(W) column-major, b].
struct LogisticObjective {
  Eigen::MatrixXd features;  // N x D
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;
  double l2 = 0.0;

  std::size_t num_parameters() const {
    return num_classes * static_cast<std::size_t>(features.cols()) + num_classes;
  }
  double Evaluate(const Eigen::VectorXd& params, Eigen::VectorXd* gradient) const;
};

LogisticObjective MakeLogisticObjective(std::span<const RuleFeatureVector> features,
                                        std::span<const std::size_t> labels,
                                        std::size_t num_classes, double l2);

LogisticModel FitLogistic(std::span<const RuleFeatureVector> features,
                          std::span<const std::size_t> labels, std::size_t num_classes,
                          const LogisticConfig& config = {});

// s_j = 1 - p(label_j | x_j).
std::vector<double> AnomalyScores(const LogisticModel& model,
                                  std::span<const RuleFeatureVector> features,
                                  std::span<const std::size_t> labels);

}  // namespace rulescope

#endif  // RULESCOPE_ANOMALY_H_
