#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "safebo/kernel.hpp"

namespace safebo {

/// Predictive distribution at a single point.
struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

class SingularCovarianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exact Gaussian process with a constant prior mean and fixed
/// hyperparameters. A model is a value: adding data yields a new model
/// that must be conditioned before prediction. Conditioned models are
/// immutable and safe to share across threads.
///
/// Conditioning factorizes (K + v^2 I + jitter I) with a Cholesky
/// decomposition; predictions use triangular solves only. Jitter starts
/// at 1e-10 times the mean diagonal and escalates tenfold up to 1e-4
/// before failing.
class GpModel {
 public:
  GpModel(KernelSpec kernel, double prior_mean, double noise_std, int input_dim);

  /// New model with one more observation; the result is unconditioned
  /// unless the model had no data (the prior is its own conditioning).
  GpModel with_observation(const Eigen::VectorXd& x, double y) const;

  /// New model with the data replaced wholesale (rows of X are points).
  GpModel with_data(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const;

  /// Factorize the noise-augmented Gram matrix. No-op with zero
  /// observations. Throws SingularCovarianceError naming the final
  /// jitter level if escalation runs out.
  GpModel conditioned() const;

  bool is_conditioned() const { return conditioned_; }

  /// Predictive mean and variance at x. Throws std::logic_error when the
  /// model holds data but was never conditioned. Variance is clamped to
  /// [0, k(x, x)].
  Posterior posterior(const Eigen::VectorXd& x) const;

  /// Batched prediction over the rows of X.
  void posterior_batch(const Eigen::MatrixXd& X, Eigen::VectorXd& mean_out,
                       Eigen::VectorXd& var_out) const;

  /// 0.5 * ln det(I + v^-2 K) over the observed inputs; 0 with no data.
  /// Throws std::invalid_argument when the noise level is zero.
  double information_gain() const;

  const KernelSpec& kernel() const { return kernel_; }
  double prior_mean() const { return prior_mean_; }
  double noise_std() const { return noise_std_; }
  int input_dim() const { return input_dim_; }
  Eigen::Index size() const { return y_.size(); }
  const Eigen::MatrixXd& inputs() const { return X_; }
  const Eigen::VectorXd& targets() const { return y_; }
  double jitter_used() const { return jitter_used_; }

 private:
  void check_point(const Eigen::VectorXd& x) const;

  KernelSpec kernel_;
  double prior_mean_;
  double noise_std_;
  int input_dim_;
  Eigen::MatrixXd X_;  // n x d
  Eigen::VectorXd y_;  // n

  bool conditioned_ = true;  // trivially true with no data
  Eigen::MatrixXd chol_;     // lower factor of K + v^2 I + jitter I
  Eigen::VectorXd alpha_;    // (K + v^2 I + jitter I)^-1 (y - prior_mean)
  double jitter_used_ = 0.0;
};

}  // namespace safebo
