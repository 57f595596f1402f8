#include "safebo/gp.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace safebo {

GpModel::GpModel(KernelSpec kernel, double prior_mean, double noise_std, int input_dim)
    : kernel_(std::move(kernel)),
      prior_mean_(prior_mean),
      noise_std_(noise_std),
      input_dim_(input_dim),
      X_(0, input_dim),
      y_(0) {
  validate(kernel_);
  if (noise_std < 0.0) throw std::invalid_argument("GpModel: noise_std must be >= 0");
  if (input_dim < 1) throw std::invalid_argument("GpModel: input_dim must be >= 1");
}

void GpModel::check_point(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim_) {
    throw std::invalid_argument("GpModel: point dimension does not match model");
  }
}

GpModel GpModel::with_observation(const Eigen::VectorXd& x, double y) const {
  check_point(x);
  GpModel next = *this;
  const Eigen::Index n = X_.rows();
  next.X_.conservativeResize(n + 1, input_dim_);
  next.X_.row(n) = x.transpose();
  next.y_.conservativeResize(n + 1);
  next.y_[n] = y;
  next.conditioned_ = false;
  next.chol_.resize(0, 0);
  next.alpha_.resize(0);
  return next;
}

GpModel GpModel::with_data(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const {
  if (X.rows() != y.size()) {
    throw std::invalid_argument("GpModel: inputs and targets must have equal length");
  }
  if (X.rows() > 0 && X.cols() != input_dim_) {
    throw std::invalid_argument("GpModel: input dimension does not match model");
  }
  GpModel next = *this;
  next.X_ = X;
  next.y_ = y;
  next.conditioned_ = (y.size() == 0);
  next.chol_.resize(0, 0);
  next.alpha_.resize(0);
  return next;
}

GpModel GpModel::conditioned() const {
  const Eigen::Index n = y_.size();
  if (n == 0) return *this;

  GpModel next = *this;
  Eigen::MatrixXd A = kernel_gram(kernel_, X_);
  A.diagonal().array() += noise_std_ * noise_std_;

  double mean_diag = A.diagonal().mean();
  if (!(mean_diag > 0.0)) mean_diag = 1.0;

  double jitter = 0.0;
  for (double rel = 1e-10; rel <= 1e-4 * 1.0000001; rel *= 10.0) {
    jitter = rel * mean_diag;
    Eigen::MatrixXd Aj = A;
    Aj.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(Aj);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd L = llt.matrixL();
      // LLT does not reliably flag NaN inputs; reject non-finite factors.
      if (!L.allFinite() || (L.diagonal().array() <= 0.0).any()) continue;
      next.chol_ = std::move(L);
      Eigen::VectorXd resid = y_;
      resid.array() -= prior_mean_;
      next.alpha_ = llt.solve(resid);
      next.jitter_used_ = jitter;
      next.conditioned_ = true;
      return next;
    }
  }
  std::ostringstream msg;
  msg << "GpModel: covariance factorization failed at jitter " << jitter
      << " (n = " << n << ")";
  throw SingularCovarianceError(msg.str());
}

Posterior GpModel::posterior(const Eigen::VectorXd& x) const {
  check_point(x);
  const double kss = kernel_eval(kernel_, x, x);
  if (y_.size() == 0) return Posterior{prior_mean_, kss};
  if (!conditioned_) {
    throw std::logic_error("GpModel: posterior requested on an unconditioned model");
  }
  Eigen::VectorXd ks(X_.rows());
  for (Eigen::Index i = 0; i < X_.rows(); ++i) {
    ks[i] = kernel_eval(kernel_, X_.row(i), x);
  }
  const double mean = prior_mean_ + ks.dot(alpha_);
  const Eigen::VectorXd w = chol_.triangularView<Eigen::Lower>().solve(ks);
  double var = kss - w.squaredNorm();
  var = std::min(std::max(var, 0.0), kss);
  return Posterior{mean, var};
}

void GpModel::posterior_batch(const Eigen::MatrixXd& X, Eigen::VectorXd& mean_out,
                              Eigen::VectorXd& var_out) const {
  if (X.cols() != input_dim_) {
    throw std::invalid_argument("GpModel: point dimension does not match model");
  }
  const Eigen::Index m = X.rows();
  mean_out.resize(m);
  var_out.resize(m);
  if (y_.size() == 0) {
    for (Eigen::Index i = 0; i < m; ++i) {
      var_out[i] = kernel_eval(kernel_, X.row(i), X.row(i));
    }
    mean_out.setConstant(prior_mean_);
    return;
  }
  if (!conditioned_) {
    throw std::logic_error("GpModel: posterior requested on an unconditioned model");
  }
  const Eigen::MatrixXd Ks = kernel_cross(kernel_, X_, X);  // n x m
  mean_out = Ks.transpose() * alpha_;
  mean_out.array() += prior_mean_;
  const Eigen::MatrixXd W = chol_.triangularView<Eigen::Lower>().solve(Ks);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double kss = kernel_eval(kernel_, X.row(i), X.row(i));
    double var = kss - W.col(i).squaredNorm();
    var_out[i] = std::min(std::max(var, 0.0), kss);
  }
}

double GpModel::information_gain() const {
  if (y_.size() == 0) return 0.0;
  if (noise_std_ <= 0.0) {
    throw std::invalid_argument("GpModel: information gain requires a positive noise level");
  }
  const Eigen::Index n = y_.size();
  Eigen::MatrixXd M = kernel_gram(kernel_, X_) / (noise_std_ * noise_std_);
  M.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    throw SingularCovarianceError("GpModel: information gain factorization failed");
  }
  double logdet = 0.0;
  const Eigen::MatrixXd L = llt.matrixL();
  for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(L(i, i));
  return logdet;  // 0.5 * log det = sum log diag(L)
}

}  // namespace safebo
