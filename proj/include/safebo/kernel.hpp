#pragma once

#include <Eigen/Dense>
#include <variant>
#include <vector>

namespace safebo {

struct RbfKernel {
  double lengthscale = 1.0;
  double variance = 1.0;
};

struct LinearKernel {
  double variance = 1.0;
  double offset = 0.0;
};

struct SumKernel;

/// Declarative covariance function: RBF, linear, or a sum of kernels.
/// Hyperparameters are fixed at construction and never re-optimized.
using KernelSpec = std::variant<RbfKernel, LinearKernel, SumKernel>;

struct SumKernel {
  std::vector<KernelSpec> terms;
};

// Validating constructors. All variance/lengthscale parameters must be
// strictly positive; a sum needs at least two children.
KernelSpec rbf(double lengthscale, double variance);
KernelSpec linear(double variance, double offset = 0.0);
KernelSpec sum(std::vector<KernelSpec> terms);

void validate(const KernelSpec& k);

/// k(x, x'). Throws std::invalid_argument on dimension mismatch.
double kernel_eval(const KernelSpec& k, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Gram matrix on the rows of X.
Eigen::MatrixXd kernel_gram(const KernelSpec& k, const Eigen::MatrixXd& X);

/// Cross-covariance, entry (i, j) = k(X.row(i), Y.row(j)).
Eigen::MatrixXd kernel_cross(const KernelSpec& k, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y);

}  // namespace safebo
