#include "safebo/kernel.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace safebo {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

double eval_impl(const KernelSpec& k, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  return std::visit(
      [&](const auto& kern) -> double {
        using T = std::decay_t<decltype(kern)>;
        if constexpr (std::is_same_v<T, RbfKernel>) {
          const double d2 = (x - y).squaredNorm();
          return kern.variance * std::exp(-d2 / (2.0 * kern.lengthscale * kern.lengthscale));
        } else if constexpr (std::is_same_v<T, LinearKernel>) {
          double acc = 0.0;
          for (Eigen::Index i = 0; i < x.size(); ++i) {
            acc += (x[i] - kern.offset) * (y[i] - kern.offset);
          }
          return kern.variance * acc;
        } else {
          double acc = 0.0;
          for (const auto& term : kern.terms) acc += eval_impl(term, x, y);
          return acc;
        }
      },
      k);
}

}  // namespace

KernelSpec rbf(double lengthscale, double variance) {
  require(lengthscale > 0.0, "rbf: lengthscale must be > 0");
  require(variance > 0.0, "rbf: variance must be > 0");
  return RbfKernel{lengthscale, variance};
}

KernelSpec linear(double variance, double offset) {
  require(variance > 0.0, "linear: variance must be > 0");
  return LinearKernel{variance, offset};
}

KernelSpec sum(std::vector<KernelSpec> terms) {
  require(terms.size() >= 2, "sum: needs at least two child kernels");
  for (const auto& t : terms) validate(t);
  return SumKernel{std::move(terms)};
}

void validate(const KernelSpec& k) {
  std::visit(
      [](const auto& kern) {
        using T = std::decay_t<decltype(kern)>;
        if constexpr (std::is_same_v<T, RbfKernel>) {
          require(kern.lengthscale > 0.0, "rbf: lengthscale must be > 0");
          require(kern.variance > 0.0, "rbf: variance must be > 0");
        } else if constexpr (std::is_same_v<T, LinearKernel>) {
          require(kern.variance > 0.0, "linear: variance must be > 0");
        } else {
          require(kern.terms.size() >= 2, "sum: needs at least two child kernels");
          for (const auto& t : kern.terms) validate(t);
        }
      },
      k);
}

double kernel_eval(const KernelSpec& k, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("kernel_eval: point dimensions differ");
  }
  return eval_impl(k, x, y);
}

Eigen::MatrixXd kernel_gram(const KernelSpec& k, const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = eval_impl(k, X.row(i), X.row(i));
    for (Eigen::Index j = 0; j < i; ++j) {
      K(i, j) = eval_impl(k, X.row(i), X.row(j));
      K(j, i) = K(i, j);
    }
  }
  return K;
}

Eigen::MatrixXd kernel_cross(const KernelSpec& k, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  if (X.cols() != Y.cols()) {
    throw std::invalid_argument("kernel_cross: point dimensions differ");
  }
  Eigen::MatrixXd K(X.rows(), Y.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < Y.rows(); ++j) {
      K(i, j) = eval_impl(k, X.row(i), Y.row(j));
    }
  }
  return K;
}

}  // namespace safebo
