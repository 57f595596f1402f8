#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace safebo {

/// Black-box system under optimization. `query` returns one noisy
/// observation per output, cost first, and is side-effect-free apart
/// from advancing its own random stream. `truth` optionally exposes the
/// noiseless values for test instrumentation.
class Oracle {
 public:
  virtual ~Oracle() = default;

  virtual int input_dim() const = 0;
  virtual int num_constraints() const = 0;

  /// Noisy (cost, constraint_1, ..., constraint_m) at x.
  virtual std::vector<double> query(const Eigen::VectorXd& x) = 0;

  /// Noiseless values when the oracle can expose them.
  virtual std::optional<std::vector<double>> truth(const Eigen::VectorXd& x) const {
    return std::nullopt;
  }
};

}  // namespace safebo
