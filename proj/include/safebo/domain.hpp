#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace safebo {

/// Compact box domain discretized on an axis-aligned grid. Acquisition
/// minimization is grid search plus nested refinement, so every
/// candidate is an explicit point with a stable index.
struct Domain {
  struct Bound {
    double lo;
    double hi;
  };

  std::vector<Bound> bounds;
  int grid_points_per_dim = 1001;
  int refinement_iters = 2;
  std::int64_t max_grid_size = 1000000;

  Domain() = default;
  Domain(std::vector<Bound> bounds, int grid_points_per_dim = 1001, int refinement_iters = 2);

  int dim() const { return static_cast<int>(bounds.size()); }
  std::int64_t grid_size() const;
  bool contains(const Eigen::VectorXd& x) const;
  void validate() const;
};

/// Explicit grid over a box; `points` has one row per grid point with
/// index order running fastest over the last dimension.
struct Grid {
  Eigen::MatrixXd points;

  Eigen::Index size() const { return points.rows(); }
};

/// Full-domain grid at the domain's resolution.
Grid make_grid(const Domain& domain);

/// Grid over a shrunken box centered at `center` with per-dimension
/// half-width `half_width`, clipped to the domain bounds.
Grid make_refined_grid(const Domain& domain, const Eigen::VectorXd& center,
                       const std::vector<double>& half_width);

}  // namespace safebo
