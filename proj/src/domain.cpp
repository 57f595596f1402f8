#include "safebo/domain.hpp"

#include <algorithm>
#include <stdexcept>

namespace safebo {

Domain::Domain(std::vector<Bound> bounds_in, int grid_points_per_dim_in, int refinement_iters_in)
    : bounds(std::move(bounds_in)),
      grid_points_per_dim(grid_points_per_dim_in),
      refinement_iters(refinement_iters_in) {
  validate();
}

std::int64_t Domain::grid_size() const {
  std::int64_t total = 1;
  for (std::size_t d = 0; d < bounds.size(); ++d) {
    total *= grid_points_per_dim;
    if (total > max_grid_size) return total;  // early out against overflow
  }
  return total;
}

bool Domain::contains(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) return false;
  for (int d = 0; d < dim(); ++d) {
    if (x[d] < bounds[d].lo || x[d] > bounds[d].hi) return false;
  }
  return true;
}

void Domain::validate() const {
  if (bounds.empty()) throw std::invalid_argument("Domain: at least one dimension required");
  for (const auto& b : bounds) {
    if (!(b.lo < b.hi)) throw std::invalid_argument("Domain: lo must be < hi in every dimension");
  }
  if (grid_points_per_dim < 2) {
    throw std::invalid_argument("Domain: grid_points_per_dim must be >= 2");
  }
  if (refinement_iters < 0) {
    throw std::invalid_argument("Domain: refinement_iters must be >= 0");
  }
  if (grid_size() > max_grid_size) {
    throw std::invalid_argument("Domain: grid size exceeds the configured cap");
  }
}

namespace {

Grid grid_over_box(const std::vector<Domain::Bound>& box, int per_dim) {
  const int dim = static_cast<int>(box.size());
  std::int64_t total = 1;
  for (int d = 0; d < dim; ++d) total *= per_dim;

  Grid grid;
  grid.points.resize(total, dim);
  for (std::int64_t i = 0; i < total; ++i) {
    std::int64_t rest = i;
    for (int d = dim - 1; d >= 0; --d) {
      const std::int64_t idx = rest % per_dim;
      rest /= per_dim;
      grid.points(i, d) = box[d].lo + (box[d].hi - box[d].lo) * static_cast<double>(idx) /
                                          static_cast<double>(per_dim - 1);
    }
  }
  return grid;
}

}  // namespace

Grid make_grid(const Domain& domain) {
  domain.validate();
  return grid_over_box(domain.bounds, domain.grid_points_per_dim);
}

Grid make_refined_grid(const Domain& domain, const Eigen::VectorXd& center,
                       const std::vector<double>& half_width) {
  if (center.size() != domain.dim() || half_width.size() != static_cast<std::size_t>(domain.dim())) {
    throw std::invalid_argument("make_refined_grid: dimension mismatch");
  }
  std::vector<Domain::Bound> box(domain.dim());
  for (int d = 0; d < domain.dim(); ++d) {
    box[d].lo = std::max(domain.bounds[d].lo, center[d] - half_width[d]);
    box[d].hi = std::min(domain.bounds[d].hi, center[d] + half_width[d]);
    if (!(box[d].lo < box[d].hi)) {  // degenerate after clipping
      box[d].lo = domain.bounds[d].lo;
      box[d].hi = domain.bounds[d].hi;
    }
  }
  return grid_over_box(box, domain.grid_points_per_dim);
}

}  // namespace safebo
