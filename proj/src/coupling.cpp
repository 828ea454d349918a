#include "dynemu/coupling.hpp"

#include <cmath>

namespace dynemu {

double rho(const InputTrajectory& x_a, const InputTrajectory& x_b, const MetricSpec& ms) {
  if (x_a.grid_ref != x_b.grid_ref) {
    throw MismatchedGridsError("rho: inputs live on different time grids");
  }
  if (ms.scales.size() != static_cast<Eigen::Index>(ms.coords.size())) {
    throw ConfigError("metric: one scale per coordinate required");
  }
  double acc = 0.0;
  for (std::size_t c = 0; c < ms.coords.size(); ++c) {
    const int idx = ms.coords[c];
    if (idx < 0 || idx >= x_a.params.size() || idx >= x_b.params.size()) {
      throw ConfigError("metric: coordinate index out of range");
    }
    const double s = ms.scales[static_cast<Eigen::Index>(c)];
    if (!(s > 0.0)) throw ConfigError("metric: scales must be strictly positive");
    const double d = (x_a.params[idx] - x_b.params[idx]) / s;
    acc += d * d;
  }
  return ms.flavor == MetricFlavor::kEuclidean ? std::sqrt(acc) : acc;
}

double coupling_weight(const InputTrajectory& x_a, const InputTrajectory& x_b,
                       const MetricSpec& ms) {
  return std::exp(-0.5 * rho(x_a, x_b, ms));
}

Eigen::MatrixXd coupling_matrix(const DesignSet& design,
                                const InputTrajectory* online, const MetricSpec& ms) {
  const int n = design.size();
  const int total = n + (online != nullptr ? 1 : 0);
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(total, total);
  auto input_at = [&](int i) -> const InputTrajectory& {
    return i < n ? design.inputs[static_cast<std::size_t>(i)] : *online;
  };
  for (int i = 0; i < total; ++i) {
    r(i, i) = 1.0;
    for (int j = 0; j < i; ++j) {
      const double w = coupling_weight(input_at(i), input_at(j), ms);
      r(i, j) = w;
      r(j, i) = w;
    }
  }
  return r;
}

}  // namespace dynemu
