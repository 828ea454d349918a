#include "dynemu/time_grid.hpp"

#include "dynemu/errors.hpp"
#include "dynemu/hash.hpp"

namespace dynemu {

TimeGrid::TimeGrid(Eigen::VectorXd times) : times_(std::move(times)) {
  if (times_.size() < 2) {
    throw ConfigError("time grid needs at least one interval");
  }
  for (Eigen::Index i = 0; i + 1 < times_.size(); ++i) {
    if (!(times_[i + 1] > times_[i])) {
      throw ConfigError("time grid must be strictly increasing");
    }
  }
  id_ = fnv1a64(times_.data(), sizeof(double) * static_cast<std::size_t>(times_.size()));
}

TimeGrid TimeGrid::uniform(double t0, double dt, int intervals) {
  if (intervals < 1) throw ConfigError("time grid needs at least one interval");
  if (!(dt > 0.0)) throw ConfigError("time grid step must be positive");
  Eigen::VectorXd times(intervals + 1);
  for (int i = 0; i <= intervals; ++i) times[i] = t0 + dt * i;
  return TimeGrid(std::move(times));
}

}  // namespace dynemu
