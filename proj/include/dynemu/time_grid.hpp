#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace dynemu {

// Strictly increasing time points t_0 < t_1 < ... < t_N shared by the
// design runs and the emulation. Interval l covers [t_l, t_{l+1}).
class TimeGrid {
 public:
  explicit TimeGrid(Eigen::VectorXd times);
  static TimeGrid uniform(double t0, double dt, int intervals);

  int intervals() const { return static_cast<int>(times_.size()) - 1; }  // N
  double t(int i) const { return times_[i]; }
  double dt(int l) const { return times_[l + 1] - times_[l]; }
  const Eigen::VectorXd& times() const { return times_; }

  // Content hash; inputs carry it as grid_ref so mismatched grids are caught.
  std::uint64_t id() const { return id_; }

 private:
  Eigen::VectorXd times_;
  std::uint64_t id_;
};

}  // namespace dynemu
