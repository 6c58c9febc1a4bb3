#pragma once

#include <array>
#include <span>

#include "hygrpo/math.hpp"

namespace hygrpo {

using Rotation = std::array<double, 9>;  // row-major 3x3

// Rodrigues formula for an axis-angle vector.
Rotation axis_angle_to_rotation(std::span<const double> r);

// Serial chain of unit links rooted at the origin. Pose is 3 axis-angle
// parameters per joint. Joint k+1 sits one link length from joint k along
// the x-axis of the accumulated rotation R_0 ... R_k, so the last joint's
// rotation does not move any joint position.
class KinematicChain {
 public:
  explicit KinematicChain(std::size_t n_joints = 4);

  std::size_t n_joints() const { return n_joints_; }
  std::size_t pose_dim() const { return 3 * n_joints_; }

  // n_joints x 3 joint positions.
  Matrix forward(std::span<const double> pose) const;
  // Same positions stacked into one 3*n_joints vector.
  Vector joints_flat(std::span<const double> pose) const;

 private:
  std::size_t n_joints_;
};

}  // namespace hygrpo
