#include "hygrpo/kinematics.hpp"

#include <cmath>

#include "hygrpo/error.hpp"

namespace hygrpo {

Rotation axis_angle_to_rotation(std::span<const double> r) {
  require_same_size(r.size(), 3, "axis-angle");
  const double t2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
  const double t = std::sqrt(t2);
  double a;  // sin(t)/t
  double b;  // (1-cos(t))/t^2
  if (t < 1e-6) {
    a = 1.0 - t2 / 6.0;
    b = 0.5 - t2 / 24.0;
  } else {
    a = std::sin(t) / t;
    b = (1.0 - std::cos(t)) / t2;
  }
  const double x = r[0], y = r[1], z = r[2];
  // R = I + a K + b K^2 with K the cross-product matrix of r.
  return {1.0 - b * (y * y + z * z), -a * z + b * x * y,         a * y + b * x * z,
          a * z + b * x * y,         1.0 - b * (x * x + z * z), -a * x + b * y * z,
          -a * y + b * x * z,        a * x + b * y * z,         1.0 - b * (x * x + y * y)};
}

namespace {

Rotation compose(const Rotation& a, const Rotation& b) {
  Rotation out{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a[i * 3 + k] * b[k * 3 + j];
      out[i * 3 + j] = s;
    }
  }
  return out;
}

}  // namespace

KinematicChain::KinematicChain(std::size_t n_joints) : n_joints_(n_joints) {
  if (n_joints == 0) throw ContractViolation("kinematic chain needs joints");
}

Matrix KinematicChain::forward(std::span<const double> pose) const {
  require_same_size(pose.size(), pose_dim(), "forward kinematics pose");
  Matrix joints(n_joints_, 3);
  Rotation acc = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  for (std::size_t k = 0; k + 1 < n_joints_; ++k) {
    acc = compose(acc, axis_angle_to_rotation(pose.subspan(3 * k, 3)));
    for (int d = 0; d < 3; ++d) {
      // acc * [1,0,0] is the first column.
      joints(k + 1, d) = joints(k, d) + acc[d * 3];
    }
  }
  return joints;
}

Vector KinematicChain::joints_flat(std::span<const double> pose) const {
  Matrix j = forward(pose);
  return Vector(j.span());
}

}  // namespace hygrpo
