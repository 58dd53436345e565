#pragma once

#include "cablebot/geometry.hpp"
#include "cablebot/tension_qp.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <vector>

namespace cablebot::testing {

/// Fixed-seed generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }

  Vec3 vec3(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)}; }

  Quat quat() {
    // Uniform on SO(3) via normalized Gaussian 4-vectors.
    std::normal_distribution<double> n(0.0, 1.0);
    Quat q(n(engine_), n(engine_), n(engine_), n(engine_));
    q.normalize();
    return q;
  }

  BodyState body(double position_range = 1.0, double speed = 1.0) {
    BodyState b;
    b.position = vec3(-position_range, position_range);
    b.orientation = quat();
    b.linear_velocity = vec3(-speed, speed);
    b.angular_velocity = vec3(-speed, speed);
    return b;
  }

  /// m wires from cube vertices to anchors on a ceiling well above the body.
  std::vector<WireGeometry> wires(int m, const Vec3& center = Vec3::Zero()) {
    std::vector<WireGeometry> out;
    for (int i = 0; i < m; ++i) {
      WireGeometry w;
      w.body_attach = Vec3(integer(0, 1) ? 0.09 : -0.09, integer(0, 1) ? 0.09 : -0.09,
                           integer(0, 1) ? 0.09 : -0.09);
      w.anchor = center + Vec3(uniform(-1.5, 1.5), uniform(-1.5, 1.5), uniform(1.0, 3.0));
      out.push_back(w);
    }
    return out;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Rotation matrix about a coordinate axis, built from sines and cosines
/// without going through Eigen's quaternion code.
inline Mat3 rot_x(double a) {
  Mat3 r;
  r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return r;
}
inline Mat3 rot_y(double a) {
  Mat3 r;
  r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return r;
}
inline Mat3 rot_z(double a) {
  Mat3 r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return r;
}

/// Unit-quaternion rotation matrix written out element by element.
inline Mat3 quat_matrix(const Quat& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

/// Geometric lengths after moving the body along its twist for time h, with
/// the rotation applied as an exact matrix exponential.
inline VecX lengths_after(const BodyState& body, const std::vector<WireGeometry>& wires, double h) {
  const Vec3 p = body.position + h * body.linear_velocity;
  const Vec3 w = body.angular_velocity * h;
  const double angle = w.norm();
  Mat3 dr = Mat3::Identity();
  if (angle > 0.0) {
    const Vec3 k = w / angle;
    Mat3 kx;
    kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
    dr = Mat3::Identity() + std::sin(angle) * kx + (1.0 - std::cos(angle)) * kx * kx;
  }
  const Mat3 r = dr * quat_matrix(body.orientation);
  VecX out(static_cast<Eigen::Index>(wires.size()));
  for (std::size_t i = 0; i < wires.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = (wires[i].anchor - (p + r * wires[i].body_attach)).norm();
  }
  return out;
}

/// Central-difference wire length rates.
inline VecX central_difference_rates(const BodyState& body, const std::vector<WireGeometry>& wires,
                                     double h = 1e-6) {
  return (lengths_after(body, wires, h) - lengths_after(body, wires, -h)) / (2.0 * h);
}

/// Accelerated projected gradient with restarts, an independent solver for
/// min |W f - w|^2 + lambda |f|^2 over a box.
inline VecX projected_gradient_oracle(const Mat6X& w_mat, const Vec6& target, const VecX& lo,
                                      const VecX& hi, double lambda, int max_iterations = 1000000,
                                      double tolerance = 1e-12) {
  const Eigen::MatrixXd h = 2.0 * (w_mat.transpose() * w_mat +
                                   lambda * Eigen::MatrixXd::Identity(w_mat.cols(), w_mat.cols()));
  const VecX b = 2.0 * w_mat.transpose() * target;
  const double lipschitz = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h).eigenvalues().maxCoeff();
  const double step = 1.0 / std::max(lipschitz, 1e-12);
  auto project = [&](const VecX& f) { return VecX(f.cwiseMax(lo).cwiseMin(hi)); };
  auto objective = [&](const VecX& f) {
    return (w_mat * f - target).squaredNorm() + lambda * f.squaredNorm();
  };
  VecX x = project(0.5 * (lo + hi));
  VecX y = x;
  double t = 1.0;
  double fx = objective(x);
  for (int k = 0; k < max_iterations; ++k) {
    const VecX x_next = project(y - step * (h * y - b));
    const double f_next = objective(x_next);
    if (f_next > fx) {
      // Restart momentum when the objective goes up.
      y = x;
      t = 1.0;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x_next + ((t - 1.0) / t_next) * (x_next - x);
    const double moved = (x_next - x).norm();
    x = x_next;
    fx = f_next;
    t = t_next;
    const VecX pg = x - project(x - (h * x - b));
    if (pg.norm() < tolerance && moved < tolerance) break;
  }
  return x;
}

}  // namespace cablebot::testing
