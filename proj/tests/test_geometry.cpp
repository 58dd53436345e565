#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cablebot/errors.hpp"
#include "cablebot/geometry.hpp"
#include "support.hpp"

#include <numbers>

using namespace cablebot;
using cablebot::testing::Gen;

namespace {

bool near(const Vec3& a, const Vec3& b, double tol) { return (a - b).norm() <= tol; }

}  // namespace

TEST_CASE("wire vectors for axis aligned wires") {
  BodyState body;
  WireVectors v = wire_vectors(body, {Vec3::Zero(), Vec3(0, 0, 2)});
  CHECK(near(v.r, Vec3::Zero(), 0.0));
  CHECK(near(v.s, Vec3::UnitZ(), 0.0));
  CHECK(v.length == 2.0);

  body.position = Vec3(1, 0, 0);
  v = wire_vectors(body, {Vec3::Zero(), Vec3(1, 0, 3)});
  CHECK(near(v.r, Vec3::Zero(), 0.0));
  CHECK(near(v.s, Vec3::UnitZ(), 1e-15));
  CHECK(v.length == doctest::Approx(3.0));
}

TEST_CASE("wire vectors of a rotated body match a rotation matrix") {
  BodyState body;
  body.orientation = Quat(Eigen::AngleAxisd(std::numbers::pi / 2.0, Vec3::UnitZ()));
  const Vec3 attach(0.09, 0.09, 0.09);
  const Vec3 anchor(0.0, 0.0, 2.0);
  const WireVectors v = wire_vectors(body, {attach, anchor});
  const Vec3 r = cablebot::testing::rot_z(std::numbers::pi / 2.0) * attach;
  CHECK(near(v.r, Vec3(-0.09, 0.09, 0.09), 1e-12));
  CHECK(near(v.r, r, 1e-12));
  CHECK(near(v.s, (anchor - r).normalized(), 1e-12));
  CHECK(v.length == doctest::Approx((anchor - r).norm()).epsilon(1e-12));
}

TEST_CASE("degenerate wire is rejected") {
  BodyState body;
  CHECK_THROWS_AS(wire_vectors(body, {Vec3(0.09, 0, 0), Vec3(0.09, 0, 0)}), DegenerateWire);
  CHECK_THROWS_AS(wire_vectors(body, {Vec3::Zero(), Vec3(0, 0, 5e-7)}), DegenerateWire);
  const std::vector<WireGeometry> wires{{Vec3::Zero(), Vec3(0, 0, 1)}, {Vec3::Zero(), Vec3::Zero()}};
  CHECK_THROWS_AS(build_jacobian(body, wires), DegenerateWire);
}

TEST_CASE("jacobian columns for simple wires") {
  BodyState body;
  std::vector<WireGeometry> up{{Vec3::Zero(), Vec3(0, 0, 1)}};
  WireJacobian jac = build_jacobian(body, up);
  Vec6 expected;
  expected << 0, 0, 1, 0, 0, 0;
  CHECK((jac.matrix.col(0) - expected).norm() == 0.0);

  std::vector<WireGeometry> side{{Vec3(0, 0, 0.09), Vec3(2, 0, 0.09)}};
  jac = build_jacobian(body, side);
  expected << 1, 0, 0, 0, 0.09, 0;
  CHECK((jac.matrix.col(0) - expected).norm() < 1e-15);
  CHECK(jac.wire_count() == 1);
  CHECK(jac.lengths(0) == doctest::Approx(2.0));
}

TEST_CASE("wire rates sign convention") {
  BodyState body;
  std::vector<WireGeometry> up{{Vec3::Zero(), Vec3(0, 0, 2)}};
  WireJacobian jac = build_jacobian(body, up);
  CHECK(wire_rates(body, jac)(0) == 0.0);
  body.linear_velocity = Vec3(0, 0, 0.1);
  CHECK(wire_rates(body, jac)(0) == doctest::Approx(-0.1));
}

TEST_CASE("four wire hanging layout matches finite differences") {
  const std::vector<WireGeometry> wires{{Vec3(0.09, 0.09, 0.09), Vec3(-0.8, 0.8, 2.5)},
                                        {Vec3(0.09, -0.09, 0.09), Vec3(-0.8, -0.8, 2.5)},
                                        {Vec3(0.09, 0.09, -0.09), Vec3(0.8, 0.8, 2.5)},
                                        {Vec3(0.09, -0.09, -0.09), Vec3(0.8, -0.8, 2.5)}};
  BodyState body;
  body.position = Vec3(0.0, 0.0, 1.0);
  body.orientation = Quat(Eigen::AngleAxisd(-std::numbers::pi / 2.0, Vec3::UnitY()));
  const WireJacobian jac = build_jacobian(body, wires);
  // Unit twists probe each column of -W^T.
  for (int k = 0; k < 6; ++k) {
    Vec6 twist = Vec6::Zero();
    twist(k) = 1.0;
    body.set_twist(twist);
    const VecX fd = cablebot::testing::central_difference_rates(body, wires);
    CHECK((wire_rates(body, jac) - fd).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("jacobian properties on random instances") {
  Gen gen(20261016);
  for (int trial = 0; trial < 300; ++trial) {
    const int m = gen.integer(1, 4);
    const BodyState body = gen.body();
    const auto wires = gen.wires(m, body.position);
    const WireJacobian jac = build_jacobian(body, wires);
    REQUIRE(jac.wire_count() == m);
    for (int i = 0; i < m; ++i) {
      CHECK(std::abs(jac.matrix.col(i).head<3>().norm() - 1.0) < 1e-9);
    }
    const VecX fd = cablebot::testing::central_difference_rates(body, wires);
    CHECK((wire_rates(body, jac) - fd).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((jac.lengths - wire_lengths(body, wires)).norm() < 1e-15);
  }
}

TEST_CASE("translating body and anchors together leaves wire vectors unchanged") {
  Gen gen(7);
  for (int trial = 0; trial < 200; ++trial) {
    BodyState body = gen.body();
    WireGeometry geom{gen.vec3(-0.09, 0.09), gen.vec3(-2.0, 2.0) + Vec3(0, 0, 3)};
    const WireVectors a = wire_vectors(body, geom);
    const Vec3 shift = gen.vec3(-10.0, 10.0);
    body.position += shift;
    geom.anchor += shift;
    const WireVectors b = wire_vectors(body, geom);
    CHECK(near(a.r, b.r, 1e-12));
    CHECK(near(a.s, b.s, 1e-9));
    CHECK(std::abs(a.length - b.length) < 1e-9);
  }
}

TEST_CASE("orientation integration stays normalized and rotates on the world side") {
  Gen gen(11);
  Quat q = gen.quat();
  for (int k = 0; k < 10000; ++k) {
    q = integrate_orientation(q, Vec3(0.3, -1.2, 2.0), 1e-3);
    CHECK(std::abs(q.norm() - 1.0) < 1e-9);
  }
  const Quat start = gen.quat();
  const Vec3 omega(0.0, 0.0, 0.5);
  const Quat end = integrate_orientation(start, omega, 2.0);
  const Mat3 expected = cablebot::testing::rot_z(1.0) * cablebot::testing::quat_matrix(start);
  CHECK((cablebot::testing::quat_matrix(end) - expected).norm() < 1e-12);
  CHECK(integrate_orientation(start, Vec3::Zero(), 1.0).isApprox(start));
}

TEST_CASE("pose distance is sign invariant") {
  Pose a;
  a.orientation = Quat(Eigen::AngleAxisd(0.4, Vec3::UnitX()));
  Pose b = a;
  b.orientation.coeffs() *= -1.0;
  CHECK(a.distance_to(b) < 1e-15);
  b.position += Vec3(0.0, 0.002, 0.0);
  CHECK(a.distance_to(b) == doctest::Approx(0.002));
}
