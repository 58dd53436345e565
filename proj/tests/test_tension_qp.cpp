#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cablebot/errors.hpp"
#include "cablebot/tension_qp.hpp"
#include "support.hpp"

#include <numbers>

using namespace cablebot;
using cablebot::testing::Gen;

namespace {

const Vec3 kGravity(0.0, 0.0, -9.81);

WireJacobian vertical_pair() {
  BodyState body;
  const std::vector<WireGeometry> wires{{Vec3(0.09, 0, 0), Vec3(0.09, 0, 2)},
                                        {Vec3(-0.09, 0, 0), Vec3(-0.09, 0, 2)}};
  return build_jacobian(body, wires);
}

// Smallest force residual over a 200 x 200 tension grid.
double grid_min_residual(const WireJacobian& jac, const Vec6& target, double lo, double hi) {
  const int n = 200;
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      Eigen::Vector2d f(lo + (hi - lo) * a / (n - 1), lo + (hi - lo) * b / (n - 1));
      best = std::min(best, (jac.matrix.topRows<3>() * f - target.head<3>()).norm());
    }
  }
  return best;
}

}  // namespace

TEST_CASE("gravity wrench") {
  Vec6 w = gravity_wrench(10.0, kGravity);
  CHECK(w(2) == doctest::Approx(98.1));
  CHECK(w.head<2>().norm() == 0.0);
  CHECK(w.tail<3>().norm() == 0.0);
  CHECK(gravity_wrench(0.0, kGravity).norm() == 0.0);
  CHECK(gravity_wrench(12.0, kGravity)(2) == doctest::Approx(117.72));
}

TEST_CASE("limits validation") {
  CHECK_NOTHROW(TensionLimits::uniform(3).validate());
  CHECK_THROWS_AS(TensionLimits::uniform(2, -1.0, 10.0).validate(), ConfigError);
  CHECK_THROWS_AS(TensionLimits::uniform(2, 10.0, 10.0).validate(), ConfigError);
  TensionLimits bad{VecX::Zero(2), VecX::Ones(3)};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("symmetric vertical pair shares the weight") {
  const double mass = 10.0;
  const TensionSolution sol =
      solve_tension_qp(vertical_pair(), gravity_wrench(mass, kGravity), TensionLimits::uniform(2, 0.0, 500.0), 0.0);
  CHECK(sol.converged);
  CHECK(sol.tensions(0) == doctest::Approx(mass * 9.81 / 2.0).epsilon(1e-10));
  CHECK(sol.tensions(1) == doctest::Approx(mass * 9.81 / 2.0).epsilon(1e-10));
}

TEST_CASE("single vertical wire carries the full weight") {
  BodyState body;
  const std::vector<WireGeometry> wire{{Vec3::Zero(), Vec3(0, 0, 2)}};
  const TensionSolution sol = solve_tension_qp(build_jacobian(body, wire), gravity_wrench(10.0, kGravity),
                                               TensionLimits::uniform(1), 0.0);
  CHECK(sol.converged);
  CHECK(sol.tensions(0) == doctest::Approx(98.1).epsilon(1e-12));
  CHECK(sol.residual_wrench.norm() < 1e-9);
}

TEST_CASE("size and option errors") {
  const WireJacobian jac = vertical_pair();
  CHECK_THROWS_AS(solve_tension_qp(jac, Vec6::Zero(), TensionLimits::uniform(3)), ConfigError);
  CHECK_THROWS_AS(solve_tension_qp(jac, Vec6::Zero(), TensionLimits::uniform(2), -1.0), ConfigError);
  WireJacobian empty;
  empty.matrix.resize(6, 0);
  CHECK_THROWS_AS(solve_tension_qp(empty, Vec6::Zero(), TensionLimits::uniform(0)), ConfigError);
}

TEST_CASE("solutions stay in the box, reach KKT and beat the midpoint") {
  Gen gen(4242);
  for (int trial = 0; trial < 300; ++trial) {
    const int m = gen.integer(1, 4);
    const BodyState body = gen.body();
    const WireJacobian jac = build_jacobian(body, gen.wires(m, body.position));
    const double lo = gen.uniform(0.0, 10.0);
    const TensionLimits limits = TensionLimits::uniform(m, lo, lo + gen.uniform(20.0, 150.0));
    const Vec6 target = gravity_wrench(gen.uniform(1.0, 15.0), kGravity);
    const double lambda = gen.integer(0, 1) ? 1e-3 : 0.0;
    const TensionSolution sol = solve_tension_qp(jac, target, limits, lambda);
    CHECK((sol.tensions.array() >= limits.f_min.array()).all());
    CHECK((sol.tensions.array() <= limits.f_max.array()).all());
    CHECK((sol.residual_wrench - (jac.matrix * sol.tensions - target)).norm() == 0.0);
    const VecX mid = 0.5 * (limits.f_min + limits.f_max);
    CHECK(sol.objective <= tension_objective(jac.matrix, target, mid, lambda) + 1e-12);
    CHECK(sol.converged);
    CHECK(kkt_violation(jac.matrix, target, limits, sol.tensions, lambda) < 1e-8);
    CHECK(sol.pose.distance_to(Pose::of(body)) == 0.0);
  }
}

TEST_CASE("objective matches the projected gradient oracle") {
  Gen gen(99);
  for (int trial = 0; trial < 60; ++trial) {
    const int m = gen.integer(1, 4);
    const BodyState body = gen.body();
    const WireJacobian jac = build_jacobian(body, gen.wires(m, body.position));
    const TensionLimits limits = TensionLimits::uniform(m, 5.0, 120.0);
    const Vec6 target = gravity_wrench(gen.uniform(2.0, 14.0), kGravity);
    const TensionSolution sol = solve_tension_qp(jac, target, limits);
    const VecX oracle = cablebot::testing::projected_gradient_oracle(jac.matrix, target, limits.f_min,
                                                                     limits.f_max, kDefaultRegularization);
    const double oracle_value = tension_objective(jac.matrix, target, oracle, kDefaultRegularization);
    CHECK(std::abs(sol.objective - oracle_value) < 1e-6);
  }
}

TEST_CASE("exactly determined full rank case has zero residual") {
  // Six wires in general position give a square invertible W; pick tensions
  // inside the box and ask for the wrench they produce.
  Gen gen(5);
  for (int trial = 0; trial < 50; ++trial) {
    BodyState body = gen.body();
    std::vector<WireGeometry> wires;
    for (int i = 0; i < 6; ++i) {
      wires.push_back({gen.vec3(-0.09, 0.09), body.position + gen.vec3(-2.0, 2.0)});
    }
    const WireJacobian jac = build_jacobian(body, wires);
    if (jac.matrix.fullPivLu().rank() < 6) continue;
    VecX f(6);
    for (int i = 0; i < 6; ++i) f(i) = gen.uniform(10.0, 100.0);
    const Vec6 target = jac.matrix * f;
    const TensionSolution sol = solve_tension_qp(jac, target, TensionLimits::uniform(6, 2.0, 120.0), 0.0);
    CHECK(sol.residual_wrench.norm() < 1e-8);
  }
}

TEST_CASE("kkt violation detects a non-stationary point") {
  const WireJacobian jac = vertical_pair();
  const Vec6 target = gravity_wrench(10.0, kGravity);
  const TensionLimits limits = TensionLimits::uniform(2, 0.0, 500.0);
  VecX f(2);
  f << 10.0, 10.0;
  CHECK(kkt_violation(jac.matrix, target, limits, f, 0.0) > 1.0);
  f << -1.0, 10.0;
  CHECK(kkt_violation(jac.matrix, target, limits, f, 0.0) >= 1.0);
  // At the lower bound with the gradient pointing inward the point is optimal.
  f << 0.0, 0.0;
  CHECK(kkt_violation(jac.matrix, -target, limits, f, 0.0) == 0.0);
}

TEST_CASE("gradient matches finite differences") {
  Gen gen(17);
  const BodyState body = gen.body();
  const WireJacobian jac = build_jacobian(body, gen.wires(4, body.position));
  const Vec6 target = gravity_wrench(12.0, kGravity);
  VecX f(4);
  f << 10, 20, 30, 40;
  const VecX g = tension_objective_gradient(jac.matrix, target, f, 1e-3);
  for (int i = 0; i < 4; ++i) {
    VecX e = VecX::Zero(4);
    e(i) = 1e-4;
    const double fd = (tension_objective(jac.matrix, target, f + e, 1e-3) -
                       tension_objective(jac.matrix, target, f - e, 1e-3)) / 2e-4;
    CHECK(g(i) == doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_CASE("feasibility of a single vertical wire") {
  BodyState body;
  const std::vector<WireGeometry> wire{{Vec3::Zero(), Vec3(0, 0, 2)}};
  const WireJacobian jac = build_jacobian(body, wire);
  FeasibilityReport r = wrench_feasible(jac, gravity_wrench(10.0, kGravity), TensionLimits::uniform(1), 1e-6);
  CHECK(r.feasible);
  CHECK(r.residual_norm < 1e-9);

  Vec6 lateral = gravity_wrench(10.0, kGravity);
  lateral(0) = 3.0;
  lateral(1) = -4.0;
  r = wrench_feasible(jac, lateral, TensionLimits::uniform(1), 1e-6);
  CHECK_FALSE(r.feasible);
  CHECK(r.residual_norm == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("two wire feasibility agrees with a grid search") {
  // Cliff layout: nose-up body at the foot of the wall, anchors beyond the edge.
  const std::vector<WireGeometry> cliff{{Vec3(0.09, 0.09, 0.09), Vec3(2.5, 0.4, 2.3)},
                                        {Vec3(0.09, -0.09, 0.09), Vec3(2.5, -0.4, 2.3)}};
  const double pitch = -std::numbers::pi / 2.0;
  const double lo = 2.0, hi = 120.0;
  const double spacing = (hi - lo) / 199.0;
  int checked = 0;
  for (double x : {-0.15, 0.2, 1.0, 2.3}) {
    for (double z : {0.12, 0.8, 1.6, 2.0}) {
      for (double mass : {1.0, 5.0, 13.0, 30.0}) {
        BodyState body;
        body.position = Vec3(x, 0.0, z);
        body.orientation = Quat(Eigen::AngleAxisd(pitch, Vec3::UnitY()));
        const WireJacobian jac = build_jacobian(body, cliff);
        const Vec6 target = gravity_wrench(mass, kGravity);
        const double tol = 2.0;
        const FeasibilityReport r = wrench_feasible(jac, target, TensionLimits::uniform(2, lo, hi), tol);
        const double grid = grid_min_residual(jac, target, lo, hi);
        // The continuous optimum is never worse than the grid and never
        // better by more than one grid cell.
        CHECK(r.residual_norm <= grid + 1e-9);
        CHECK(grid <= r.residual_norm + spacing * std::sqrt(2.0) + 1e-9);
        if (std::abs(grid - tol) > spacing * std::sqrt(2.0)) {
          CHECK(r.feasible == (grid < tol));
          ++checked;
        }
      }
    }
  }
  CHECK(checked > 40);
}
