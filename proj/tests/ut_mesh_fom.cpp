#include <doctest.h>

#include <cmath>

#include "ddrom/errors.hpp"
#include "ddrom/fom.hpp"
#include "test_util.hpp"

using namespace ddrom;
using test::fd_jacobian;
using test::random_state;
using test::small_burgers;
using test::small_heat;

namespace {

// Independent load-vector quadrature for the heat forcing term.
double load_oracle(const StructuredMesh& m, int free_node, double amplitude) {
  const double g = 1.0 / std::sqrt(3.0);
  const int gi = m.free_node_gi(free_node), gj = m.free_node_gj(free_node);
  double acc = 0.0;
  for (int ej = gj - 1; ej <= gj; ++ej) {
    for (int ei = gi - 1; ei <= gi; ++ei) {
      for (int qx = 0; qx < 2; ++qx) {
        for (int qy = 0; qy < 2; ++qy) {
          const double xi = qx == 0 ? -g : g, eta = qy == 0 ? -g : g;
          const double x1 = m.node_x1(ei) + 0.5 * (1.0 + xi) * m.hx();
          const double x2 = m.node_x2(ej) + 0.5 * (1.0 + eta) * m.hy();
          // shape value of this node within element (ei, ej)
          const double lx = (gi - ei) == 1 ? 0.5 * (1.0 + xi) : 0.5 * (1.0 - xi);
          const double ly = (gj - ej) == 1 ? 0.5 * (1.0 + eta) : 0.5 * (1.0 - eta);
          const double f = amplitude * std::sin(2.0 * M_PI * x1) * std::sin(2.0 * M_PI * x2);
          acc += 0.25 * m.hx() * m.hy() * lx * ly * f;
        }
      }
    }
  }
  return acc;
}

}  // namespace

TEST_CASE("heat residual at zero state is the negated load vector") {
  FomProblem p = small_heat(6, 6);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(p.size());
  const Eigen::VectorXd r1 = p.residual(zero, {1.0, 1.0});
  const Eigen::VectorXd r2 = p.residual(zero, {7.0, 3.0});
  CHECK((r1 - r2).lpNorm<Eigen::Infinity>() == 0.0);  // nonlinearity vanishes at zero
  for (int k = 0; k < p.size(); ++k) {
    CHECK(r1[k] == doctest::Approx(-load_oracle(p.mesh(), k, 100.0)).epsilon(1e-12));
  }
}

TEST_CASE("heat fine mesh has 6241 free DOFs") {
  FomProblem p = small_heat(80, 80, 0.01);
  CHECK(p.size() == 6241);
  const Eigen::VectorXd r = p.residual(Eigen::VectorXd::Zero(p.size()), {1.0, 1.0});
  CHECK(r.size() == 6241);
}

TEST_CASE("heat coarse mesh has 1521 free DOFs") {
  CHECK(small_heat(40, 40).size() == 1521);
}

TEST_CASE("burgers mesh sizes match the benchmark configurations") {
  CHECK(small_burgers(120, 12).size() == 2618);
  CHECK(small_burgers(240, 12).size() == 5258);
}

TEST_CASE("heat jacobian at zero state is linear in mu1") {
  FomProblem p = small_heat(6, 6);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(p.size());
  const Eigen::MatrixXd j0 = Eigen::MatrixXd(p.jacobian(zero, {0.0, 1.0}));
  const Eigen::MatrixXd j1 = Eigen::MatrixXd(p.jacobian(zero, {1.0, 1.0}));
  const Eigen::MatrixXd j2 = Eigen::MatrixXd(p.jacobian(zero, {2.0, 1.0}));
  // all exponentials equal one, so the nonlinear block scales with mu1
  CHECK(((j2 - j1) - (j1 - j0)).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((j0 - j0.transpose()).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("analytic jacobians match central finite differences") {
  FomProblem heat = small_heat(5, 5);
  FomProblem burgers = small_burgers(8, 4);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Param mu_h{0.01 + 9.0 * (rng() % 1000) / 1000.0, 0.01 + 9.0 * (rng() % 1000) / 1000.0};
    const Param mu_b{1.0 + 200.0 * (rng() % 1000) / 1000.0, 5.0 + 10.0 * (rng() % 1000) / 1000.0};
    for (const auto* prob : {&heat, &burgers}) {
      const Param mu = prob->kind() == FomKind::HeatFem ? mu_h : mu_b;
      const Eigen::VectorXd x = random_state(prob->size(), 100 + trial, 0.5);
      const Eigen::MatrixXd J = Eigen::MatrixXd(prob->jacobian(x, mu));
      const Eigen::MatrixXd Jfd = fd_jacobian(*prob, x, mu);
      const double rel = (J - Jfd).norm() / Jfd.norm();
      CHECK(rel < 1e-5);
    }
  }
}

TEST_CASE("burgers fine jacobian is 5258 x 5258") {
  FomProblem p = small_burgers(240, 12);
  const auto J = p.jacobian(Eigen::VectorXd::Zero(p.size()), {100.0, 10.0});
  CHECK(J.rows() == 5258);
  CHECK(J.cols() == 5258);
}

TEST_CASE("burgers residual at exact nodal samples shrinks at second order") {
  const Param mu{100.0, 10.0};
  std::vector<double> norms;
  for (int nx : {30, 60, 120}) {
    FomProblem p = small_burgers(nx, 12);
    const StructuredMesh& m = p.mesh();
    Eigen::VectorXd x(p.size());
    for (int k = 0; k < p.num_free_nodes(); ++k) {
      const auto u = burgers_exact(m.free_x1(k), m.free_x2(k), mu, p.burgers_constants());
      x[2 * k] = u[0];
      x[2 * k + 1] = u[1];
    }
    norms.push_back(p.residual(x, mu).lpNorm<Eigen::Infinity>());
  }
  const double rate1 = std::log2(norms[0] / norms[1]);
  const double rate2 = std::log2(norms[1] / norms[2]);
  CHECK(rate1 >= 1.8);
  CHECK(rate2 >= 1.8);
}

TEST_CASE("newton on coarse heat reproduces the four-lobe source pattern") {
  FomProblem p = small_heat(40, 40, 0.01);
  FomSolution sol = newton_solve(p, {1.0, 1.0}, Eigen::VectorXd());
  CHECK(sol.residual_history.back() <= 1e-10 * std::max(1.0, sol.residual_history.front()));

  auto value_at = [&](double x1, double x2) {
    const int gi = static_cast<int>(std::round(x1 / p.mesh().hx()));
    const int gj = static_cast<int>(std::round(x2 / p.mesh().hy()));
    return sol.x[p.mesh().free_node(gi, gj)];
  };
  CHECK(value_at(0.25, 0.25) > 0.0);
  CHECK(value_at(0.75, 0.25) < 0.0);
  CHECK(value_at(0.25, 0.75) < 0.0);
  CHECK(value_at(0.75, 0.75) > 0.0);
}

TEST_CASE("newton solves the linear surrogate in one iteration") {
  FomProblem p = small_heat(8, 8, 0.0);  // domain admits mu1 = 0
  FomSolution sol = newton_solve(p, {0.0, 1.0}, Eigen::VectorXd());
  CHECK(sol.newton_iters == 1);
}

TEST_CASE("newton residual norms are non-increasing across accepted steps") {
  FomProblem p = small_heat(16, 16, 0.01);
  for (const Param mu : {Param{9.0, 9.0}, Param{0.5, 4.0}}) {
    FomSolution sol = newton_solve(p, mu, Eigen::VectorXd());
    for (size_t k = 1; k < sol.residual_history.size(); ++k) {
      CHECK(sol.residual_history[k] <= sol.residual_history[k - 1] * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("newton matches the burgers closed form on the coarse mesh") {
  FomProblem p = small_burgers(120, 12);
  const Param mu{7692.5384, 21.9230};
  FomSolution sol = newton_solve(p, mu, Eigen::VectorXd());
  Eigen::VectorXd exact(p.size());
  for (int k = 0; k < p.num_free_nodes(); ++k) {
    const auto u =
        burgers_exact(p.mesh().free_x1(k), p.mesh().free_x2(k), mu, p.burgers_constants());
    exact[2 * k] = u[0];
    exact[2 * k + 1] = u[1];
  }
  CHECK((sol.x - exact).norm() / exact.norm() < 5e-2);
}

TEST_CASE("burgers closed form") {
  const BurgersConstants c;
  SUBCASE("defaults match the benchmark constants") {
    CHECK(c.nu == 0.1);
    CHECK(c.x1_0 == 1.0);
    CHECK(c.a3 == 0.0);
    CHECK(c.a4 == 0.0);
    CHECK(c.a5 == 1.0);
  }
  SUBCASE("u2 vanishes on the bottom edge") {
    for (double x1 : {-0.9, -0.3, 0.2, 0.8}) {
      CHECK(burgers_exact(x1, 0.0, {50.0, 12.0}, c)[1] == 0.0);
    }
  }
  SUBCASE("frozen regression point") {
    // Direct evaluation of the closed form in an independent script.
    const auto u = burgers_exact(0.0, 0.025, {100.0, 10.0}, c);
    CHECK(u[0] == doctest::Approx(1.9897396191484324).epsilon(1e-14));
    CHECK(u[1] == doctest::Approx(0.5083021122023261).epsilon(1e-14));
  }
}

TEST_CASE("error paths") {
  FomProblem p = small_heat(5, 5, 0.01);
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(p.size());
  bad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(p.residual(bad, {1.0, 1.0}), NonFiniteState);
  CHECK_THROWS_AS(p.residual(Eigen::VectorXd::Zero(p.size()), {100.0, 1.0}),
                  ParameterOutOfDomain);

  NewtonOptions opts;
  opts.max_iters = 1;
  try {
    newton_solve(small_heat(16, 16, 0.01), {10.0, 10.0}, Eigen::VectorXd(), opts);
    CHECK(false);
  } catch (const NonConvergence& e) {
    CHECK(!e.residual_history.empty());
  }
}

TEST_CASE("residual evaluation is deterministic") {
  FomProblem p = small_heat(12, 12);
  const Eigen::VectorXd x = random_state(p.size(), 42);
  const Eigen::VectorXd a = p.residual(x, {3.0, 2.0});
  const Eigen::VectorXd b = p.residual(x, {3.0, 2.0});
  CHECK((a - b).lpNorm<Eigen::Infinity>() == 0.0);
}
