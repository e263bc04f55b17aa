#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "ddrom/errors.hpp"
#include "ddrom/harness.hpp"
#include "ddrom/sqp.hpp"
#include "test_util.hpp"

using namespace ddrom;
using test::random_state;
using test::small_heat;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

struct Setup {
  FomProblem problem;
  Decomposition decomp;
  BasisSet bases;
  ConstraintSet constraints;
  HyperData hyper;

  RomProblem rom(const Param& mu) const {
    return RomProblem{&problem, &decomp, &bases, &constraints, &hyper, mu};
  }
};

// Snapshot-trained ROM over a small heat mesh.
Setup make_setup(int nx, int px, int py, BasisKind kind, double discard, std::uint64_t seed,
                 int n_snap = 6, double param_lo = 0.0) {
  Setup s;
  s.problem = small_heat(nx, nx, param_lo);
  s.decomp = build_decomposition(s.problem, px, py);

  std::mt19937_64 rng(seed);
  Eigen::MatrixXd X(s.problem.size(), n_snap);
  for (int c = 0; c < n_snap; ++c) {
    const Param mu{0.2 + 9.0 * (rng() % 1000) / 1000.0, 0.2 + 9.0 * (rng() % 1000) / 1000.0};
    X.col(c) = newton_solve(s.problem, mu, Eigen::VectorXd()).x;
  }
  s.bases = build_basis_set(X, s.decomp, kind, discard, discard);
  s.constraints = build_strong_constraints(s.decomp);
  ResidualBasis rb;
  s.hyper = build_hyper_data(HyperScheme::Identity, s.decomp, s.problem, rb);
  return s;
}

std::vector<Eigen::VectorXd> zero_vars(const Setup& s) {
  std::vector<Eigen::VectorXd> x;
  for (int i = 0; i < s.decomp.num_subdomains(); ++i) {
    x.push_back(Eigen::VectorXd::Zero(s.bases.nhat(i)));
  }
  return x;
}

// Unconstrained Gauss-Newton in null-space coordinates: the independent
// oracle for strong-constraint solves. Variables are the interior blocks
// plus one shared null-space coordinate vector.
struct NullspaceOracle {
  const Setup& s;
  Param mu;
  NullspaceResult ns;

  explicit NullspaceOracle(const Setup& setup, const Param& mu_in) : s(setup), mu(mu_in) {
    ns = nullspace_reduce(s.constraints, s.bases);
  }

  // Pack: [xo_1; ...; xo_nd; w_null] for separate families, [w_null] coupled.
  int interior_dim() const {
    if (s.bases.coupled_family()) return 0;
    int t = 0;
    for (int i = 0; i < s.decomp.num_subdomains(); ++i) t += s.bases.nhat_interior(i);
    return t;
  }
  int dim() const { return interior_dim() + static_cast<int>(ns.full.cols()); }

  Eigen::VectorXd residual_of(const Eigen::VectorXd& z) const {
    const int nd = s.decomp.num_subdomains();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(s.problem.size());
    const Eigen::VectorXd wnull = z.tail(ns.full.cols());
    int at = 0;
    for (int i = 0; i < nd; ++i) {
      const Subdomain& sub = s.decomp.subs[i];
      Eigen::VectorXd xo, xg;
      if (s.bases.coupled_family()) {
        const Eigen::VectorXd xhat = ns.blocks[i] * wnull;
        xo = s.bases.interior[i] * xhat;
        xg = s.bases.boundary[i] * xhat;
      } else {
        xo = s.bases.interior[i] * z.segment(at, s.bases.nhat_interior(i));
        at += s.bases.nhat_interior(i);
        xg = s.bases.boundary[i] * (ns.blocks[i] * wnull);
      }
      for (int k = 0; k < sub.num_interior(); ++k) x[sub.interior_dofs[k]] = xo[k];
      for (int k = 0; k < sub.num_interface(); ++k) x[sub.interface_dofs[k]] = xg[k];
    }
    // Stacked subdomain residuals (strong constraints make port values agree).
    Eigen::VectorXd r(s.problem.size());
    int row_at = 0;
    for (int i = 0; i < nd; ++i) {
      Eigen::VectorXd ri;
      s.problem.residual_rows(s.decomp.subs[i].residual_rows, x, mu, ri);
      r.segment(row_at, ri.size()) = ri;
      row_at += static_cast<int>(ri.size());
    }
    return r;
  }

  Eigen::VectorXd solve(int max_iters = 60, double tol = 1e-12) const {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(dim());
    for (int it = 0; it < max_iters; ++it) {
      const Eigen::VectorXd r = residual_of(z);
      // Dense finite-difference Jacobian of the reduced map; independent of
      // the production assembly path.
      Eigen::MatrixXd J(r.size(), z.size());
      const double h = 1e-7;
      for (int c = 0; c < z.size(); ++c) {
        Eigen::VectorXd zp = z, zm = z;
        zp[c] += h;
        zm[c] -= h;
        J.col(c) = (residual_of(zp) - residual_of(zm)) / (2.0 * h);
      }
      const Eigen::VectorXd g = J.transpose() * r;
      if (g.norm() < tol) break;
      const Eigen::VectorXd dz = (J.transpose() * J).ldlt().solve(-g);
      double alpha = 1.0;
      const double f0 = r.squaredNorm();
      while (alpha > 1e-4 && residual_of(z + alpha * dz).squaredNorm() > f0) alpha *= 0.5;
      z += alpha * dz;
    }
    return z;
  }
};

}  // namespace

TEST_CASE("gauss-newton solves a linear unconstrained reduction in one iteration") {
  Setup s = make_setup(6, 1, 1, BasisKind::FullInterface, 1e-10, 11, 4, 0.0);
  RomSolution sol = sqp_solve(s.rom({0.0, 1.0}));  // mu1 = 0: linear residual
  CHECK(sol.iters == 1);
  CHECK(sol.converged);
}

TEST_CASE("assembled KKT blocks match a dense symbolic construction") {
  Setup s = make_setup(8, 2, 1, BasisKind::Port, 1e-9, 21, 5, 0.0);
  const Param mu{0.0, 1.0};  // linear residual: Jacobian independent of state

  auto xhat = zero_vars(s);
  std::mt19937_64 rng(3);
  for (auto& xi : xhat) xi = random_state(xi.size(), rng());

  KktSystem sys = assemble_kkt(s.rom(mu), xhat, Eigen::VectorXd::Zero(0));

  // Oracle: everything dense from the full Jacobian and the basis matrices.
  // Each subdomain is evaluated at its own scattered state (the boundary
  // coordinates of different subdomains disagree away from feasibility).
  // Strong constraints with shared port bases leave redundant rows, so the
  // solver works with a row-compressed constraint operator; compare the
  // primal Hessian blocks and gradients, plus the feasible-set geometry.
  const int nd = s.decomp.num_subdomains();
  int at = 0;
  for (int i = 0; i < nd; ++i) {
    const Subdomain& sub = s.decomp.subs[i];
    Eigen::VectorXd x = Eigen::VectorXd::Zero(s.problem.size());
    const Eigen::VectorXd xo = s.bases.interior[i] * xhat[i].head(s.bases.nhat_interior(i));
    const Eigen::VectorXd xg = s.bases.boundary[i] * xhat[i].tail(s.bases.nhat_boundary(i));
    for (int k = 0; k < sub.num_interior(); ++k) x[sub.interior_dofs[k]] = xo[k];
    for (int k = 0; k < sub.num_interface(); ++k) x[sub.interface_dofs[k]] = xg[k];
    const Eigen::MatrixXd Jfull = Eigen::MatrixXd(s.problem.jacobian(x, mu));
    const Eigen::VectorXd rfull = s.problem.residual(x, mu);

    Eigen::MatrixXd Jr(sub.num_rows(), s.problem.size());
    Eigen::VectorXd ri(sub.num_rows());
    for (int k = 0; k < sub.num_rows(); ++k) {
      Jr.row(k) = Jfull.row(sub.residual_rows[k]);
      ri[k] = rfull[sub.residual_rows[k]];
    }
    Eigen::MatrixXd Jo(sub.num_rows(), sub.num_interior());
    Eigen::MatrixXd Jg(sub.num_rows(), sub.num_interface());
    for (int k = 0; k < sub.num_interior(); ++k) Jo.col(k) = Jr.col(sub.interior_dofs[k]);
    for (int k = 0; k < sub.num_interface(); ++k) Jg.col(k) = Jr.col(sub.interface_dofs[k]);
    const Eigen::MatrixXd Mo = Jo * s.bases.interior[i];
    const Eigen::MatrixXd Mg = Jg * s.bases.boundary[i];

    const int no = s.bases.nhat_interior(i), ng = s.bases.nhat_boundary(i);
    Eigen::MatrixXd H(no + ng, no + ng);
    H.topLeftCorner(no, no) = Mo.transpose() * Mo;
    H.topRightCorner(no, ng) = Mo.transpose() * Mg;
    H.bottomLeftCorner(ng, no) = Mg.transpose() * Mo;
    H.bottomRightCorner(ng, ng) = Mg.transpose() * Mg;
    CHECK((sys.matrix.block(at, at, no + ng, no + ng) - H).lpNorm<Eigen::Infinity>() < 1e-10);

    Eigen::VectorXd g(no + ng);
    g.head(no) = Mo.transpose() * ri;
    g.tail(ng) = Mg.transpose() * ri;
    CHECK((sys.rhs.segment(at, no + ng) + g).lpNorm<Eigen::Infinity>() < 1e-10);
    at += no + ng;
  }

  // The multiplier block pairs the compressed constraints with zero fill.
  const int np = sys.num_primal, nm = sys.num_multipliers;
  CHECK(nm > 0);
  CHECK(sys.matrix.bottomRightCorner(nm, nm).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((sys.matrix - sys.matrix.transpose()).lpNorm<Eigen::Infinity>() < 1e-12);

  // Compressed rows span the same feasible set as the stacked originals.
  Eigen::MatrixXd reduced = reduced_constraint_matrix(s.constraints, s.bases);
  Eigen::MatrixXd compressed(nm, reduced.cols());
  int col_at = 0;
  for (int i = 0; i < nd; ++i) {
    const int no = s.bases.nhat_interior(i), ng = s.bases.nhat_boundary(i);
    int offset = 0;
    for (int q = 0; q < i; ++q) offset += s.bases.nhat(q);
    compressed.middleCols(col_at, ng) = sys.matrix.block(np, offset + no, nm, ng);
    col_at += ng;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(reduced, Eigen::ComputeFullV);
  int rank = 0;
  for (int k = 0; k < svd.singularValues().size(); ++k) {
    if (svd.singularValues()(k) > 1e-12 * svd.singularValues()(0)) ++rank;
  }
  CHECK(nm == rank);
  const Eigen::MatrixXd kernel = svd.matrixV().rightCols(reduced.cols() - rank);
  CHECK((compressed * kernel).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("full-subdomain hessian equals the four-term dense construction") {
  Setup s = make_setup(8, 2, 1, BasisKind::FullSubdomain, 1e-9, 31, 5, 0.0);
  const Param mu{0.0, 1.0};
  auto xhat = zero_vars(s);
  for (auto& xi : xhat) xi = random_state(xi.size(), 17);

  KktSystem sys = assemble_kkt(s.rom(mu), xhat, Eigen::VectorXd::Zero(0));

  const int nd = s.decomp.num_subdomains();
  int at = 0;
  for (int i = 0; i < nd; ++i) {
    const Subdomain& sub = s.decomp.subs[i];
    Eigen::VectorXd x = Eigen::VectorXd::Zero(s.problem.size());
    const Eigen::VectorXd xo = s.bases.interior[i] * xhat[i];
    const Eigen::VectorXd xg = s.bases.boundary[i] * xhat[i];
    for (int k = 0; k < sub.num_interior(); ++k) x[sub.interior_dofs[k]] = xo[k];
    for (int k = 0; k < sub.num_interface(); ++k) x[sub.interface_dofs[k]] = xg[k];
    const Eigen::MatrixXd Jfull = Eigen::MatrixXd(s.problem.jacobian(x, mu));
    Eigen::MatrixXd Jo(sub.num_rows(), sub.num_interior());
    Eigen::MatrixXd Jg(sub.num_rows(), sub.num_interface());
    for (int k = 0; k < sub.num_rows(); ++k) {
      for (int c = 0; c < sub.num_interior(); ++c) {
        Jo(k, c) = Jfull(sub.residual_rows[k], sub.interior_dofs[c]);
      }
      for (int c = 0; c < sub.num_interface(); ++c) {
        Jg(k, c) = Jfull(sub.residual_rows[k], sub.interface_dofs[c]);
      }
    }
    const Eigen::MatrixXd Mo = Jo * s.bases.interior[i];
    const Eigen::MatrixXd Mg = Jg * s.bases.boundary[i];
    // The four summed terms of the coupled Gauss-Newton block.
    const Eigen::MatrixXd H = Mo.transpose() * Mo + Mo.transpose() * Mg + Mg.transpose() * Mo +
                              Mg.transpose() * Mg;
    const int nh = s.bases.nhat(i);
    CHECK((sys.matrix.block(at, at, nh, nh) - H).lpNorm<Eigen::Infinity>() < 1e-10);
    at += nh;
  }
}

TEST_CASE("sqp agrees with the null-space elimination oracle on small problems") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    // Meshes with n <= 49, both families, strong constraints.
    const int nx = 5 + static_cast<int>(seed % 3);  // 16..36 free DOFs
    const BasisKind kind = seed % 2 == 0 ? BasisKind::Port : BasisKind::FullSubdomain;
    Setup s = make_setup(nx, 2, 1, kind, 1e-8, 1000 + seed, 5);
    const Param mu{1.0 + 0.4 * (seed % 5), 1.0 + 0.3 * (seed % 7)};

    SqpOptions opts;
    opts.tol = 1e-10;
    RomSolution sol = sqp_solve(s.rom(mu), opts);
    CHECK(sol.converged);
    CHECK(sol.kkt_norm <= 1e-8);
    CHECK(sol.constraint_residual <= 1e-8);

    NullspaceOracle oracle(s, mu);
    const Eigen::VectorXd z = oracle.solve();

    // Compare reconstructed states.
    const int nd = s.decomp.num_subdomains();
    int at = 0;
    for (int i = 0; i < nd; ++i) {
      Eigen::VectorXd xo_oracle, xg_oracle;
      if (s.bases.coupled_family()) {
        const Eigen::VectorXd xhat = oracle.ns.blocks[i] * z.tail(oracle.ns.full.cols());
        xo_oracle = s.bases.interior[i] * xhat;
        xg_oracle = s.bases.boundary[i] * xhat;
      } else {
        xo_oracle = s.bases.interior[i] * z.segment(at, s.bases.nhat_interior(i));
        at += s.bases.nhat_interior(i);
        xg_oracle = s.bases.boundary[i] * (oracle.ns.blocks[i] * z.tail(oracle.ns.full.cols()));
      }
      const double scale = std::max(1.0, xo_oracle.norm());
      CHECK((sol.state_interior[i] - xo_oracle).norm() / scale < 1e-8);
      CHECK((sol.state_boundary[i] - xg_oracle).norm() / std::max(1.0, xg_oracle.norm()) < 1e-8);
    }
    ++checked;
  }
  CHECK(checked == 20);
}

TEST_CASE("objective is non-increasing across accepted line-search steps") {
  Setup s = make_setup(10, 2, 1, BasisKind::Port, 1e-9, 77, 6);
  RomSolution sol = sqp_solve(s.rom({8.0, 8.0}));
  for (size_t k = 1; k < sol.trace.size(); ++k) {
    CHECK(sol.trace[k].objective <= sol.trace[k - 1].objective * (1.0 + 1e-9) + 1e-14);
  }
}

TEST_CASE("identity and fully-sampled gappy weighting give the same minimizer") {
  Setup s = make_setup(8, 2, 1, BasisKind::Port, 1e-9, 41, 5, 0.0);
  const Param mu{0.0, 1.0};  // linear: unique minimizer over the trial space
  RomSolution sol_id = sqp_solve(s.rom(mu));

  // Orthonormal residual basis over every row, full sample set.
  Setup s2 = s;
  std::vector<std::vector<int>> all_nodes(s.decomp.num_subdomains());
  ResidualBasis rb;
  for (int i = 0; i < s.decomp.num_subdomains(); ++i) {
    const int rows = s.decomp.subs[i].num_rows();
    rb.blocks.push_back(pod(random_matrix(rows, rows, 60 + i), 0.0).basis);
    rb.snapshot_counts.push_back(rows);
    all_nodes[i].resize(rows);
    for (int k = 0; k < rows; ++k) all_nodes[i][k] = k;
  }
  s2.hyper = build_weighting(HyperScheme::GappyPod, s.decomp, rb, all_nodes);
  induce_state_samplers(s.decomp, s.problem, s2.hyper);
  RomSolution sol_gp = sqp_solve(s2.rom(mu));

  for (int i = 0; i < s.decomp.num_subdomains(); ++i) {
    CHECK((sol_id.state_interior[i] - sol_gp.state_interior[i]).norm() /
              std::max(1.0, sol_id.state_interior[i].norm()) <
          1e-8);
  }
}

TEST_CASE("nullspace_reduce") {
  SUBCASE("no constraints yields the identity") {
    Setup s = make_setup(6, 1, 1, BasisKind::FullInterface, 1e-8, 5, 4);
    NullspaceResult ns = nullspace_reduce(s.constraints, s.bases);
    CHECK((ns.full - Eigen::MatrixXd::Identity(ns.full.rows(), ns.full.cols())).norm() == 0.0);
  }

  SUBCASE("identical one-column port bases leave the symmetric kernel") {
    Setup s = make_setup(6, 2, 1, BasisKind::Port, 1e-8, 6, 4);
    const int m = s.decomp.ports[0].size();
    Eigen::MatrixXd shared = Eigen::VectorXd::LinSpaced(m, 0.5, 1.5).normalized();
    s.bases.boundary[0] = shared;
    s.bases.boundary[1] = shared;
    NullspaceResult ns = nullspace_reduce(s.constraints, s.bases);
    REQUIRE(ns.full.cols() == 1);
    const double v = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(std::abs(ns.full(0, 0)) - v) < 1e-12);
    CHECK(std::abs(ns.full(0, 0) - ns.full(1, 0)) < 1e-12);

    // Width formula: sum nhat_Gamma - rank.
    const Eigen::MatrixXd reduced = reduced_constraint_matrix(s.constraints, s.bases);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(reduced);
    int rank = 0;
    for (int k = 0; k < svd.singularValues().size(); ++k) {
      if (svd.singularValues()(k) > 1e-12 * svd.singularValues()(0)) ++rank;
    }
    CHECK(ns.full.cols() == 2 - rank);
  }
}

TEST_CASE("reconstruct_global") {
  SUBCASE("strong port constraints allow strict reconstruction") {
    Setup s = make_setup(8, 2, 1, BasisKind::Port, 1e-9, 51, 5);
    RomSolution sol = sqp_solve(s.rom({2.0, 2.0}));
    GlobalReconstruction rec = reconstruct_global(sol, s.decomp, ReconstructMode::Strict);
    CHECK(rec.max_port_discrepancy <= 1e-8);
    CHECK(rec.x.size() == s.problem.size());
  }

  SUBCASE("weak constraints report the discrepancy and average ports") {
    Setup s = make_setup(8, 2, 1, BasisKind::FullInterface, 1e-9, 52, 5);
    s.constraints = build_weak_constraints(s.decomp, 1, 7);
    RomSolution sol = sqp_solve(s.rom({2.0, 2.0}));
    GlobalReconstruction rec = reconstruct_global(sol, s.decomp, ReconstructMode::PortAverage);
    CHECK(rec.max_port_discrepancy > 1e-8);
    CHECK_THROWS_AS(reconstruct_global(sol, s.decomp, ReconstructMode::Strict), PortMismatch);

    // Averaged port values are the arithmetic mean of the member values.
    const Port& port = s.decomp.ports[0];
    const auto i0 = s.decomp.port_local_indices(port.id, port.members[0]);
    const auto i1 = s.decomp.port_local_indices(port.id, port.members[1]);
    for (int k = 0; k < port.size(); ++k) {
      const double mean = 0.5 * (sol.state_boundary[port.members[0]][i0[k]] +
                                 sol.state_boundary[port.members[1]][i1[k]]);
      CHECK(rec.x[port.dofs[k]] == doctest::Approx(mean).epsilon(1e-14));
    }
  }
}

TEST_CASE("sqp reports non-convergence with its trace") {
  Setup s = make_setup(8, 2, 1, BasisKind::Port, 1e-9, 61, 5);
  SqpOptions opts;
  opts.max_iters = 1;
  opts.tol = 1e-14;
  try {
    sqp_solve(s.rom({9.5, 9.5}), opts);
    CHECK(false);
  } catch (const NonConvergence& e) {
    CHECK(!e.residual_history.empty());
  }
}
