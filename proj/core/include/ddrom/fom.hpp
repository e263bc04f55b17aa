#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <array>
#include <span>
#include <vector>

#include "ddrom/mesh.hpp"

namespace ddrom {

using Param = std::array<double, 2>;

struct ParamDomain {
  Param lo{0.0, 0.0};
  Param hi{1.0, 1.0};

  bool contains(const Param& mu) const {
    return mu[0] >= lo[0] && mu[0] <= hi[0] && mu[1] >= lo[1] && mu[1] <= hi[1];
  }
  Param midpoint() const { return {0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])}; }
};

enum class FomKind { HeatFem, BurgersFd };

/// Source amplitude of the nonlinear diffusion benchmark.
struct HeatConstants {
  double forcing = 100.0;
};

/// Closed-form solution constants of the steady Burgers benchmark.
/// The parameter pair is (a1, lambda); a2 is tied to a1.
struct BurgersConstants {
  double nu = 0.1;
  double x1_0 = 1.0;
  double a3 = 0.0;
  double a4 = 0.0;
  double a5 = 1.0;
};

/// Velocity pair of the closed-form steady Burgers solution at (x1, x2).
/// Throws SingularDenominator when the scalar potential vanishes.
std::array<double, 2> burgers_exact(double x1, double x2, const Param& mu,
                                    const BurgersConstants& c);

/// Compact row-sliced Jacobian: CSR-like triplets per requested row.
struct JacobianRows {
  std::vector<int> offsets;  // size rows+1
  std::vector<int> cols;     // global free-DOF columns
  std::vector<double> vals;

  void clear() {
    offsets.assign(1, 0);
    cols.clear();
    vals.clear();
  }
  int num_rows() const { return static_cast<int>(offsets.size()) - 1; }
};

/// Parameterized nonlinear algebraic system r(x; mu) = 0 arising from one of
/// the two benchmark discretizations. All evaluations are pure functions of
/// their inputs and safe to call concurrently.
class FomProblem {
 public:
  FomProblem() = default;  // empty placeholder; build via heat()/burgers()

  static FomProblem heat(const StructuredMesh& mesh, const ParamDomain& dom,
                         const HeatConstants& c = {});
  static FomProblem burgers(const StructuredMesh& mesh, const ParamDomain& dom,
                            const BurgersConstants& c = {});

  FomKind kind() const { return kind_; }
  const StructuredMesh& mesh() const { return mesh_; }
  const ParamDomain& param_domain() const { return domain_; }
  const HeatConstants& heat_constants() const { return heat_; }
  const BurgersConstants& burgers_constants() const { return burgers_; }

  int size() const { return mesh_.num_free_dofs(); }
  int dofs_per_node() const { return mesh_.dofs_per_node; }
  int num_free_nodes() const { return mesh_.num_free_nodes(); }

  Eigen::VectorXd residual(const Eigen::VectorXd& x, const Param& mu) const;
  Eigen::SparseMatrix<double> jacobian(const Eigen::VectorXd& x, const Param& mu) const;

  /// Evaluate selected residual rows. `x` must hold valid values at every DOF
  /// in the stencils of `rows`; other entries are never read.
  void residual_rows(std::span<const int> rows, const Eigen::VectorXd& x, const Param& mu,
                     Eigen::VectorXd& out) const;
  void jacobian_rows(std::span<const int> rows, const Eigen::VectorXd& x, const Param& mu,
                     JacobianRows& out) const;

  /// Structural nonzero columns of one Jacobian row (state independent).
  std::vector<int> stencil(int row) const;

  /// Average flop counts per residual entry / Jacobian row, for cost estimates.
  double residual_entry_flops() const;
  double jacobian_row_flops() const;

 private:
  void validate(const Eigen::VectorXd& x, const Param& mu) const;

  FomKind kind_ = FomKind::HeatFem;
  StructuredMesh mesh_;
  ParamDomain domain_;
  HeatConstants heat_;
  BurgersConstants burgers_;

  // Heat precomputations (uniform mesh): element stiffness, quadrature shape
  // values, scaled weights, and the parameter-independent load vector.
  Eigen::Matrix4d ke_;
  std::array<std::array<double, 4>, 4> shape_;  // shape_[q][a]
  double qweight_ = 0.0;
  Eigen::VectorXd load_;

  friend struct HeatKernel;
  friend struct BurgersKernel;
};

struct FomSolution {
  Eigen::VectorXd x;
  Param mu{0.0, 0.0};
  int newton_iters = 0;
  std::vector<double> residual_history;                // per-iteration 2-norms
  std::vector<Eigen::VectorXd> residual_iterates;      // pre-convergence residual vectors
};

struct NewtonOptions {
  double tol = 1e-10;      // relative: |r| <= tol * max(1, |r0|)
  int max_iters = 25;
  double min_step = 1.0 / 1024.0;
  bool keep_residual_iterates = false;
};

/// Damped Newton--Raphson with backtracking line search (halving, floor at
/// min_step). Throws NonConvergence past max_iters and SingularJacobian on a
/// failed sparse factorization.
FomSolution newton_solve(const FomProblem& problem, const Param& mu,
                         const Eigen::VectorXd& x0, const NewtonOptions& opts = {});

}  // namespace ddrom
