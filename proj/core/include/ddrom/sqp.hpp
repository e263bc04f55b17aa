#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "ddrom/bases.hpp"
#include "ddrom/decomp.hpp"
#include "ddrom/fom.hpp"
#include "ddrom/hyper.hpp"

namespace ddrom {

/// A fully assembled reduced problem: minimize sum_i |B_i r_i|^2 over the
/// trial subspaces subject to the port-compatibility constraints.
struct RomProblem {
  const FomProblem* fom = nullptr;
  const Decomposition* decomp = nullptr;
  const BasisSet* bases = nullptr;
  const ConstraintSet* constraints = nullptr;
  const HyperData* hyper = nullptr;
  Param mu{0.0, 0.0};
};

struct SqpOptions {
  double tol = 1e-8;  // relative KKT norm
  int max_iters = 50;
  bool line_search = true;
  double min_step = 1.0 / 1024.0;
};

struct SqpIterRecord {
  int iter = 0;
  double kkt_norm = 0.0;
  double alpha = 0.0;
  double objective = 0.0;
  double constraint_norm = 0.0;
};

struct SqpTimings {
  double assembly_seconds = 0.0;  // sum over iterations of the slowest subdomain
  double solve_seconds = 0.0;     // serial reduce + saddle solve + update
  double total_seconds = 0.0;
};

struct RomSolution {
  // Generalized coordinates: interior/boundary pairs, or coupled per-subdomain
  // blocks for the full-subdomain family (stored in xhat_coupled).
  std::vector<Eigen::VectorXd> xhat_interior;
  std::vector<Eigen::VectorXd> xhat_boundary;
  std::vector<Eigen::VectorXd> xhat_coupled;
  Eigen::VectorXd lambda;  // multipliers of the row-compressed constraint system

  std::vector<Eigen::VectorXd> state_interior;  // reconstructed states
  std::vector<Eigen::VectorXd> state_boundary;

  double objective = 0.0;
  double kkt_norm = 0.0;
  double constraint_residual = 0.0;  // |sum_i A_i Phi^G_i xhat^G_i| with the original A
  int iters = 0;
  bool converged = false;
  std::vector<SqpIterRecord> trace;
  SqpTimings timings;
};

/// Dense KKT saddle system at a given iterate, exposed for verification.
/// Variable order: per subdomain [xhat_Omega_i; xhat_Gamma_i] (or xhat_i),
/// then the multipliers of the compressed constraints. `rhs` is the negative
/// KKT residual.
struct KktSystem {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
  int num_primal = 0;
  int num_multipliers = 0;
};

KktSystem assemble_kkt(const RomProblem& problem, const std::vector<Eigen::VectorXd>& xhat,
                       const Eigen::VectorXd& lambda);

/// Gauss-Newton SQP with backtracking line search on the merit
/// sum |B r|^2 + rho |c|, rho = 10 |lambda|_inf + 1. Saddle systems are
/// solved by a dense direct factorization (sparse LU above dimension 2000).
RomSolution sqp_solve(const RomProblem& problem, const SqpOptions& opts = {},
                      const std::vector<Eigen::VectorXd>* xhat0 = nullptr,
                      const Eigen::VectorXd* lambda0 = nullptr);

struct NullspaceResult {
  Eigen::MatrixXd full;                  // orthonormal columns spanning ker(Abar)
  std::vector<Eigen::MatrixXd> blocks;   // per-subdomain row blocks N_i
};

/// Orthonormal null-space basis of the stacked reduced constraint matrix
/// [A_1 Phi^G_1 ... A_nd Phi^G_nd]; requires strong constraints.
NullspaceResult nullspace_reduce(const ConstraintSet& constraints, const BasisSet& bases);

enum class ReconstructMode { Strict, PortAverage };

struct GlobalReconstruction {
  Eigen::VectorXd x;
  double max_port_discrepancy = 0.0;
};

/// Scatter subdomain states into a single global vector. Strict mode requires
/// port agreement within 1e-8 and throws PortMismatch otherwise; PortAverage
/// averages disagreeing port values and reports the largest discrepancy.
GlobalReconstruction reconstruct_global(const RomSolution& solution, const Decomposition& d,
                                        ReconstructMode mode);

}  // namespace ddrom
