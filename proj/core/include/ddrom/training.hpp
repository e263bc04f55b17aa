#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ddrom/decomp.hpp"
#include "ddrom/fom.hpp"

namespace ddrom {

enum class TrainingMode { TopDown, BottomUp };

struct TrainingPlan {
  TrainingMode mode = TrainingMode::TopDown;
  // Top-down: equispaced n1 x n2 grid over the parameter domain.
  int grid_n1 = 20, grid_n2 = 20;
  // Bottom-up: per-subdomain randomized interface conditions.
  int samples_per_subdomain = 200;
  double eta = 2.0;
  std::uint64_t seed = 0;
  std::vector<Param> mu_train;  // one per subdomain
  NewtonOptions newton;
};

/// Snapshot collection. Top-down fills `states` (n x n_train) and the
/// residual iterates grouped by Newton iteration; bottom-up fills
/// `subdomain_states`, one block per subdomain with rows ordered
/// [interior_dofs; interface_dofs].
struct SnapshotStore {
  TrainingMode mode = TrainingMode::TopDown;
  Eigen::MatrixXd states;
  std::vector<Param> params;
  std::vector<int> iters_per_param;
  std::vector<Eigen::MatrixXd> residual_iters;  // residual_iters[k]: iteration-k residuals
  std::vector<Eigen::MatrixXd> subdomain_states;
  std::vector<int> skipped;  // indices of non-converged samples

  /// All residual snapshots as one matrix, ordered parameter-major then
  /// iteration, matching the order they were produced.
  Eigen::MatrixXd residual_flat() const;
};

/// Solve the FOM over the training grid, storing states and the
/// pre-convergence Newton residual vectors. Non-converged points are skipped
/// with a record in `skipped`.
SnapshotStore run_top_down(const FomProblem& problem, const TrainingPlan& plan);

/// Ordered tensor-product Legendre functions evaluated at a port's nodes:
/// one column per function, enumerated by total degree then lexicographic
/// order, truncated at the node count. Port nodes must form a
/// coordinate-aligned segment or rectangle.
Eigen::MatrixXd legendre_port_functions(const Port& port, const FomProblem& problem);

/// Solve the subdomain-restricted FOM: rows at interior DOFs of `sub`, with
/// the interface DOFs frozen at `interface_values` and the usual Dirichlet
/// data elsewhere. Returns the interior state.
Eigen::VectorXd solve_subdomain_restricted(const FomProblem& problem, const Decomposition& d,
                                           int sub, const Eigen::VectorXd& interface_values,
                                           const Param& mu, const NewtonOptions& opts = {});

/// Bottom-up training: random Legendre combinations as port Dirichlet data,
/// per-subdomain solves at fixed training parameters.
SnapshotStore run_bottom_up(const FomProblem& problem, const Decomposition& d,
                            const TrainingPlan& plan);

}  // namespace ddrom
