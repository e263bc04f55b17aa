#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ddrom/bases.hpp"
#include "ddrom/decomp.hpp"
#include "ddrom/fom.hpp"
#include "ddrom/hyper.hpp"
#include "ddrom/sqp.hpp"
#include "ddrom/training.hpp"

namespace ddrom {

/// sqrt( (1/nd) sum_i |x~_i - x_i|^2 / |x_i|^2 ) over subdomain state tuples.
double relative_error(const RomSolution& rom, const FomSolution& fom, const Decomposition& d);

/// Computable a posteriori bound numerator: ( sum_i |B_i r_i(x~_i)|^2 )^{1/2}.
double aposteriori_residual(const RomSolution& rom, const RomProblem& problem);

/// Inputs of the per-iteration operation-count model.
struct CostDims {
  int num_subdomains = 0;
  bool coupled = false;    // full-subdomain family
  bool dense_weighting = false;
  int n_constraints = 0;   // n_A
  std::vector<double> nhat_interior, nhat_boundary;  // per subdomain
  std::vector<double> n_sample_interior, n_sample_boundary, n_sample_rows;
  std::vector<double> n_weight_rows;                 // n_B
  std::vector<double> residual_flops, jacobian_flops;  // c^r, c^J
  std::vector<double> jac_nnz_interior, jac_nnz_boundary;  // w^Omega, w^Gamma
};

/// Per-SQP-iteration flop counts; steps 1-3 are per-subdomain (parallel),
/// steps 4-7 serial.
struct CostEstimate {
  std::vector<double> step1, step2, step3;
  double step4 = 0.0, step5 = 0.0, step6 = 0.0, step7 = 0.0;

  double parallel_max() const;
  double serial_total() const { return step4 + step5 + step6 + step7; }
  double total_per_iteration() const;
};

CostEstimate cost_model(const CostDims& dims);

/// Extract the model inputs from assembled offline artifacts.
CostDims cost_dims(const FomProblem& problem, const Decomposition& d, const BasisSet& bases,
                   const ConstraintSet& constraints, const HyperData& hyper);

struct RunRecord {
  std::string method;  // "DD-LSPG", "DD-GNAT", "Collocation"
  BasisKind basis = BasisKind::Port;
  bool strong = true;
  int n_c = 0;  // weak constraints per port (0 for strong)
  double upsilon_state = 0.0, upsilon_boundary = 0.0, upsilon_residual = 0.0;
  double sample_ratio = 0.0;
  double rel_err = 0.0;
  double t_assembly = 0.0, t_solve = 0.0, t_total = 0.0;
  int nhat_total = 0, n_constraints = 0, n_samples_total = 0;
  std::uint64_t seed = 0;
};

/// Strictly non-dominated subset under (rel_err, t_total).
std::vector<RunRecord> pareto_front(const std::vector<RunRecord>& records);

struct StudyConfig {
  int split_x = 2, split_y = 2;
  Param mu_test{5.005, 5.005};
  int train_n1 = 20, train_n2 = 20;
  std::vector<double> upsilon_state, upsilon_boundary;  // interior/boundary families
  std::vector<double> upsilon_subdomain;                // full-subdomain family
  std::vector<double> upsilon_residual;                 // DD-GNAT
  std::vector<double> sample_ratios{1.0, 1.5, 2.0, 4.0};
  std::vector<int> weak_counts{1, 2, 3, 4, 5};
  bool include_strong = true;
  bool include_gnat = true;
  std::vector<BasisKind> kinds{BasisKind::Port, BasisKind::Skeleton, BasisKind::FullInterface,
                               BasisKind::FullSubdomain};
  int weak_seeds = 5;
  std::uint64_t seed0 = 1;
  int workers = 1;
  NewtonOptions fom_opts;
  SqpOptions rom_opts;
};

struct StudyResult {
  std::vector<RunRecord> records;
  double fom_seconds = 0.0;
  FomSolution fom;
};

/// Full parameter study against one problem: offline training once, then one
/// record per method-parameter instance. Weak-constraint records average
/// over `weak_seeds` seeded draws; failures are logged and skipped.
StudyResult run_study(const FomProblem& problem, const StudyConfig& config);

/// Same, reusing precomputed training snapshots.
StudyResult run_study(const FomProblem& problem, const StudyConfig& config,
                      const Decomposition& decomp, const SnapshotStore& store);

/// Write study.csv, pareto_<method>.csv, and JSON plot data into `dir`.
void report(const std::vector<RunRecord>& records, const std::filesystem::path& dir);

std::string to_csv(const std::vector<RunRecord>& records);
std::vector<RunRecord> from_csv(const std::string& text);

}  // namespace ddrom
