#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>

#include "ddrom/bases.hpp"
#include "ddrom/decomp.hpp"
#include "ddrom/fom.hpp"
#include "ddrom/harness.hpp"
#include "ddrom/hyper.hpp"
#include "ddrom/training.hpp"

namespace ddrom {

/// DDRB matrix container: magic "DDRB", u32 version=1, u64 rows, u64 cols,
/// then row-major little-endian float64 payload.
void write_ddrb(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_ddrb(const std::filesystem::path& path);

/// Top-level tool configuration, parsed strictly (unknown keys rejected).
struct ToolConfig {
  FomProblem problem;
  Param mu{0.0, 0.0};
  bool has_mu = false;
  int split_x = 1, split_y = 1;
  NewtonOptions fom_opts;
  SqpOptions rom_opts;

  TrainingPlan train;
  bool has_train = false;

  BasisKind basis_kind = BasisKind::Port;
  double upsilon_state = 0.0, upsilon_boundary = 0.0, upsilon_residual = 0.0;
  bool has_bases = false;

  bool strong_constraints = true;
  int weak_per_port = 1;

  HyperScheme hyper_scheme = HyperScheme::Identity;
  double sample_ratio = 2.0;

  StudyConfig study;
  bool has_study = false;

  std::string records_path;  // for `report`
};

ToolConfig parse_config_file(const std::filesystem::path& path);
ToolConfig parse_config_text(const std::string& text);

// Artifact serialization: each writes DDRB payloads plus a JSON sidecar.
void write_decomposition(const std::filesystem::path& dir, const Decomposition& d);
Decomposition read_decomposition(const std::filesystem::path& dir);

void write_constraints(const std::filesystem::path& dir, const ConstraintSet& c);
ConstraintSet read_constraints(const std::filesystem::path& dir);

void write_basis_set(const std::filesystem::path& dir, const BasisSet& b);
BasisSet read_basis_set(const std::filesystem::path& dir);

void write_residual_basis(const std::filesystem::path& dir, const ResidualBasis& b);
ResidualBasis read_residual_basis(const std::filesystem::path& dir);

void write_hyper_data(const std::filesystem::path& dir, const HyperData& h);
HyperData read_hyper_data(const std::filesystem::path& dir);

/// Snapshot directory layout: states.ddrb, residuals/iter_<k>.ddrb, plan.json;
/// bottom-up stores write states_sub_<i>.ddrb instead of states.ddrb.
void write_snapshots(const std::filesystem::path& dir, const SnapshotStore& s);
SnapshotStore read_snapshots(const std::filesystem::path& dir);

}  // namespace ddrom
