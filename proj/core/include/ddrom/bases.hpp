#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ddrom/decomp.hpp"

namespace ddrom {

/// Result of snapshot POD.
///
/// Truncation convention, stated once because the double negation bites:
/// `discard_energy` is the fraction of cumulative singular-value mass that may
/// be dropped. The retained dimension is the smallest p with
///   sum_{j<=p} sigma_j / sum_k sigma_k >= 1 - discard_energy.
/// An energy criterion quoted as upsilon = 1-10^-k therefore corresponds to
/// discard_energy = 10^-k. Column signs are fixed so the first nonzero entry
/// of every basis vector is positive.
struct PodResult {
  Eigen::MatrixXd basis;
  Eigen::VectorXd singular_values;  // full spectrum of the snapshot matrix
  double discard_energy = 0.0;
  int rank() const { return static_cast<int>(basis.cols()); }
};

PodResult pod(const Eigen::MatrixXd& snapshots, double discard_energy);

enum class BasisKind { Port, Skeleton, FullInterface, FullSubdomain };

const char* to_string(BasisKind k);
BasisKind basis_kind_from_string(const std::string& s);

/// Per-subdomain trial bases. Interior/boundary families (Port, Skeleton,
/// FullInterface) carry independent interior and boundary blocks; the
/// FullSubdomain family carries one coupled basis whose interior/boundary
/// restrictions are row slices (and need not have full column rank alone).
struct BasisSet {
  BasisKind kind = BasisKind::Port;
  std::vector<Eigen::MatrixXd> interior;     // Phi^Omega_i
  std::vector<Eigen::MatrixXd> boundary;     // Phi^Gamma_i
  std::vector<Eigen::MatrixXd> coupled;      // Phi_i (FullSubdomain only)
  std::vector<Eigen::MatrixXd> port_blocks;  // shared per-port bases (Port kind only)
  double discard_state = 0.0;
  double discard_boundary = 0.0;

  bool coupled_family() const { return kind == BasisKind::FullSubdomain; }
  int num_subdomains() const { return static_cast<int>(interior.size()); }
  int nhat_interior(int i) const { return static_cast<int>(interior[i].cols()); }
  int nhat_boundary(int i) const { return static_cast<int>(boundary[i].cols()); }
  /// Subdomain trial dimension: nhat_Omega + nhat_Gamma, or nhat for coupled.
  int nhat(int i) const {
    return coupled_family() ? static_cast<int>(coupled[i].cols())
                            : nhat_interior(i) + nhat_boundary(i);
  }
  int nhat_total() const {
    int s = 0;
    for (int i = 0; i < num_subdomains(); ++i) s += nhat(i);
    return s;
  }
};

std::vector<Eigen::MatrixXd> build_interior_bases(const Eigen::MatrixXd& X,
                                                  const Decomposition& d, double discard);

struct BoundaryBases {
  std::vector<Eigen::MatrixXd> boundary;
  std::vector<Eigen::MatrixXd> port_blocks;  // Port kind only
};
BoundaryBases build_boundary_bases(const Eigen::MatrixXd& X, const Decomposition& d,
                                   double discard, BasisKind kind);

BasisSet build_full_subdomain_bases(const Eigen::MatrixXd& X, const Decomposition& d,
                                    double discard);

/// Convenience: assemble a complete BasisSet of the requested kind.
BasisSet build_basis_set(const Eigen::MatrixXd& X, const Decomposition& d, BasisKind kind,
                         double discard_state, double discard_boundary);

struct ResidualBasis {
  std::vector<Eigen::MatrixXd> blocks;  // Phi^r_i per subdomain
  std::vector<int> snapshot_counts;
  int nhat(int i) const { return static_cast<int>(blocks[i].cols()); }
};

ResidualBasis build_residual_bases(const Eigen::MatrixXd& residual_snapshots,
                                   const Decomposition& d, double discard);

/// Bottom-up variant: each subdomain has its own snapshot block with rows
/// ordered [interior_dofs; interface_dofs].
BasisSet build_basis_set_subdomain(const std::vector<Eigen::MatrixXd>& sub_snapshots,
                                   const Decomposition& d, BasisKind kind, double discard_state,
                                   double discard_boundary);

}  // namespace ddrom
