#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cstdint>
#include <vector>

#include "ddrom/fom.hpp"

namespace ddrom {

/// A port: a set of state DOFs shared by a fixed group of subdomains.
/// `dofs` is the canonical (ascending global) ordering used by every member.
struct Port {
  int id = 0;
  std::vector<int> members;  // subdomain indices, ascending
  std::vector<int> dofs;     // global free-DOF ids, ascending
  int size() const { return static_cast<int>(dofs.size()); }
  int num_pair_conditions() const { return static_cast<int>(members.size()) - 1; }
};

struct Subdomain {
  std::vector<int> residual_rows;   // realizes P_r^i
  std::vector<int> interior_dofs;   // realizes P_Omega^i
  std::vector<int> interface_dofs;  // realizes P_Gamma^i; ports concatenated in `ports` order
  std::vector<int> ports;           // port ids touching this subdomain, ascending

  int num_rows() const { return static_cast<int>(residual_rows.size()); }
  int num_interior() const { return static_cast<int>(interior_dofs.size()); }
  int num_interface() const { return static_cast<int>(interface_dofs.size()); }
};

/// Algebraically non-overlapping decomposition of a FOM into grid subdomains.
/// Residual rows partition {0..n-1}; interior DOF sets are pairwise disjoint;
/// interface DOFs are grouped into ports shared across subdomains.
struct Decomposition {
  int n = 0;
  int dofs_per_node = 1;
  int split_x = 1, split_y = 1;
  std::vector<Subdomain> subs;
  std::vector<Port> ports;

  int num_subdomains() const { return static_cast<int>(subs.size()); }

  /// Local positions of port `port_id`'s DOFs inside subs[sub].interface_dofs
  /// (realizes the port sampling operator for that member).
  std::vector<int> port_local_indices(int port_id, int sub) const;

  /// Total strong pairwise-condition count sum_j (|S_j|-1) * n_j.
  int num_strong_constraints() const;
};

/// Derive the decomposition from residual-row ownership on a (px x py) grid
/// split of the free nodes and the structural sparsity of the sampled
/// Jacobians. Subdomains are ordered x-major: sub = ix*py + iy.
Decomposition build_decomposition(const FomProblem& problem, int px, int py);

enum class ConstraintMode { Strong, Weak };

/// Per-subdomain constraint matrices A_i (n_A x n_Gamma_i) expressing port
/// compatibility, either DOF-wise (strong) or against random test functions
/// (weak).
struct ConstraintSet {
  ConstraintMode mode = ConstraintMode::Strong;
  int num_rows = 0;  // n_A
  std::vector<Eigen::SparseMatrix<double>> A;  // one block per subdomain
  std::vector<Eigen::MatrixXd> test_functions;  // G_j per port (weak only)
  std::vector<int> n_c;                         // constraints per port
  std::uint64_t seed = 0;
};

/// Stacked pairwise port-equality rows; the lowest-indexed member of each
/// port is the anchor and rows read (anchor - other).
ConstraintSet build_strong_constraints(const Decomposition& d);

/// Weak constraints: per-port test functions G_j drawn i.i.d. standard normal
/// with the given seed, redrawn (up to 10 times) until full rank.
ConstraintSet build_weak_constraints(const Decomposition& d, const std::vector<int>& n_c_per_port,
                                     std::uint64_t seed);
ConstraintSet build_weak_constraints(const Decomposition& d, int n_c, std::uint64_t seed);

struct BasisSet;  // bases.hpp

/// Effective ROM degrees of freedom: sum_i nhat_i - rank([A_1 Phi_1 ... ]).
int effective_dofs(const BasisSet& bases, const ConstraintSet& c);

/// Stacked reduced constraint matrix [A_1 Phi^G_1 ... A_nd Phi^G_nd].
Eigen::MatrixXd reduced_constraint_matrix(const ConstraintSet& c, const BasisSet& bases);

}  // namespace ddrom
