#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ddrom/bases.hpp"
#include "ddrom/decomp.hpp"

namespace ddrom {

enum class HyperScheme { Identity, Collocation, GappyPod };

const char* to_string(HyperScheme s);
HyperScheme hyper_scheme_from_string(const std::string& s);

/// Offline hyper-reduction data for one decomposition: sample sets, the
/// weighting realization, and the induced state-sampling operators.
///
/// Index conventions are subdomain-local: sample_nodes are node positions in
/// the subdomain's owned-node list, sample_rows index residual_rows,
/// sample_interior indexes interior_dofs, sample_boundary indexes
/// interface_dofs. For the Identity scheme every sampler is the full range.
struct HyperData {
  HyperScheme scheme = HyperScheme::Identity;

  std::vector<std::vector<int>> sample_nodes;
  std::vector<std::vector<int>> sample_rows;
  std::vector<std::vector<int>> sample_interior;
  std::vector<std::vector<int>> sample_boundary;

  // Gappy POD factors: thin QR of Z Phi_r per subdomain, stored so the
  // pseudoinverse is applied as R^{-1} Q^T without ever forming it densely.
  std::vector<Eigen::MatrixXd> gappy_qt;  // nhat_r x n_srows
  std::vector<Eigen::MatrixXd> gappy_r;   // nhat_r x nhat_r upper triangular

  int num_subdomains() const { return static_cast<int>(sample_rows.size()); }
  int n_sample_rows(int i) const { return static_cast<int>(sample_rows[i].size()); }
  /// Rows of the weighting matrix B_i.
  int n_weight_rows(int i) const {
    if (scheme == HyperScheme::GappyPod) return static_cast<int>(gappy_r[i].rows());
    return n_sample_rows(i);
  }
  bool dense_weighting() const { return scheme == HyperScheme::GappyPod; }

  /// Apply B_i to a sampled residual block (rows = sampled residual rows).
  Eigen::MatrixXd apply_weighting(int i, const Eigen::MatrixXd& sampled) const;
};

/// Greedy spatial sample selection for one subdomain. Seeds with the given
/// corner nodes, then adds the argmax-average-error node per round, error
/// scored as the squared residual-basis reconstruction mismatch summed over
/// each node's DOFs. Ties break toward the lowest node index. Returns the
/// ascending node set of size n_s.
std::vector<int> greedy_sample_mesh(const Eigen::MatrixXd& residual_basis, int n_s,
                                    int n_working, const std::vector<int>& corner_nodes,
                                    int dofs_per_node);

/// Owned nodes of subdomain i that carry interface DOFs; these seed every
/// sample mesh so hyper-reduced subdomains stay coupled to their neighbors.
std::vector<int> corner_nodes(const Decomposition& d, int sub);

struct HyperOptions {
  double sample_ratio = 2.0;  // n_s / nhat_r
  int n_working = 0;          // 0: use min(nhat_r, gamma * n_s)
};

/// Assemble the weighting realization for the given scheme and sample sets.
HyperData build_weighting(HyperScheme scheme, const Decomposition& d,
                          const ResidualBasis& basis,
                          std::vector<std::vector<int>> sample_nodes);

/// Fill in the minimal induced samplers Z^r, Z^Omega, Z^Gamma from the
/// stencil adjacency of the sampled residual rows.
void induce_state_samplers(const Decomposition& d, const FomProblem& problem, HyperData& h);

/// Full offline pipeline: sample budgets from the ratio (clamped up to the
/// corner seed and the residual-basis dimension), greedy selection, weighting
/// factors, induced samplers. Identity scheme skips selection entirely.
HyperData build_hyper_data(HyperScheme scheme, const Decomposition& d, const FomProblem& problem,
                           const ResidualBasis& basis, const HyperOptions& opts = {});

}  // namespace ddrom
