#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "ddrom/errors.hpp"
#include "ddrom/hyper.hpp"

namespace ddrom {

const char* to_string(HyperScheme s) {
  switch (s) {
    case HyperScheme::Identity: return "identity";
    case HyperScheme::Collocation: return "collocation";
    case HyperScheme::GappyPod: return "gappy";
  }
  return "?";
}

HyperScheme hyper_scheme_from_string(const std::string& s) {
  if (s == "identity") return HyperScheme::Identity;
  if (s == "collocation") return HyperScheme::Collocation;
  if (s == "gappy" || s == "gappy-pod") return HyperScheme::GappyPod;
  throw ConfigError("unknown hyper-reduction scheme: " + s);
}

Eigen::MatrixXd HyperData::apply_weighting(int i, const Eigen::MatrixXd& sampled) const {
  if (scheme != HyperScheme::GappyPod) return sampled;
  // B s = (Z Phi_r)^+ s = R^{-1} (Q^T s)
  return gappy_r[i].triangularView<Eigen::Upper>().solve(gappy_qt[i] * sampled);
}

std::vector<int> greedy_sample_mesh(const Eigen::MatrixXd& residual_basis, int n_s,
                                    int n_working, const std::vector<int>& corner_nodes_in,
                                    int dofs_per_node) {
  const int gamma = dofs_per_node;
  const int num_nodes = static_cast<int>(residual_basis.rows()) / gamma;
  const int nhat_r = static_cast<int>(residual_basis.cols());
  if (n_s < static_cast<int>(corner_nodes_in.size())) {
    throw InsufficientBudget("sample budget below the corner-node seed count");
  }
  if (n_s > num_nodes) throw ConfigError("sample budget exceeds node count");
  if (n_working > std::min(nhat_r, gamma * n_s)) {
    throw ConfigError("working-column count exceeds min(nhat_r, gamma*n_s)");
  }

  std::vector<char> selected(num_nodes, 0);
  std::vector<int> sample = corner_nodes_in;
  std::sort(sample.begin(), sample.end());
  sample.erase(std::unique(sample.begin(), sample.end()), sample.end());
  for (int nd : sample) selected[nd] = 1;

  const int n_additional = n_s - static_cast<int>(sample.size());
  if (n_additional == 0 || n_working == 0) return sample;

  auto sampled_rows = [&]() {
    std::vector<int> rows;
    rows.reserve(sample.size() * gamma);
    for (int nd : sample) {
      for (int c = 0; c < gamma; ++c) rows.push_back(nd * gamma + c);
    }
    return rows;
  };

  const int n_iter = std::min(n_working, n_additional);
  const int max_rhs = (n_working + n_additional - 1) / n_additional;  // ceil
  const int min_wb_per_iter = n_working / n_iter;
  const int min_add_per_iter = (n_additional * max_rhs) / n_working;

  int used_wb = 0;
  int added_total = 0;
  for (int j = 1; j <= n_iter; ++j) {
    int n_wb = min_wb_per_iter;
    if (j <= n_working % n_iter) ++n_wb;
    int n_add = min_add_per_iter;
    if (max_rhs == 1 && j <= n_additional % n_working) ++n_add;

    // Reconstruction errors of the next working basis vectors over the rows
    // sampled so far.
    Eigen::MatrixXd R(residual_basis.rows(), n_wb);
    if (j == 1) {
      R = residual_basis.leftCols(n_wb);
    } else {
      const auto rows = sampled_rows();
      Eigen::MatrixXd Zprev(rows.size(), used_wb);
      Eigen::MatrixXd Znext(rows.size(), n_wb);
      for (size_t r = 0; r < rows.size(); ++r) {
        Zprev.row(r) = residual_basis.row(rows[r]).head(used_wb);
        Znext.row(r) = residual_basis.row(rows[r]).segment(used_wb, n_wb);
      }
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Zprev);
      qr.setThreshold(1e-12);
      if (qr.rank() < used_wb) {
        throw SampleRankFailure("sampled least-squares system is rank deficient");
      }
      const Eigen::MatrixXd alpha = qr.solve(Znext);
      R = residual_basis.middleCols(used_wb, n_wb) - residual_basis.leftCols(used_wb) * alpha;
    }

    for (int k = 0; k < n_add && added_total < n_additional; ++k) {
      int best = -1;
      double best_score = -1.0;
      for (int nd = 0; nd < num_nodes; ++nd) {
        if (selected[nd]) continue;
        double score = 0.0;
        for (int q = 0; q < n_wb; ++q) {
          for (int c = 0; c < gamma; ++c) score += R(nd * gamma + c, q) * R(nd * gamma + c, q);
        }
        if (score > best_score) {
          best_score = score;
          best = nd;
        }
      }
      if (best < 0) break;
      selected[best] = 1;
      sample.insert(std::upper_bound(sample.begin(), sample.end(), best), best);
      ++added_total;
    }
    used_wb += n_wb;
  }
  return sample;
}

std::vector<int> corner_nodes(const Decomposition& d, int sub) {
  const Subdomain& s = d.subs[sub];
  const int gamma = d.dofs_per_node;
  std::unordered_set<int> interface_nodes;
  for (int dof : s.interface_dofs) interface_nodes.insert(dof / gamma);

  std::vector<int> corners;
  for (int local = 0; local < s.num_rows() / gamma; ++local) {
    const int global_node = s.residual_rows[local * gamma] / gamma;
    if (interface_nodes.count(global_node)) corners.push_back(local);
  }
  return corners;
}

HyperData build_weighting(HyperScheme scheme, const Decomposition& d, const ResidualBasis& basis,
                          std::vector<std::vector<int>> sample_nodes) {
  const int nd = d.num_subdomains();
  const int gamma = d.dofs_per_node;
  HyperData h;
  h.scheme = scheme;
  h.sample_rows.resize(nd);
  h.sample_nodes.resize(nd);

  if (scheme == HyperScheme::Identity) {
    for (int i = 0; i < nd; ++i) {
      const int nodes = d.subs[i].num_rows() / gamma;
      h.sample_nodes[i].resize(nodes);
      std::iota(h.sample_nodes[i].begin(), h.sample_nodes[i].end(), 0);
      h.sample_rows[i].resize(d.subs[i].num_rows());
      std::iota(h.sample_rows[i].begin(), h.sample_rows[i].end(), 0);
    }
    return h;
  }

  h.sample_nodes = std::move(sample_nodes);
  for (int i = 0; i < nd; ++i) {
    auto& rows = h.sample_rows[i];
    rows.reserve(h.sample_nodes[i].size() * gamma);
    for (int nd_local : h.sample_nodes[i]) {
      for (int c = 0; c < gamma; ++c) rows.push_back(nd_local * gamma + c);
    }
  }

  if (scheme == HyperScheme::GappyPod) {
    h.gappy_qt.resize(nd);
    h.gappy_r.resize(nd);
    for (int i = 0; i < nd; ++i) {
      const auto& rows = h.sample_rows[i];
      const Eigen::MatrixXd& phi = basis.blocks[i];
      const int nhat_r = static_cast<int>(phi.cols());
      if (static_cast<int>(rows.size()) < nhat_r) {
        throw ConsistencyViolation("gappy POD needs at least nhat_r sampled rows");
      }
      Eigen::MatrixXd Zphi(rows.size(), nhat_r);
      for (size_t r = 0; r < rows.size(); ++r) Zphi.row(r) = phi.row(rows[r]);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(Zphi);
      Eigen::MatrixXd R =
          qr.matrixQR().topRows(nhat_r).triangularView<Eigen::Upper>();
      for (int k = 0; k < nhat_r; ++k) {
        if (std::abs(R(k, k)) <= 1e-12 * std::abs(R(0, 0))) {
          throw GappyRankDeficient("sampled residual basis Z Phi_r is rank deficient");
        }
      }
      Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(rows.size(), nhat_r);
      h.gappy_qt[i] = Q.transpose();
      h.gappy_r[i] = std::move(R);
    }
  }
  return h;
}

void induce_state_samplers(const Decomposition& d, const FomProblem& problem, HyperData& h) {
  const int nd = d.num_subdomains();
  h.sample_interior.assign(nd, {});
  h.sample_boundary.assign(nd, {});
  for (int i = 0; i < nd; ++i) {
    const Subdomain& s = d.subs[i];
    if (h.scheme == HyperScheme::Identity) {
      h.sample_interior[i].resize(s.num_interior());
      std::iota(h.sample_interior[i].begin(), h.sample_interior[i].end(), 0);
      h.sample_boundary[i].resize(s.num_interface());
      std::iota(h.sample_boundary[i].begin(), h.sample_boundary[i].end(), 0);
      continue;
    }
    std::unordered_set<int> touched;
    for (int local_row : h.sample_rows[i]) {
      for (int col : problem.stencil(s.residual_rows[local_row])) touched.insert(col);
    }
    for (int k = 0; k < s.num_interior(); ++k) {
      if (touched.count(s.interior_dofs[k])) h.sample_interior[i].push_back(k);
    }
    for (int k = 0; k < s.num_interface(); ++k) {
      if (touched.count(s.interface_dofs[k])) h.sample_boundary[i].push_back(k);
    }
  }
}

HyperData build_hyper_data(HyperScheme scheme, const Decomposition& d, const FomProblem& problem,
                           const ResidualBasis& basis, const HyperOptions& opts) {
  const int nd = d.num_subdomains();
  const int gamma = d.dofs_per_node;
  std::vector<std::vector<int>> samples(nd);
  if (scheme != HyperScheme::Identity) {
    for (int i = 0; i < nd; ++i) {
      const auto corners = corner_nodes(d, i);
      const int nhat_r = basis.nhat(i);
      const int num_nodes = d.subs[i].num_rows() / gamma;
      // Node budget follows the n_s / nhat_r ratio knob, clamped so the
      // corner seed always fits.
      int n_s = static_cast<int>(std::ceil(opts.sample_ratio * nhat_r));
      n_s = std::max(n_s, static_cast<int>(corners.size()));
      n_s = std::min(n_s, num_nodes);
      const int n_w =
          opts.n_working > 0 ? opts.n_working : std::min(nhat_r, gamma * n_s);
      samples[i] = greedy_sample_mesh(basis.blocks[i], n_s, n_w, corners, gamma);
    }
  }
  HyperData h = build_weighting(scheme, d, basis, std::move(samples));
  induce_state_samplers(d, problem, h);
  return h;
}

}  // namespace ddrom
