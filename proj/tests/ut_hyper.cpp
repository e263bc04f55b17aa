#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <random>
#include <set>

#include "ddrom/bases.hpp"
#include "ddrom/errors.hpp"
#include "ddrom/hyper.hpp"
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

// Literal re-implementation of the greedy selection used as an exhaustive
// oracle on small instances (1 DOF per node).
std::vector<int> greedy_oracle(const Eigen::MatrixXd& phi, int n_s,
                               const std::vector<int>& corners) {
  std::vector<int> sample = corners;
  std::sort(sample.begin(), sample.end());
  const int num_nodes = static_cast<int>(phi.rows());
  const int n_add = n_s - static_cast<int>(sample.size());
  if (n_add <= 0) return sample;
  const int n_w = std::min<int>(phi.cols(), n_s);
  const int n_it = std::min(n_w, n_add);
  const int max_rhs = (n_w + n_add - 1) / n_add;
  const int wb_min = n_w / n_it;
  const int add_min = n_add * max_rhs / n_w;
  int used = 0;
  for (int j = 1; j <= n_it; ++j) {
    int n_wb = wb_min + (j <= n_w % n_it ? 1 : 0);
    int n_ad = add_min + (max_rhs == 1 && j <= n_add % n_w ? 1 : 0);
    Eigen::MatrixXd R;
    if (j == 1) {
      R = phi.leftCols(n_wb);
    } else {
      Eigen::MatrixXd Z(sample.size(), used);
      Eigen::MatrixXd Znext(sample.size(), n_wb);
      for (size_t r = 0; r < sample.size(); ++r) {
        Z.row(r) = phi.row(sample[r]).head(used);
        Znext.row(r) = phi.row(sample[r]).segment(used, n_wb);
      }
      const Eigen::MatrixXd alpha =
          Z.colPivHouseholderQr().solve(Znext);
      R = phi.middleCols(used, n_wb) - phi.leftCols(used) * alpha;
    }
    for (int k = 0; k < n_ad; ++k) {
      int best = -1;
      double best_score = -1.0;
      for (int node = 0; node < num_nodes; ++node) {
        if (std::find(sample.begin(), sample.end(), node) != sample.end()) continue;
        const double score = R.row(node).squaredNorm();
        if (score > best_score) {
          best_score = score;
          best = node;
        }
      }
      sample.insert(std::upper_bound(sample.begin(), sample.end(), best), best);
    }
    used += n_wb;
  }
  return sample;
}

}  // namespace

TEST_CASE("budget equal to the corner seed returns exactly the corners") {
  const Eigen::MatrixXd phi = random_matrix(10, 3, 1);
  const std::vector<int> corners{2, 5, 7};
  CHECK(greedy_sample_mesh(phi, 3, 3, corners, 1) == corners);
}

TEST_CASE("budget below the corner seed is rejected") {
  const Eigen::MatrixXd phi = random_matrix(10, 3, 1);
  CHECK_THROWS_AS(greedy_sample_mesh(phi, 2, 2, {1, 4, 6}, 1), InsufficientBudget);
}

TEST_CASE("greedy matches brute-force argmax enumeration on 4-node instances") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Eigen::MatrixXd phi = random_matrix(4, 2, 100 + seed);
    const auto got = greedy_sample_mesh(phi, 3, 2, {}, 1);
    const auto want = greedy_oracle(phi, 3, {});
    CHECK(got == want);
    CHECK(got.size() == 3);
  }
}

TEST_CASE("greedy matches the oracle with corner seeding and larger budgets") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::MatrixXd phi = random_matrix(12, 4, 500 + seed);
    for (int n_s : {4, 6, 9}) {
      const std::vector<int> corners{0, 11};
      const auto got = greedy_sample_mesh(phi, n_s, std::min(4, n_s), corners, 1);
      const auto want = greedy_oracle(phi, n_s, corners);
      CHECK(got == want);
    }
  }
}

TEST_CASE("greedy selection is deterministic") {
  const Eigen::MatrixXd phi = random_matrix(20, 5, 9);
  const auto a = greedy_sample_mesh(phi, 8, 5, {0}, 1);
  const auto b = greedy_sample_mesh(phi, 8, 5, {0}, 1);
  CHECK(a == b);
}

TEST_CASE("gappy weighting against a dense pseudoinverse oracle") {
  const Eigen::MatrixXd phi = random_matrix(8, 3, 3);
  FomProblem p = small_heat(4, 4);  // 9 free DOFs, one subdomain of 9 rows
  Decomposition d = build_decomposition(p, 1, 1);
  REQUIRE(d.subs[0].num_rows() == 9);

  // Use an 8-row residual basis block padded to the 9-row subdomain.
  Eigen::MatrixXd phi9 = Eigen::MatrixXd::Zero(9, 3);
  phi9.topRows(8) = phi;
  ResidualBasis rb;
  rb.blocks.push_back(phi9);
  rb.snapshot_counts.push_back(3);

  const std::vector<int> nodes{0, 2, 5, 7};
  HyperData h = build_weighting(HyperScheme::GappyPod, d, rb, {nodes});

  Eigen::MatrixXd Zphi(4, 3);
  for (int k = 0; k < 4; ++k) Zphi.row(k) = phi9.row(nodes[k]);
  const Eigen::MatrixXd pinv =
      (Zphi.transpose() * Zphi).ldlt().solve(Zphi.transpose());

  const Eigen::VectorXd r = random_state(4, 77);
  const Eigen::VectorXd got = h.apply_weighting(0, r);
  CHECK((got - pinv * r).norm() / (pinv * r).norm() < 1e-10);
  CHECK(h.n_weight_rows(0) == 3);   // gappy: nhat_r
  CHECK(h.n_sample_rows(0) == 4);

  HyperData hc = build_weighting(HyperScheme::Collocation, d, rb, {nodes});
  CHECK(hc.n_weight_rows(0) == 4);  // collocation: n_s
  CHECK((hc.apply_weighting(0, r) - r).norm() == 0.0);
}

TEST_CASE("gappy with full sampling reduces to the orthonormal projection") {
  FomProblem p = small_heat(4, 4);
  Decomposition d = build_decomposition(p, 1, 1);
  const int n = d.subs[0].num_rows();
  ResidualBasis rb;
  rb.blocks.push_back(pod(random_matrix(n, 4, 8), 0.0).basis);
  rb.snapshot_counts.push_back(4);
  std::vector<int> all(n);
  for (int k = 0; k < n; ++k) all[k] = k;
  HyperData h = build_weighting(HyperScheme::GappyPod, d, rb, {all});
  const Eigen::VectorXd r = random_state(n, 5);
  // With orthonormal Phi_r and full sampling, B r = Phi_r^T r.
  CHECK((h.apply_weighting(0, r) - rb.blocks[0].transpose() * r).norm() < 1e-12);
}

TEST_CASE("gappy needs at least nhat_r sampled rows") {
  FomProblem p = small_heat(4, 4);
  Decomposition d = build_decomposition(p, 1, 1);
  ResidualBasis rb;
  rb.blocks.push_back(random_matrix(9, 4, 2));
  rb.snapshot_counts.push_back(4);
  CHECK_THROWS_AS(build_weighting(HyperScheme::GappyPod, d, rb, {{1, 3, 5}}),
                  ConsistencyViolation);
}

TEST_CASE("identity scheme samplers are the full index ranges") {
  FomProblem p = small_heat(6, 6);
  Decomposition d = build_decomposition(p, 2, 1);
  ResidualBasis rb;
  HyperData h = build_hyper_data(HyperScheme::Identity, d, p, rb);
  for (int i = 0; i < d.num_subdomains(); ++i) {
    CHECK(h.n_sample_rows(i) == d.subs[i].num_rows());
    CHECK(static_cast<int>(h.sample_interior[i].size()) == d.subs[i].num_interior());
    CHECK(static_cast<int>(h.sample_boundary[i].size()) == d.subs[i].num_interface());
  }
}

TEST_CASE("induced samplers select exactly the stencil of the sampled rows") {
  // ny=2 collapses the heat mesh to a single row of nodes: a 3-point stencil.
  FomProblem p = small_heat(12, 2);
  Decomposition d = build_decomposition(p, 2, 1);
  HyperData h;
  h.scheme = HyperScheme::Collocation;
  h.sample_rows.assign(2, {});
  h.sample_nodes.assign(2, {});
  h.sample_rows[0] = {2};  // one interior row in subdomain 0
  h.sample_nodes[0] = {2};
  h.sample_rows[1] = {1};
  h.sample_nodes[1] = {1};
  induce_state_samplers(d, p, h);

  // Subdomain 0 owns nodes 0..4 (global free nodes), interior {0..3}.
  const Subdomain& s = d.subs[0];
  std::set<int> expected{s.residual_rows[1], s.residual_rows[2], s.residual_rows[3]};
  std::set<int> got;
  for (int k : h.sample_interior[0]) got.insert(s.interior_dofs[k]);
  for (int k : h.sample_boundary[0]) got.insert(s.interface_dofs[k]);
  CHECK(got == expected);
}

TEST_CASE("sampled evaluation matches the weighted full residual") {
  FomProblem p = small_heat(10, 10);
  Decomposition d = build_decomposition(p, 2, 1);
  const Eigen::MatrixXd Xr = random_matrix(p.size(), 12, 44);
  ResidualBasis rb = build_residual_bases(Xr, d, 1e-10);
  HyperOptions opts;
  opts.sample_ratio = 1.5;
  HyperData h = build_hyper_data(HyperScheme::GappyPod, d, p, rb, opts);

  const Param mu{2.0, 3.0};
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd x = random_state(p.size(), 900 + trial, 0.3);
    for (int i = 0; i < d.num_subdomains(); ++i) {
      const Subdomain& s = d.subs[i];
      // Mask away every state entry outside the induced samplers.
      Eigen::VectorXd masked = Eigen::VectorXd::Zero(p.size());
      for (int k : h.sample_interior[i]) {
        masked[s.interior_dofs[k]] = x[s.interior_dofs[k]];
      }
      for (int k : h.sample_boundary[i]) {
        masked[s.interface_dofs[k]] = x[s.interface_dofs[k]];
      }
      std::vector<int> rows;
      for (int lr : h.sample_rows[i]) rows.push_back(s.residual_rows[lr]);
      Eigen::VectorXd r_masked, r_full_rows;
      p.residual_rows(rows, masked, mu, r_masked);
      p.residual_rows(rows, x, mu, r_full_rows);
      CHECK((h.apply_weighting(i, r_masked) - h.apply_weighting(i, r_full_rows))
                .lpNorm<Eigen::Infinity>() < 1e-12);
    }
  }
}

TEST_CASE("sample sets keep the corner seed and the consistency chain") {
  FomProblem p = small_heat(16, 16);
  Decomposition d = build_decomposition(p, 2, 2);
  const Eigen::MatrixXd Xr = random_matrix(p.size(), 10, 13);
  ResidualBasis rb = build_residual_bases(Xr, d, 1e-8);
  HyperOptions opts;
  opts.sample_ratio = 2.0;
  HyperData h = build_hyper_data(HyperScheme::GappyPod, d, p, rb, opts);

  for (int i = 0; i < d.num_subdomains(); ++i) {
    const auto corners = corner_nodes(d, i);
    std::set<int> chosen(h.sample_nodes[i].begin(), h.sample_nodes[i].end());
    for (int c : corners) CHECK(chosen.count(c) == 1);
    CHECK(!h.sample_boundary[i].empty());
    CHECK(h.n_sample_rows(i) >= rb.nhat(i));
    CHECK(static_cast<int>(h.sample_nodes[i].size()) >=
          std::max<int>(static_cast<int>(corners.size()), 2 * rb.nhat(i)));
  }
}
