#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "ddrom/errors.hpp"
#include "ddrom/training.hpp"

namespace ddrom {

Eigen::MatrixXd SnapshotStore::residual_flat() const {
  int total = 0;
  for (int k : iters_per_param) total += k;
  if (total == 0) return Eigen::MatrixXd();
  Eigen::MatrixXd out(residual_iters[0].rows(), total);
  int at = 0;
  for (size_t p = 0; p < iters_per_param.size(); ++p) {
    for (int k = 0; k < iters_per_param[p]; ++k) {
      // Column of parameter p within the iteration-k block.
      int col = 0;
      for (size_t q = 0; q < p; ++q) {
        if (iters_per_param[q] > k) ++col;
      }
      out.col(at++) = residual_iters[k].col(col);
    }
  }
  return out;
}

SnapshotStore run_top_down(const FomProblem& problem, const TrainingPlan& plan) {
  const ParamDomain& dom = problem.param_domain();
  SnapshotStore store;
  store.mode = TrainingMode::TopDown;

  std::vector<Param> grid;
  for (int i = 0; i < plan.grid_n1; ++i) {
    for (int j = 0; j < plan.grid_n2; ++j) {
      const double t1 = plan.grid_n1 == 1 ? 0.5 : double(i) / (plan.grid_n1 - 1);
      const double t2 = plan.grid_n2 == 1 ? 0.5 : double(j) / (plan.grid_n2 - 1);
      grid.push_back({dom.lo[0] + t1 * (dom.hi[0] - dom.lo[0]),
                      dom.lo[1] + t2 * (dom.hi[1] - dom.lo[1])});
    }
  }

  NewtonOptions nopts = plan.newton;
  nopts.keep_residual_iterates = true;

  std::vector<Eigen::VectorXd> states;
  std::vector<std::vector<Eigen::VectorXd>> residuals;
  for (size_t g = 0; g < grid.size(); ++g) {
    try {
      FomSolution sol = newton_solve(problem, grid[g], Eigen::VectorXd(), nopts);
      states.push_back(sol.x);
      residuals.push_back(std::move(sol.residual_iterates));
      store.params.push_back(grid[g]);
      store.iters_per_param.push_back(static_cast<int>(residuals.back().size()));
    } catch (const NonConvergence&) {
      store.skipped.push_back(static_cast<int>(g));
    }
  }
  if (states.empty()) throw NonConvergence("no training point converged", {});

  store.states.resize(problem.size(), states.size());
  for (size_t c = 0; c < states.size(); ++c) store.states.col(c) = states[c];

  int max_iters = 0;
  for (int k : store.iters_per_param) max_iters = std::max(max_iters, k);
  for (int k = 0; k < max_iters; ++k) {
    int count = 0;
    for (int it : store.iters_per_param) {
      if (it > k) ++count;
    }
    Eigen::MatrixXd block(problem.size(), count);
    int at = 0;
    for (size_t p = 0; p < residuals.size(); ++p) {
      if (store.iters_per_param[p] > k) block.col(at++) = residuals[p][k];
    }
    store.residual_iters.push_back(std::move(block));
  }
  return store;
}

namespace {

double legendre_value(int degree, double t) {
  // Bonnet recurrence.
  if (degree == 0) return 1.0;
  if (degree == 1) return t;
  double pm = 1.0, pc = t;
  for (int k = 2; k <= degree; ++k) {
    const double pn = ((2.0 * k - 1.0) * t * pc - (k - 1.0) * pm) / k;
    pm = pc;
    pc = pn;
  }
  return pc;
}

}  // namespace

Eigen::MatrixXd legendre_port_functions(const Port& port, const FomProblem& problem) {
  const StructuredMesh& mesh = problem.mesh();
  const int gamma = mesh.dofs_per_node;

  // Distinct node coordinates along both axes.
  std::vector<int> nodes;
  for (size_t k = 0; k < port.dofs.size(); k += gamma) nodes.push_back(port.dofs[k] / gamma);
  std::set<int> gis, gjs;
  for (int nd : nodes) {
    gis.insert(mesh.free_node_gi(nd));
    gjs.insert(mesh.free_node_gj(nd));
  }
  const std::vector<int> xs(gis.begin(), gis.end());
  const std::vector<int> ys(gjs.begin(), gjs.end());
  if (nodes.size() != xs.size() * ys.size()) {
    throw UnsupportedPortGeometry("port nodes do not form a coordinate-aligned rectangle");
  }

  auto mapped = [](const std::vector<int>& axis, int v) {
    if (axis.size() == 1) return 0.0;
    const double lo = axis.front(), hi = axis.back();
    return -1.0 + 2.0 * (v - lo) / (hi - lo);
  };

  // Tensor functions ordered by total degree, then lexicographic in (a, b).
  std::vector<std::pair<int, int>> order;
  for (int a = 0; a < static_cast<int>(xs.size()); ++a) {
    for (int b = 0; b < static_cast<int>(ys.size()); ++b) order.emplace_back(a, b);
  }
  std::sort(order.begin(), order.end(), [](const auto& u, const auto& v) {
    const int du = u.first + u.second, dv = v.first + v.second;
    if (du != dv) return du < dv;
    return u < v;
  });
  const int num_funcs = static_cast<int>(std::min(order.size(), nodes.size()));

  Eigen::MatrixXd L(nodes.size(), num_funcs);
  for (size_t r = 0; r < nodes.size(); ++r) {
    const double tx = mapped(xs, mesh.free_node_gi(nodes[r]));
    const double ty = mapped(ys, mesh.free_node_gj(nodes[r]));
    for (int f = 0; f < num_funcs; ++f) {
      L(r, f) = legendre_value(order[f].first, tx) * legendre_value(order[f].second, ty);
    }
  }
  return L;
}

Eigen::VectorXd solve_subdomain_restricted(const FomProblem& problem, const Decomposition& d,
                                           int sub, const Eigen::VectorXd& interface_values,
                                           const Param& mu, const NewtonOptions& opts) {
  const Subdomain& s = d.subs[sub];
  if (interface_values.size() != s.num_interface()) {
    throw ConfigError("interface value vector does not match the subdomain interface");
  }

  // Global scratch state: interface DOFs frozen at the imposed data, interior
  // unknowns updated by Newton. Rows and unknown columns coincide with the
  // subdomain's interior DOFs, a square system.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(problem.size());
  for (int k = 0; k < s.num_interface(); ++k) x[s.interface_dofs[k]] = interface_values[k];

  const std::vector<int>& rows = s.interior_dofs;
  const int m = static_cast<int>(rows.size());
  std::vector<int> local_of(problem.size(), -1);
  for (int k = 0; k < m; ++k) local_of[rows[k]] = k;

  Eigen::VectorXd r(m);
  JacobianRows jr;
  auto eval_residual = [&]() { problem.residual_rows(rows, x, mu, r); };

  eval_residual();
  const double r0 = std::max(1.0, r.norm());
  std::vector<double> history{r.norm()};

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  for (int it = 0; it < opts.max_iters; ++it) {
    if (r.norm() <= opts.tol * r0) {
      Eigen::VectorXd out(m);
      for (int k = 0; k < m; ++k) out[k] = x[rows[k]];
      return out;
    }
    problem.jacobian_rows(rows, x, mu, jr);
    std::vector<Eigen::Triplet<double>> trips;
    for (int rr = 0; rr < m; ++rr) {
      for (int k = jr.offsets[rr]; k < jr.offsets[rr + 1]; ++k) {
        const int lc = local_of[jr.cols[k]];
        if (lc >= 0) trips.emplace_back(rr, lc, jr.vals[k]);
      }
    }
    Eigen::SparseMatrix<double> J(m, m);
    J.setFromTriplets(trips.begin(), trips.end());
    lu.compute(J);
    if (lu.info() != Eigen::Success) {
      throw SingularJacobian("restricted subdomain Jacobian factorization failed");
    }
    const Eigen::VectorXd dx = lu.solve(-r);

    const double rn = r.norm();
    double alpha = 1.0;
    Eigen::VectorXd x_keep = x;
    while (true) {
      for (int k = 0; k < m; ++k) x[rows[k]] = x_keep[rows[k]] + alpha * dx[k];
      eval_residual();
      if (r.norm() < rn || alpha <= opts.min_step) break;
      alpha *= 0.5;
    }
    history.push_back(r.norm());
  }
  if (r.norm() <= opts.tol * r0) {
    Eigen::VectorXd out(m);
    for (int k = 0; k < m; ++k) out[k] = x[rows[k]];
    return out;
  }
  throw NonConvergence("restricted subdomain solve did not converge", history);
}

SnapshotStore run_bottom_up(const FomProblem& problem, const Decomposition& d,
                            const TrainingPlan& plan) {
  const int nd = d.num_subdomains();
  const int gamma = d.dofs_per_node;
  if (static_cast<int>(plan.mu_train.size()) != nd) {
    throw ConfigError("bottom-up training needs one training parameter per subdomain");
  }
  if (plan.eta <= 0.0) throw ConfigError("eta must be positive");

  SnapshotStore store;
  store.mode = TrainingMode::BottomUp;
  store.subdomain_states.resize(nd);

  // Port function tables, shared across members.
  std::vector<Eigen::MatrixXd> port_funcs;
  port_funcs.reserve(d.ports.size());
  for (const Port& p : d.ports) port_funcs.push_back(legendre_port_functions(p, problem));

  std::mt19937_64 rng(plan.seed);
  auto uniform = [&rng]() { return 2.0 * (((rng() >> 11) + 0.5) * 0x1p-53) - 1.0; };

  for (int i = 0; i < nd; ++i) {
    const Subdomain& s = d.subs[i];
    std::vector<Eigen::VectorXd> kept;
    for (int sample = 0; sample < plan.samples_per_subdomain; ++sample) {
      // Interface data assembled port by port (ports partition the interface).
      Eigen::VectorXd bc = Eigen::VectorXd::Zero(s.num_interface());
      int offset = 0;
      for (int pid : s.ports) {
        const Eigen::MatrixXd& L = port_funcs[pid];
        const int num_nodes = static_cast<int>(L.rows());
        Eigen::MatrixXd values = Eigen::MatrixXd::Zero(num_nodes, gamma);
        for (int k = 1; k <= static_cast<int>(L.cols()); ++k) {
          const double decay = std::pow(double(k), -plan.eta);
          for (int c = 0; c < gamma; ++c) {
            values.col(c) += (uniform() * decay) * L.col(k - 1);
          }
        }
        for (int nn = 0; nn < num_nodes; ++nn) {
          for (int c = 0; c < gamma; ++c) bc[offset + nn * gamma + c] = values(nn, c);
        }
        offset += num_nodes * gamma;
      }

      try {
        const Eigen::VectorXd interior =
            solve_subdomain_restricted(problem, d, i, bc, plan.mu_train[i], plan.newton);
        Eigen::VectorXd snap(s.num_interior() + s.num_interface());
        snap.head(s.num_interior()) = interior;
        snap.tail(s.num_interface()) = bc;
        kept.push_back(std::move(snap));
      } catch (const NonConvergence&) {
        store.skipped.push_back(i * plan.samples_per_subdomain + sample);
      }
    }
    Eigen::MatrixXd block(s.num_interior() + s.num_interface(), kept.size());
    for (size_t c = 0; c < kept.size(); ++c) block.col(c) = kept[c];
    store.subdomain_states[i] = std::move(block);
  }
  return store;
}

}  // namespace ddrom
