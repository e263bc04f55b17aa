#include <algorithm>
#include <map>
#include <random>

#include <Eigen/SVD>

#include "ddrom/bases.hpp"
#include "ddrom/decomp.hpp"
#include "ddrom/errors.hpp"

namespace ddrom {

namespace {

// Chunk [0, total) into `parts` contiguous ranges; remainder goes to the
// trailing chunks so the first subdomain is never the largest.
std::vector<std::pair<int, int>> chunk(int total, int parts) {
  std::vector<std::pair<int, int>> out;
  const int base = total / parts, rem = total % parts;
  int pos = 0;
  for (int p = 0; p < parts; ++p) {
    const int len = base + (p >= parts - rem ? 1 : 0);
    out.emplace_back(pos, pos + len);
    pos += len;
  }
  return out;
}

}  // namespace

std::vector<int> Decomposition::port_local_indices(int port_id, int sub) const {
  const Subdomain& s = subs[sub];
  int offset = 0;
  for (int pid : s.ports) {
    if (pid == port_id) {
      std::vector<int> idx(ports[pid].size());
      for (int k = 0; k < ports[pid].size(); ++k) idx[k] = offset + k;
      return idx;
    }
    offset += ports[pid].size();
  }
  throw Error("port is not attached to this subdomain");
}

int Decomposition::num_strong_constraints() const {
  int total = 0;
  for (const Port& p : ports) total += p.num_pair_conditions() * p.size();
  return total;
}

Decomposition build_decomposition(const FomProblem& problem, int px, int py) {
  const StructuredMesh& mesh = problem.mesh();
  const int gx = mesh.free_nx(), gy = mesh.free_ny();
  const int gamma = mesh.dofs_per_node;
  if (px < 1 || py < 1 || px > gx || py > gy) {
    throw DegenerateSplit("grid split produces an empty subdomain");
  }

  Decomposition d;
  d.n = problem.size();
  d.dofs_per_node = gamma;
  d.split_x = px;
  d.split_y = py;
  const int nd = px * py;
  d.subs.resize(nd);

  const auto xr = chunk(gx, px), yr = chunk(gy, py);

  // Residual-row ownership by node position; subdomains ordered x-major.
  std::vector<int> owner(problem.size(), -1);
  for (int ix = 0; ix < px; ++ix) {
    for (int iy = 0; iy < py; ++iy) {
      const int s = ix * py + iy;
      auto& rows = d.subs[s].residual_rows;
      for (int j = yr[iy].first; j < yr[iy].second; ++j) {
        for (int i = xr[ix].first; i < xr[ix].second; ++i) {
          const int node = j * gx + i;
          for (int c = 0; c < gamma; ++c) {
            rows.push_back(node * gamma + c);
            owner[node * gamma + c] = s;
          }
        }
      }
      std::sort(rows.begin(), rows.end());
    }
  }

  // Columns touched per subdomain, from the structural sparsity of the
  // sampled Jacobians.
  std::vector<std::vector<int>> touching(problem.size());
  for (int s = 0; s < nd; ++s) {
    for (int row : d.subs[s].residual_rows) {
      for (int col : problem.stencil(row)) {
        auto& t = touching[col];
        if (t.empty() || t.back() != s) t.push_back(s);
      }
    }
  }
  // `touching` lists are sorted because subdomains were processed in order.

  // Interior DOFs: touched by exactly one subdomain. Shared DOFs group into
  // ports keyed by their membership signature, node-resolved.
  std::map<std::vector<int>, std::vector<int>> port_groups;
  for (int dof = 0; dof < problem.size(); ++dof) {
    const auto& t = touching[dof];
    if (t.empty()) throw Error("free DOF untouched by any residual row");
    if (t.size() == 1) {
      d.subs[t[0]].interior_dofs.push_back(dof);
    } else {
      port_groups[t].push_back(dof);
    }
  }

  // Deterministic port ordering: by smallest member DOF.
  std::vector<Port> ports;
  for (auto& [members, dofs] : port_groups) {
    Port p;
    p.members = members;
    p.dofs = dofs;  // ascending by construction
    ports.push_back(std::move(p));
  }
  std::sort(ports.begin(), ports.end(),
            [](const Port& a, const Port& b) { return a.dofs.front() < b.dofs.front(); });
  for (int j = 0; j < static_cast<int>(ports.size()); ++j) {
    ports[j].id = j;
    for (int s : ports[j].members) d.subs[s].ports.push_back(j);
  }
  d.ports = std::move(ports);

  for (Subdomain& s : d.subs) {
    std::sort(s.ports.begin(), s.ports.end());
    for (int pid : s.ports) {
      const auto& pd = d.ports[pid].dofs;
      s.interface_dofs.insert(s.interface_dofs.end(), pd.begin(), pd.end());
    }
    if (s.residual_rows.empty()) throw DegenerateSplit("empty subdomain after split");
  }
  return d;
}

namespace {

// Assemble constraint blocks with per-port row matrices T_j (identity for
// strong constraints, test functions for weak). Rows are laid out port-major,
// then chain position (anchor minus each non-anchor member).
std::vector<Eigen::SparseMatrix<double>> assemble_constraints(
    const Decomposition& d, const std::vector<Eigen::MatrixXd>& port_T, int total_rows) {
  const int nd = d.num_subdomains();
  std::vector<std::vector<Eigen::Triplet<double>>> trips(nd);

  int row0 = 0;
  for (const Port& port : d.ports) {
    const Eigen::MatrixXd& T = port_T[port.id];
    const int nc = static_cast<int>(T.rows());
    const int anchor = port.members.front();
    const auto anchor_idx = d.port_local_indices(port.id, anchor);
    for (size_t mth = 1; mth < port.members.size(); ++mth) {
      const int other = port.members[mth];
      const auto other_idx = d.port_local_indices(port.id, other);
      for (int r = 0; r < nc; ++r) {
        for (int c = 0; c < port.size(); ++c) {
          const double v = T(r, c);
          if (v == 0.0) continue;
          trips[anchor].emplace_back(row0 + r, anchor_idx[c], v);
          trips[other].emplace_back(row0 + r, other_idx[c], -v);
        }
      }
      row0 += nc;
    }
  }
  if (row0 != total_rows) throw Error("constraint row layout mismatch");

  std::vector<Eigen::SparseMatrix<double>> A(nd);
  for (int i = 0; i < nd; ++i) {
    A[i].resize(total_rows, d.subs[i].num_interface());
    A[i].setFromTriplets(trips[i].begin(), trips[i].end());
  }
  return A;
}

}  // namespace

ConstraintSet build_strong_constraints(const Decomposition& d) {
  ConstraintSet c;
  c.mode = ConstraintMode::Strong;
  c.num_rows = d.num_strong_constraints();
  std::vector<Eigen::MatrixXd> T;
  T.reserve(d.ports.size());
  for (const Port& p : d.ports) {
    T.push_back(Eigen::MatrixXd::Identity(p.size(), p.size()));
    c.n_c.push_back(p.size());
  }
  c.A = assemble_constraints(d, T, c.num_rows);
  return c;
}

ConstraintSet build_weak_constraints(const Decomposition& d, const std::vector<int>& n_c_per_port,
                                     std::uint64_t seed) {
  if (n_c_per_port.size() != d.ports.size()) {
    throw ConfigError("weak constraint counts must match the number of ports");
  }
  ConstraintSet c;
  c.mode = ConstraintMode::Weak;
  c.seed = seed;
  c.n_c = n_c_per_port;

  std::mt19937_64 rng(seed);
  auto normal = [&rng]() {
    // Box-Muller on explicit uniform bits keeps draws identical across
    // standard library implementations.
    const double u1 = ((rng() >> 11) + 0.5) * 0x1p-53;
    const double u2 = ((rng() >> 11) + 0.5) * 0x1p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  };

  int total = 0;
  std::vector<Eigen::MatrixXd> T;
  for (const Port& p : d.ports) {
    const int nc = n_c_per_port[p.id];
    if (nc < 1 || nc > p.size()) {
      throw ConfigError("per-port constraint count must lie in [1, port size]");
    }
    Eigen::MatrixXd G(nc, p.size());
    bool ok = false;
    for (int attempt = 0; attempt < 10 && !ok; ++attempt) {
      for (int r = 0; r < G.rows(); ++r)
        for (int col = 0; col < G.cols(); ++col) G(r, col) = normal();
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(G);
      const auto& sv = svd.singularValues();
      ok = sv.size() > 0 && sv(sv.size() - 1) > 1e-12 * sv(0);
    }
    if (!ok) throw TestFunctionRankFailure("test functions rank deficient after 10 draws");
    c.test_functions.push_back(G);
    T.push_back(G);
    total += nc * p.num_pair_conditions();
  }
  c.num_rows = total;
  c.A = assemble_constraints(d, T, total);
  return c;
}

ConstraintSet build_weak_constraints(const Decomposition& d, int n_c, std::uint64_t seed) {
  std::vector<int> per_port(d.ports.size());
  for (const Port& p : d.ports) per_port[p.id] = std::min(n_c, p.size());
  return build_weak_constraints(d, per_port, seed);
}

Eigen::MatrixXd reduced_constraint_matrix(const ConstraintSet& c, const BasisSet& bases) {
  const int nd = static_cast<int>(c.A.size());
  int cols = 0;
  for (int i = 0; i < nd; ++i) cols += bases.nhat_boundary(i);
  Eigen::MatrixXd R(c.num_rows, cols);
  int at = 0;
  for (int i = 0; i < nd; ++i) {
    R.middleCols(at, bases.nhat_boundary(i)) = c.A[i] * bases.boundary[i];
    at += bases.nhat_boundary(i);
  }
  return R;
}

int effective_dofs(const BasisSet& bases, const ConstraintSet& c) {
  int total = bases.nhat_total();
  if (c.num_rows == 0) return total;
  const Eigen::MatrixXd R = reduced_constraint_matrix(c, bases);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(R);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (int k = 0; k < sv.size(); ++k) {
    if (sv(k) > 1e-12 * sv(0)) ++rank;
  }
  return total - rank;
}

}  // namespace ddrom
