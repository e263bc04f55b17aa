#include <Eigen/LU>
#include <Eigen/SVD>
#include <Eigen/SparseLU>
#include <algorithm>
#include <chrono>
#include <cmath>

#include "ddrom/errors.hpp"
#include "ddrom/sqp.hpp"

namespace ddrom {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Precomputed per-subdomain assembly data. Sampled basis rows, scatter
// targets into the global scratch state, and global->local column maps.
struct SubWork {
  std::vector<int> rows_global;
  Eigen::MatrixXd phi_int_sampled;
  Eigen::MatrixXd phi_bnd_sampled;
  std::vector<int> scatter_int;
  std::vector<int> scatter_bnd;
  std::vector<int> map_int;  // global dof -> interior-local, else -1
  std::vector<int> map_bnd;
  int nhat_int = 0, nhat_bnd = 0, nvar = 0, offset = 0;
};

struct Workspace {
  const RomProblem& rom;
  bool coupled;
  int nd, num_primal, num_mult;
  std::vector<SubWork> sub;
  Eigen::MatrixXd constraint;  // row-compressed [A_i Phi^G_i] blocks, num_mult x (sum of Gamma vars)
  std::vector<int> cvar_offset;  // column offset of each subdomain's Gamma vars in `constraint`
  mutable Eigen::VectorXd scratch;

  explicit Workspace(const RomProblem& r) : rom(r) {
    const Decomposition& d = *rom.decomp;
    const BasisSet& b = *rom.bases;
    const HyperData& h = *rom.hyper;
    coupled = b.coupled_family();
    nd = d.num_subdomains();
    sub.resize(nd);
    scratch.setZero(rom.fom->size());

    int offset = 0;
    for (int i = 0; i < nd; ++i) {
      const Subdomain& s = d.subs[i];
      SubWork& w = sub[i];
      w.nhat_int = b.nhat_interior(i);
      w.nhat_bnd = b.nhat_boundary(i);
      w.nvar = b.nhat(i);
      w.offset = offset;
      offset += w.nvar;

      w.rows_global.reserve(h.sample_rows[i].size());
      for (int lr : h.sample_rows[i]) w.rows_global.push_back(s.residual_rows[lr]);

      const auto& si = h.sample_interior[i];
      w.phi_int_sampled.resize(si.size(), w.nhat_int);
      w.scatter_int.resize(si.size());
      for (size_t k = 0; k < si.size(); ++k) {
        w.phi_int_sampled.row(k) = b.interior[i].row(si[k]);
        w.scatter_int[k] = s.interior_dofs[si[k]];
      }
      const auto& sb = h.sample_boundary[i];
      w.phi_bnd_sampled.resize(sb.size(), w.nhat_bnd);
      w.scatter_bnd.resize(sb.size());
      for (size_t k = 0; k < sb.size(); ++k) {
        w.phi_bnd_sampled.row(k) = b.boundary[i].row(sb[k]);
        w.scatter_bnd[k] = s.interface_dofs[sb[k]];
      }

      w.map_int.assign(rom.fom->size(), -1);
      for (int k = 0; k < s.num_interior(); ++k) w.map_int[s.interior_dofs[k]] = k;
      w.map_bnd.assign(rom.fom->size(), -1);
      for (int k = 0; k < s.num_interface(); ++k) w.map_bnd[s.interface_dofs[k]] = k;
    }
    num_primal = offset;

    // Row-compress the reduced constraint matrix to full row rank; redundant
    // rows (e.g. strong constraints on shared port bases) would otherwise
    // make the saddle system singular.
    Eigen::MatrixXd reduced = reduced_constraint_matrix(*rom.constraints, b);
    cvar_offset.resize(nd);
    int cat = 0;
    for (int i = 0; i < nd; ++i) {
      cvar_offset[i] = cat;
      cat += coupled ? sub[i].nvar : sub[i].nhat_bnd;
    }
    if (reduced.rows() == 0) {
      num_mult = 0;
      constraint.resize(0, cat);
    } else {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(reduced, Eigen::ComputeThinV);
      const auto& sv = svd.singularValues();
      int rank = 0;
      for (int k = 0; k < sv.size(); ++k) {
        if (sv(k) > 1e-12 * sv(0)) ++rank;
      }
      num_mult = rank;
      constraint = svd.matrixV().leftCols(rank).transpose();
    }
  }

  // Gamma-variable slice of a subdomain's variable block.
  Eigen::VectorXd gamma_vars(int i, const Eigen::VectorXd& xi) const {
    return coupled ? xi : xi.tail(sub[i].nhat_bnd);
  }

  Eigen::VectorXd constraint_value(const std::vector<Eigen::VectorXd>& xhat) const {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(num_mult);
    if (num_mult == 0) return c;
    for (int i = 0; i < nd; ++i) {
      const int width = coupled ? sub[i].nvar : sub[i].nhat_bnd;
      c += constraint.middleCols(cvar_offset[i], width) * gamma_vars(i, xhat[i]);
    }
    return c;
  }

  // Scatter the sampled reconstructed state of subdomain i into scratch.
  void scatter_state(int i, const Eigen::VectorXd& xi) const {
    const SubWork& w = sub[i];
    const Eigen::VectorXd xo = coupled ? xi : xi.head(w.nhat_int);
    const Eigen::VectorXd xg = coupled ? xi : xi.tail(w.nhat_bnd);
    const Eigen::VectorXd vi = w.phi_int_sampled * xo;
    for (size_t k = 0; k < w.scatter_int.size(); ++k) scratch[w.scatter_int[k]] = vi[k];
    const Eigen::VectorXd vb = w.phi_bnd_sampled * xg;
    for (size_t k = 0; k < w.scatter_bnd.size(); ++k) scratch[w.scatter_bnd[k]] = vb[k];
  }

  // Weighted residual of subdomain i at the scattered state.
  Eigen::VectorXd weighted_residual(int i) const {
    Eigen::VectorXd rs;
    rom.fom->residual_rows(sub[i].rows_global, scratch, rom.mu, rs);
    return rom.hyper->apply_weighting(i, rs);
  }
};

struct SubAssembly {
  Eigen::MatrixXd H;   // nvar x nvar Gauss-Newton block
  Eigen::VectorXd g;   // objective gradient (constraint term excluded)
  double obj = 0.0;    // |B r|^2
};

SubAssembly assemble_subdomain(const Workspace& ws, int i, const Eigen::VectorXd& xi) {
  const SubWork& w = ws.sub[i];
  ws.scatter_state(i, xi);

  Eigen::VectorXd rs;
  ws.rom.fom->residual_rows(w.rows_global, ws.scratch, ws.rom.mu, rs);

  JacobianRows jr;
  ws.rom.fom->jacobian_rows(w.rows_global, ws.scratch, ws.rom.mu, jr);

  const int ns = static_cast<int>(w.rows_global.size());
  Eigen::MatrixXd JPhiO = Eigen::MatrixXd::Zero(ns, w.nhat_int);
  Eigen::MatrixXd JPhiG = Eigen::MatrixXd::Zero(ns, w.nhat_bnd);
  const Eigen::MatrixXd& phi_o = ws.rom.bases->interior[i];
  const Eigen::MatrixXd& phi_g = ws.rom.bases->boundary[i];
  for (int r = 0; r < ns; ++r) {
    for (int k = jr.offsets[r]; k < jr.offsets[r + 1]; ++k) {
      const int col = jr.cols[k];
      const double v = jr.vals[k];
      if (const int li = w.map_int[col]; li >= 0) {
        JPhiO.row(r) += v * phi_o.row(li);
      } else if (const int lb = w.map_bnd[col]; lb >= 0) {
        JPhiG.row(r) += v * phi_g.row(lb);
      } else {
        throw NonFiniteAssembly("jacobian column outside subdomain DOFs");
      }
    }
  }

  const Eigen::VectorXd Br = ws.rom.hyper->apply_weighting(i, rs);
  const Eigen::MatrixXd MO = ws.rom.hyper->apply_weighting(i, JPhiO);
  const Eigen::MatrixXd MG = ws.rom.hyper->apply_weighting(i, JPhiG);

  SubAssembly out;
  if (ws.coupled) {
    const Eigen::MatrixXd M = MO + MG;
    out.H = M.transpose() * M;
    out.g = M.transpose() * Br;
  } else {
    Eigen::MatrixXd M(Br.size(), w.nvar);
    M << MO, MG;
    out.H = M.transpose() * M;
    out.g = M.transpose() * Br;
  }
  out.obj = Br.squaredNorm();
  if (!out.H.allFinite() || !out.g.allFinite()) {
    throw NonFiniteAssembly("non-finite entries in Gauss-Newton blocks");
  }
  return out;
}

// KKT residual blocks [g_i + C_i^T lambda; c] stacked; also returns objective.
Eigen::VectorXd kkt_residual(const Workspace& ws, const std::vector<SubAssembly>& asm_,
                             const std::vector<Eigen::VectorXd>& xhat,
                             const Eigen::VectorXd& lambda, double* objective) {
  Eigen::VectorXd res(ws.num_primal + ws.num_mult);
  double obj = 0.0;
  for (int i = 0; i < ws.nd; ++i) {
    Eigen::VectorXd gi = asm_[i].g;
    if (ws.num_mult > 0) {
      const int width = ws.coupled ? ws.sub[i].nvar : ws.sub[i].nhat_bnd;
      const Eigen::VectorXd ct =
          ws.constraint.middleCols(ws.cvar_offset[i], width).transpose() * lambda;
      if (ws.coupled) {
        gi += ct;
      } else {
        gi.tail(ws.sub[i].nhat_bnd) += ct;
      }
    }
    res.segment(ws.sub[i].offset, ws.sub[i].nvar) = gi;
    obj += asm_[i].obj;
  }
  if (ws.num_mult > 0) res.tail(ws.num_mult) = ws.constraint_value(xhat);
  if (objective) *objective = obj;
  return res;
}

Eigen::VectorXd solve_saddle(const Eigen::MatrixXd& K, const Eigen::VectorXd& rhs) {
  Eigen::VectorXd p;
  if (K.rows() < 2000) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
    p = lu.solve(rhs);
  } else {
    Eigen::SparseMatrix<double> Ks = K.sparseView(1e-300);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(Ks);
    if (lu.info() != Eigen::Success) throw SingularSaddle("sparse saddle factorization failed");
    p = lu.solve(rhs);
  }
  if (!p.allFinite()) throw SingularSaddle("saddle solve produced non-finite step");
  const double relres = (K * p - rhs).norm() / std::max(1.0, rhs.norm());
  if (relres > 1e-6) throw SingularSaddle("saddle system numerically singular");
  return p;
}

}  // namespace

KktSystem assemble_kkt(const RomProblem& problem, const std::vector<Eigen::VectorXd>& xhat,
                       const Eigen::VectorXd& lambda) {
  Workspace ws(problem);
  std::vector<SubAssembly> blocks(ws.nd);
  for (int i = 0; i < ws.nd; ++i) blocks[i] = assemble_subdomain(ws, i, xhat[i]);

  KktSystem sys;
  sys.num_primal = ws.num_primal;
  sys.num_multipliers = ws.num_mult;
  const int dim = ws.num_primal + ws.num_mult;
  sys.matrix.setZero(dim, dim);
  for (int i = 0; i < ws.nd; ++i) {
    const SubWork& w = ws.sub[i];
    sys.matrix.block(w.offset, w.offset, w.nvar, w.nvar) = blocks[i].H;
    if (ws.num_mult > 0) {
      const int width = ws.coupled ? w.nvar : w.nhat_bnd;
      const int gcol = ws.coupled ? w.offset : w.offset + w.nhat_int;
      const Eigen::MatrixXd C = ws.constraint.middleCols(ws.cvar_offset[i], width);
      sys.matrix.block(ws.num_primal, gcol, ws.num_mult, width) = C;
      sys.matrix.block(gcol, ws.num_primal, width, ws.num_mult) = C.transpose();
    }
  }
  sys.rhs = -kkt_residual(ws, blocks, xhat, lambda, nullptr);
  return sys;
}

RomSolution sqp_solve(const RomProblem& problem, const SqpOptions& opts,
                      const std::vector<Eigen::VectorXd>* xhat0,
                      const Eigen::VectorXd* lambda0) {
  if (opts.tol <= 0.0) throw ConfigError("sqp tolerance must be positive");
  Workspace ws(problem);

  std::vector<Eigen::VectorXd> xhat(ws.nd);
  for (int i = 0; i < ws.nd; ++i) {
    xhat[i] = xhat0 ? (*xhat0)[i] : Eigen::VectorXd::Zero(ws.sub[i].nvar);
  }
  Eigen::VectorXd lambda =
      lambda0 ? *lambda0 : Eigen::VectorXd::Zero(ws.num_mult);
  if (lambda.size() != ws.num_mult) {
    // Caller-provided multipliers may predate row compression.
    lambda = Eigen::VectorXd::Zero(ws.num_mult);
  }

  RomSolution sol;
  const auto t_start = Clock::now();

  std::vector<SubAssembly> blocks(ws.nd);
  std::vector<double> sub_seconds(ws.nd, 0.0);
  double kkt0 = -1.0;
  bool converged = false;
  int it = 0;

  for (; it < opts.max_iters; ++it) {
    // Steps 1-3: per-subdomain assembly (timed individually, max-reduced).
    for (int i = 0; i < ws.nd; ++i) {
      const auto t0 = Clock::now();
      blocks[i] = assemble_subdomain(ws, i, xhat[i]);
      sub_seconds[i] = seconds_since(t0);
    }

    double objective = 0.0;
    const Eigen::VectorXd kkt = kkt_residual(ws, blocks, xhat, lambda, &objective);
    const double kkt_norm = kkt.norm();
    if (kkt0 < 0.0) kkt0 = std::max(1.0, kkt_norm);

    SqpIterRecord rec;
    rec.iter = it;
    rec.kkt_norm = kkt_norm;
    rec.objective = objective;
    rec.constraint_norm = ws.num_mult > 0 ? ws.constraint_value(xhat).norm() : 0.0;

    if (kkt_norm <= opts.tol * kkt0) {
      sol.trace.push_back(rec);
      sol.timings.assembly_seconds += *std::max_element(sub_seconds.begin(), sub_seconds.end());
      converged = true;
      break;
    }

    // Steps 4-7: serial constraint reduce, saddle solve, update.
    const auto t_serial = Clock::now();
    const int dim = ws.num_primal + ws.num_mult;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i < ws.nd; ++i) {
      const SubWork& w = ws.sub[i];
      K.block(w.offset, w.offset, w.nvar, w.nvar) = blocks[i].H;
      if (ws.num_mult > 0) {
        const int width = ws.coupled ? w.nvar : w.nhat_bnd;
        const int gcol = ws.coupled ? w.offset : w.offset + w.nhat_int;
        const Eigen::MatrixXd C = ws.constraint.middleCols(ws.cvar_offset[i], width);
        K.block(ws.num_primal, gcol, ws.num_mult, width) = C;
        K.block(gcol, ws.num_primal, width, ws.num_mult) = C.transpose();
      }
    }
    const Eigen::VectorXd step = solve_saddle(K, -kkt);
    double solve_sec = seconds_since(t_serial);

    // Backtracking line search on the merit function.
    const double rho = 10.0 * (lambda.size() > 0 ? lambda.lpNorm<Eigen::Infinity>() : 0.0) + 1.0;
    auto merit_at = [&](double alpha, std::vector<Eigen::VectorXd>& xt) {
      double obj = 0.0;
      for (int i = 0; i < ws.nd; ++i) {
        xt[i] = xhat[i] + alpha * step.segment(ws.sub[i].offset, ws.sub[i].nvar);
      }
      for (int i = 0; i < ws.nd; ++i) {
        const auto t0 = Clock::now();
        ws.scatter_state(i, xt[i]);
        obj += ws.weighted_residual(i).squaredNorm();
        sub_seconds[i] += seconds_since(t0);
      }
      const double cn = ws.num_mult > 0 ? ws.constraint_value(xt).norm() : 0.0;
      return obj + rho * cn;
    };

    const double merit0 =
        objective + rho * (ws.num_mult > 0 ? ws.constraint_value(xhat).norm() : 0.0);
    double alpha = 1.0;
    std::vector<Eigen::VectorXd> x_trial(ws.nd);
    if (opts.line_search) {
      while (true) {
        const double m = merit_at(alpha, x_trial);
        if (m <= merit0 * (1.0 + 1e-12) + 1e-14 || alpha <= opts.min_step) break;
        alpha *= 0.5;
      }
    } else {
      for (int i = 0; i < ws.nd; ++i) {
        x_trial[i] = xhat[i] + step.segment(ws.sub[i].offset, ws.sub[i].nvar);
      }
    }
    xhat = x_trial;
    if (ws.num_mult > 0) lambda += alpha * step.tail(ws.num_mult);

    rec.alpha = alpha;
    sol.trace.push_back(rec);
    sol.timings.assembly_seconds += *std::max_element(sub_seconds.begin(), sub_seconds.end());
    sol.timings.solve_seconds += solve_sec;
    std::fill(sub_seconds.begin(), sub_seconds.end(), 0.0);
  }

  sol.timings.total_seconds = seconds_since(t_start);
  sol.iters = it;
  sol.converged = converged;
  sol.lambda = lambda;
  if (!sol.trace.empty()) sol.kkt_norm = sol.trace.back().kkt_norm;

  // Reconstructed states and diagnostics on the full (unsampled) residual.
  const BasisSet& b = *problem.bases;
  for (int i = 0; i < ws.nd; ++i) {
    if (ws.coupled) {
      sol.xhat_coupled.push_back(xhat[i]);
      sol.state_interior.push_back(b.interior[i] * xhat[i]);
      sol.state_boundary.push_back(b.boundary[i] * xhat[i]);
    } else {
      sol.xhat_interior.push_back(xhat[i].head(ws.sub[i].nhat_int));
      sol.xhat_boundary.push_back(xhat[i].tail(ws.sub[i].nhat_bnd));
      sol.state_interior.push_back(b.interior[i] * sol.xhat_interior[i]);
      sol.state_boundary.push_back(b.boundary[i] * sol.xhat_boundary[i]);
    }
  }
  double obj = 0.0;
  for (int i = 0; i < ws.nd; ++i) {
    ws.scatter_state(i, xhat[i]);
    obj += ws.weighted_residual(i).squaredNorm();
  }
  sol.objective = obj;

  // Constraint feasibility against the original (uncompressed) matrices.
  const ConstraintSet& cs = *problem.constraints;
  if (cs.num_rows > 0) {
    Eigen::VectorXd cres = Eigen::VectorXd::Zero(cs.num_rows);
    for (int i = 0; i < ws.nd; ++i) cres += cs.A[i] * sol.state_boundary[i];
    sol.constraint_residual = cres.norm();
  }

  if (!converged) {
    std::vector<double> hist;
    for (const auto& r : sol.trace) hist.push_back(r.kkt_norm);
    throw NonConvergence("sqp iteration budget exhausted", hist);
  }
  return sol;
}

NullspaceResult nullspace_reduce(const ConstraintSet& constraints, const BasisSet& bases) {
  const int nd = bases.num_subdomains();
  std::vector<int> widths(nd);
  int total = 0;
  for (int i = 0; i < nd; ++i) {
    widths[i] = bases.coupled_family() ? bases.nhat(i) : bases.nhat_boundary(i);
    total += widths[i];
  }

  NullspaceResult out;
  if (constraints.num_rows == 0) {
    out.full = Eigen::MatrixXd::Identity(total, total);
  } else {
    const Eigen::MatrixXd reduced = reduced_constraint_matrix(constraints, bases);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(reduced, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (int k = 0; k < sv.size(); ++k) {
      if (sv(k) > 1e-12 * sv(0)) ++rank;
    }
    out.full = svd.matrixV().rightCols(total - rank);
  }
  int at = 0;
  for (int i = 0; i < nd; ++i) {
    out.blocks.push_back(out.full.middleRows(at, widths[i]));
    at += widths[i];
  }
  return out;
}

GlobalReconstruction reconstruct_global(const RomSolution& solution, const Decomposition& d,
                                        ReconstructMode mode) {
  GlobalReconstruction out;
  out.x.setZero(d.n);
  for (int i = 0; i < d.num_subdomains(); ++i) {
    const Subdomain& s = d.subs[i];
    for (int k = 0; k < s.num_interior(); ++k) {
      out.x[s.interior_dofs[k]] = solution.state_interior[i][k];
    }
  }
  for (const Port& p : d.ports) {
    Eigen::MatrixXd vals(p.size(), p.members.size());
    for (size_t m = 0; m < p.members.size(); ++m) {
      const int sub = p.members[m];
      const auto idx = d.port_local_indices(p.id, sub);
      for (int k = 0; k < p.size(); ++k) vals(k, m) = solution.state_boundary[sub][idx[k]];
    }
    const double disc =
        (vals.rowwise().maxCoeff() - vals.rowwise().minCoeff()).lpNorm<Eigen::Infinity>();
    out.max_port_discrepancy = std::max(out.max_port_discrepancy, disc);
    if (mode == ReconstructMode::Strict && disc > 1e-8) {
      throw PortMismatch("subdomains disagree on a shared port", disc);
    }
    for (int k = 0; k < p.size(); ++k) out.x[p.dofs[k]] = vals.row(k).mean();
  }
  return out;
}

}  // namespace ddrom
