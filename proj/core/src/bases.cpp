#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "ddrom/bases.hpp"
#include "ddrom/errors.hpp"

namespace ddrom {

namespace {

constexpr double kRankFloor = 1e-14;  // sigma below kRankFloor*sigma_1 counts as zero

void fix_column_signs(Eigen::MatrixXd& m) {
  for (int c = 0; c < m.cols(); ++c) {
    const double scale = m.col(c).cwiseAbs().maxCoeff();
    if (scale == 0.0) continue;
    for (int r = 0; r < m.rows(); ++r) {
      const double v = m(r, c);
      if (std::abs(v) > 1e-12 * scale) {
        if (v < 0.0) m.col(c) = -m.col(c);
        break;
      }
    }
  }
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& X, const std::vector<int>& rows) {
  Eigen::MatrixXd out(rows.size(), X.cols());
  for (size_t r = 0; r < rows.size(); ++r) out.row(r) = X.row(rows[r]);
  return out;
}

}  // namespace

PodResult pod(const Eigen::MatrixXd& snapshots, double discard_energy) {
  if (snapshots.size() == 0) throw ZeroSnapshots("empty snapshot matrix");
  if (discard_energy < 0.0 || discard_energy > 1.0) {
    throw ConfigError("discard_energy must lie in [0, 1]");
  }
  if (snapshots.cwiseAbs().maxCoeff() == 0.0) {
    throw ZeroSnapshots("all-zero snapshot matrix");
  }

  // Thin SVD; for wide matrices decompose the transpose and swap factors.
  Eigen::MatrixXd U;
  Eigen::VectorXd sigma;
  if (snapshots.rows() >= snapshots.cols()) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(snapshots, Eigen::ComputeThinU);
    U = svd.matrixU();
    sigma = svd.singularValues();
  } else {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(snapshots.transpose(), Eigen::ComputeThinV);
    U = svd.matrixV();
    sigma = svd.singularValues();
  }

  int numerical_rank = 0;
  for (int k = 0; k < sigma.size(); ++k) {
    if (sigma(k) > kRankFloor * sigma(0)) ++numerical_rank;
  }

  const double total = sigma.sum();
  const double threshold = 1.0 - discard_energy;
  int p = numerical_rank;
  double cum = 0.0;
  for (int k = 0; k < sigma.size(); ++k) {
    cum += sigma(k);
    if (cum / total >= threshold) {
      p = k + 1;
      break;
    }
  }
  p = std::min(p, numerical_rank);
  p = std::max(p, 1);

  PodResult out;
  out.basis = U.leftCols(p);
  out.singular_values = sigma;
  out.discard_energy = discard_energy;
  fix_column_signs(out.basis);
  return out;
}

const char* to_string(BasisKind k) {
  switch (k) {
    case BasisKind::Port: return "port";
    case BasisKind::Skeleton: return "skeleton";
    case BasisKind::FullInterface: return "full-interface";
    case BasisKind::FullSubdomain: return "full-subdomain";
  }
  return "?";
}

BasisKind basis_kind_from_string(const std::string& s) {
  if (s == "port") return BasisKind::Port;
  if (s == "skeleton") return BasisKind::Skeleton;
  if (s == "full-interface") return BasisKind::FullInterface;
  if (s == "full-subdomain" || s == "subdomain") return BasisKind::FullSubdomain;
  throw ConfigError("unknown basis kind: " + s);
}

std::vector<Eigen::MatrixXd> build_interior_bases(const Eigen::MatrixXd& X,
                                                  const Decomposition& d, double discard) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(d.num_subdomains());
  for (const Subdomain& s : d.subs) {
    out.push_back(pod(rows_of(X, s.interior_dofs), discard).basis);
  }
  return out;
}

BoundaryBases build_boundary_bases(const Eigen::MatrixXd& X, const Decomposition& d,
                                   double discard, BasisKind kind) {
  BoundaryBases out;
  const int nd = d.num_subdomains();
  out.boundary.resize(nd);

  if (kind == BasisKind::Port) {
    out.port_blocks.reserve(d.ports.size());
    for (const Port& p : d.ports) {
      out.port_blocks.push_back(pod(rows_of(X, p.dofs), discard).basis);
    }
    for (int i = 0; i < nd; ++i) {
      const Subdomain& s = d.subs[i];
      if (s.num_interface() == 0) {
        out.boundary[i].resize(0, 0);
        continue;
      }
      int cols = 0;
      for (int pid : s.ports) cols += static_cast<int>(out.port_blocks[pid].cols());
      Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(s.num_interface(), cols);
      int r0 = 0, c0 = 0;
      for (int pid : s.ports) {
        const auto& blk = out.port_blocks[pid];
        phi.block(r0, c0, blk.rows(), blk.cols()) = blk;
        r0 += static_cast<int>(blk.rows());
        c0 += static_cast<int>(blk.cols());
      }
      out.boundary[i] = std::move(phi);
    }
    return out;
  }

  if (kind == BasisKind::Skeleton) {
    // POD of skeleton-restricted snapshots (interior rows zeroed), then
    // per-subdomain restriction with a rank-revealing QR to restore full
    // column rank.
    Eigen::MatrixXd Xs = X;
    for (const Subdomain& s : d.subs) {
      for (int dof : s.interior_dofs) Xs.row(dof).setZero();
    }
    const Eigen::MatrixXd skel = pod(Xs, discard).basis;
    for (int i = 0; i < nd; ++i) {
      const Subdomain& s = d.subs[i];
      if (s.num_interface() == 0) {
        out.boundary[i].resize(0, 0);
        continue;
      }
      Eigen::MatrixXd restricted = rows_of(skel, s.interface_dofs);
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(restricted);
      qr.setThreshold(1e-12);
      const int rank = static_cast<int>(qr.rank());
      if (rank == 0) throw EmptyBoundaryBasis("skeleton restriction has rank zero");
      Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(restricted.rows(), rank);
      fix_column_signs(Q);
      out.boundary[i] = std::move(Q);
    }
    return out;
  }

  // FullInterface: independent POD of each subdomain's interface snapshots.
  for (int i = 0; i < nd; ++i) {
    const Subdomain& s = d.subs[i];
    if (s.num_interface() == 0) {
      out.boundary[i].resize(0, 0);
      continue;
    }
    out.boundary[i] = pod(rows_of(X, s.interface_dofs), discard).basis;
  }
  return out;
}

BasisSet build_full_subdomain_bases(const Eigen::MatrixXd& X, const Decomposition& d,
                                    double discard) {
  BasisSet set;
  set.kind = BasisKind::FullSubdomain;
  set.discard_state = discard;
  set.discard_boundary = discard;
  for (const Subdomain& s : d.subs) {
    std::vector<int> stacked = s.interior_dofs;
    stacked.insert(stacked.end(), s.interface_dofs.begin(), s.interface_dofs.end());
    Eigen::MatrixXd phi = pod(rows_of(X, stacked), discard).basis;
    set.interior.push_back(phi.topRows(s.num_interior()));
    set.boundary.push_back(phi.bottomRows(s.num_interface()));
    set.coupled.push_back(std::move(phi));
  }
  return set;
}

BasisSet build_basis_set(const Eigen::MatrixXd& X, const Decomposition& d, BasisKind kind,
                         double discard_state, double discard_boundary) {
  if (kind == BasisKind::FullSubdomain) {
    return build_full_subdomain_bases(X, d, discard_state);
  }
  BasisSet set;
  set.kind = kind;
  set.discard_state = discard_state;
  set.discard_boundary = discard_boundary;
  set.interior = build_interior_bases(X, d, discard_state);
  BoundaryBases bb = build_boundary_bases(X, d, discard_boundary, kind);
  set.boundary = std::move(bb.boundary);
  set.port_blocks = std::move(bb.port_blocks);
  return set;
}

ResidualBasis build_residual_bases(const Eigen::MatrixXd& residual_snapshots,
                                   const Decomposition& d, double discard) {
  if (residual_snapshots.cols() == 0) throw ZeroSnapshots("no residual snapshots");
  ResidualBasis out;
  for (const Subdomain& s : d.subs) {
    PodResult r = pod(rows_of(residual_snapshots, s.residual_rows), discard);
    out.blocks.push_back(r.basis);
    out.snapshot_counts.push_back(static_cast<int>(residual_snapshots.cols()));
  }
  return out;
}

BasisSet build_basis_set_subdomain(const std::vector<Eigen::MatrixXd>& sub_snapshots,
                                   const Decomposition& d, BasisKind kind, double discard_state,
                                   double discard_boundary) {
  const int nd = d.num_subdomains();
  BasisSet set;
  set.kind = kind;
  set.discard_state = discard_state;
  set.discard_boundary = discard_boundary;

  if (kind == BasisKind::Skeleton) {
    throw ConfigError("skeleton bases need full-system snapshots");
  }

  if (kind == BasisKind::FullSubdomain) {
    for (int i = 0; i < nd; ++i) {
      const Subdomain& s = d.subs[i];
      Eigen::MatrixXd phi = pod(sub_snapshots[i], discard_state).basis;
      set.interior.push_back(phi.topRows(s.num_interior()));
      set.boundary.push_back(phi.bottomRows(s.num_interface()));
      set.coupled.push_back(std::move(phi));
    }
    return set;
  }

  for (int i = 0; i < nd; ++i) {
    const Subdomain& s = d.subs[i];
    set.interior.push_back(pod(sub_snapshots[i].topRows(s.num_interior()), discard_state).basis);
  }

  if (kind == BasisKind::FullInterface) {
    for (int i = 0; i < nd; ++i) {
      const Subdomain& s = d.subs[i];
      if (s.num_interface() == 0) {
        set.boundary.emplace_back(0, 0);
        continue;
      }
      set.boundary.push_back(
          pod(sub_snapshots[i].bottomRows(s.num_interface()), discard_boundary).basis);
    }
    return set;
  }

  // Port kind: pool the port-restricted snapshots of every member so the
  // shared port basis stays identical across members.
  std::vector<Eigen::MatrixXd> port_blocks(d.ports.size());
  for (const Port& p : d.ports) {
    std::vector<Eigen::MatrixXd> pieces;
    for (int m : p.members) {
      const Subdomain& s = d.subs[m];
      const auto idx = d.port_local_indices(p.id, m);
      Eigen::MatrixXd piece(p.size(), sub_snapshots[m].cols());
      for (int k = 0; k < p.size(); ++k) {
        piece.row(k) = sub_snapshots[m].row(s.num_interior() + idx[k]);
      }
      pieces.push_back(std::move(piece));
    }
    int cols = 0;
    for (const auto& piece : pieces) cols += static_cast<int>(piece.cols());
    Eigen::MatrixXd pooled(p.size(), cols);
    int at = 0;
    for (const auto& piece : pieces) {
      pooled.middleCols(at, piece.cols()) = piece;
      at += static_cast<int>(piece.cols());
    }
    port_blocks[p.id] = pod(pooled, discard_boundary).basis;
  }
  set.boundary.resize(nd);
  for (int i = 0; i < nd; ++i) {
    const Subdomain& s = d.subs[i];
    if (s.num_interface() == 0) continue;
    int cols = 0;
    for (int pid : s.ports) cols += static_cast<int>(port_blocks[pid].cols());
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(s.num_interface(), cols);
    int r0 = 0, c0 = 0;
    for (int pid : s.ports) {
      const auto& blk = port_blocks[pid];
      phi.block(r0, c0, blk.rows(), blk.cols()) = blk;
      r0 += static_cast<int>(blk.rows());
      c0 += static_cast<int>(blk.cols());
    }
    set.boundary[i] = std::move(phi);
  }
  set.port_blocks = std::move(port_blocks);
  return set;
}

}  // namespace ddrom
