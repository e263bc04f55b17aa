#include <cmath>

#include "ddrom/errors.hpp"
#include "ddrom/fom.hpp"

namespace ddrom {

// Q1 elements on a uniform rectangle mesh. Local node ordering within an
// element: 0=(0,0), 1=(1,0), 2=(0,1), 3=(1,1) in (x1,x2) offsets.
//
// Everything is evaluated row-by-row so the full assembly and the sampled
// (hyper-reduced) assembly share one code path. A row belongs to one free
// node; its value accumulates contributions from the up-to-four elements
// adjacent to that node.

namespace {

constexpr double kGaussPt = 0.577350269189625764509148780502;  // 1/sqrt(3)

// Reference shape functions on [-1,1]^2.
double shape_ref(int a, double xi, double eta) {
  const double sx = (a == 1 || a == 3) ? (1.0 + xi) : (1.0 - xi);
  const double sy = (a >= 2) ? (1.0 + eta) : (1.0 - eta);
  return 0.25 * sx * sy;
}

}  // namespace

struct HeatKernel {
  const FomProblem& p;
  const StructuredMesh& m;
  double mu1, mu2, ratio;  // ratio = mu1/mu2

  HeatKernel(const FomProblem& problem, const Param& mu)
      : p(problem), m(problem.mesh()), mu1(mu[0]), mu2(mu[1]), ratio(mu[0] / mu[1]) {}

  // Value of state at lattice node (gi, gj); Dirichlet nodes are zero.
  double node_value(const Eigen::VectorXd& x, int gi, int gj) const {
    if (m.is_boundary_node(gi, gj)) return 0.0;
    return x[m.free_node(gi, gj)];
  }

  double residual_row(int row, const Eigen::VectorXd& x) const {
    const int gi = m.free_node_gi(row);
    const int gj = m.free_node_gj(row);
    double acc = -p.load_[row];
    for (int ej = gj - 1; ej <= gj; ++ej) {
      for (int ei = gi - 1; ei <= gi; ++ei) {
        const int a = (gi - ei) + 2 * (gj - ej);  // local index of this node
        double u[4];
        for (int b = 0; b < 4; ++b) {
          u[b] = node_value(x, ei + (b & 1), ej + (b >> 1));
        }
        double lin = 0.0;
        for (int b = 0; b < 4; ++b) lin += p.ke_(a, b) * u[b];
        double nl = 0.0;
        for (int q = 0; q < 4; ++q) {
          double uq = 0.0;
          for (int b = 0; b < 4; ++b) uq += p.shape_[q][b] * u[b];
          nl += p.shape_[q][a] * (ratio * std::expm1(mu2 * uq));
        }
        acc += lin + p.qweight_ * nl;
      }
    }
    return acc;
  }

  void jacobian_row(int row, const Eigen::VectorXd& x, JacobianRows& out) const {
    const int gi = m.free_node_gi(row);
    const int gj = m.free_node_gj(row);
    // 3x3 neighborhood accumulator indexed by (di+1) + 3*(dj+1).
    double coef[9] = {0, 0, 0, 0, 0, 0, 0, 0, 0};
    for (int ej = gj - 1; ej <= gj; ++ej) {
      for (int ei = gi - 1; ei <= gi; ++ei) {
        const int a = (gi - ei) + 2 * (gj - ej);
        double u[4];
        int bgi[4], bgj[4];
        for (int b = 0; b < 4; ++b) {
          bgi[b] = ei + (b & 1);
          bgj[b] = ej + (b >> 1);
          u[b] = node_value(x, bgi[b], bgj[b]);
        }
        double expq[4];
        for (int q = 0; q < 4; ++q) {
          double uq = 0.0;
          for (int b = 0; b < 4; ++b) uq += p.shape_[q][b] * u[b];
          expq[q] = mu1 * std::exp(mu2 * uq);
        }
        for (int b = 0; b < 4; ++b) {
          if (m.is_boundary_node(bgi[b], bgj[b])) continue;  // eliminated column
          double v = p.ke_(a, b);
          for (int q = 0; q < 4; ++q) v += p.qweight_ * p.shape_[q][a] * p.shape_[q][b] * expq[q];
          coef[(bgi[b] - gi + 1) + 3 * (bgj[b] - gj + 1)] += v;
        }
      }
    }
    for (int dj = -1; dj <= 1; ++dj) {
      for (int di = -1; di <= 1; ++di) {
        const int ni = gi + di, nj = gj + dj;
        if (m.is_boundary_node(ni, nj)) continue;
        out.cols.push_back(m.free_node(ni, nj));
        out.vals.push_back(coef[(di + 1) + 3 * (dj + 1)]);
      }
    }
    out.offsets.push_back(static_cast<int>(out.cols.size()));
  }

  std::vector<int> stencil(int row) const {
    const int gi = m.free_node_gi(row);
    const int gj = m.free_node_gj(row);
    std::vector<int> cols;
    for (int dj = -1; dj <= 1; ++dj) {
      for (int di = -1; di <= 1; ++di) {
        if (!m.is_boundary_node(gi + di, gj + dj)) cols.push_back(m.free_node(gi + di, gj + dj));
      }
    }
    return cols;
  }
};

void heat_setup(FomProblem& p);

namespace detail {

void heat_precompute(const StructuredMesh& m, double forcing, Eigen::Matrix4d& ke,
                     std::array<std::array<double, 4>, 4>& shape, double& qweight,
                     Eigen::VectorXd& load) {
  const double hx = m.hx(), hy = m.hy();
  const double jac = 0.25 * hx * hy;  // reference-to-element area scale
  qweight = jac;                      // unit Gauss weights, 2x2 rule

  const double qp[2] = {-kGaussPt, kGaussPt};
  ke.setZero();
  int q = 0;
  double qx1[4], qx2[4];  // quadrature offsets within the element
  for (int jq = 0; jq < 2; ++jq) {
    for (int iq = 0; iq < 2; ++iq, ++q) {
      const double xi = qp[iq], eta = qp[jq];
      for (int a = 0; a < 4; ++a) shape[q][a] = shape_ref(a, xi, eta);
      // gradients: dN/dx = dN/dxi * 2/hx, dN/dy = dN/deta * 2/hy
      double dx[4], dy[4];
      for (int a = 0; a < 4; ++a) {
        const double sx = (a == 1 || a == 3) ? 1.0 : -1.0;
        const double sy = (a >= 2) ? 1.0 : -1.0;
        const double nx = (a == 1 || a == 3) ? (1.0 + xi) : (1.0 - xi);
        const double ny = (a >= 2) ? (1.0 + eta) : (1.0 - eta);
        dx[a] = 0.25 * sx * ny * 2.0 / hx;
        dy[a] = 0.25 * sy * nx * 2.0 / hy;
      }
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) ke(a, b) += jac * (dx[a] * dx[b] + dy[a] * dy[b]);
      }
      qx1[q] = 0.5 * (1.0 + xi) * hx;
      qx2[q] = 0.5 * (1.0 + eta) * hy;
    }
  }

  // Load vector: forcing * sin(2 pi x1) sin(2 pi x2), 2x2 Gauss per element.
  load.setZero(m.num_free_dofs());
  constexpr double two_pi = 6.283185307179586476925286766559;
  for (int k = 0; k < m.num_free_nodes(); ++k) {
    const int gi = m.free_node_gi(k), gj = m.free_node_gj(k);
    double acc = 0.0;
    for (int ej = gj - 1; ej <= gj; ++ej) {
      for (int ei = gi - 1; ei <= gi; ++ei) {
        const int a = (gi - ei) + 2 * (gj - ej);
        const double ex = m.node_x1(ei), ey = m.node_x2(ej);
        for (int qq = 0; qq < 4; ++qq) {
          const double fx = forcing * std::sin(two_pi * (ex + qx1[qq])) *
                            std::sin(two_pi * (ey + qx2[qq]));
          acc += qweight * shape[qq][a] * fx;
        }
      }
    }
    load[k] = acc;
  }
}

}  // namespace detail

FomProblem FomProblem::heat(const StructuredMesh& mesh, const ParamDomain& dom,
                            const HeatConstants& c) {
  FomProblem p;
  p.kind_ = FomKind::HeatFem;
  p.mesh_ = mesh;
  p.mesh_.dofs_per_node = 1;
  p.domain_ = dom;
  p.heat_ = c;
  if (!p.mesh_.valid()) throw ConfigError("heat mesh requires nx, ny >= 2");
  detail::heat_precompute(p.mesh_, c.forcing, p.ke_, p.shape_, p.qweight_, p.load_);
  return p;
}

double heat_residual_row(const FomProblem& p, const Param& mu, int row,
                         const Eigen::VectorXd& x) {
  return HeatKernel(p, mu).residual_row(row, x);
}

void heat_jacobian_row(const FomProblem& p, const Param& mu, int row, const Eigen::VectorXd& x,
                       JacobianRows& out) {
  HeatKernel(p, mu).jacobian_row(row, x, out);
}

std::vector<int> heat_stencil(const FomProblem& p, int row) {
  return HeatKernel(p, {1.0, 1.0}).stencil(row);
}

}  // namespace ddrom
