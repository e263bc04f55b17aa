#include <cmath>

#include "ddrom/errors.hpp"
#include "ddrom/fom.hpp"

namespace ddrom {

// Steady 2D Burgers, three-point centered differences on a uniform grid,
// two velocity components interleaved per node: dof = 2*node + comp.
// Dirichlet data on the box boundary comes from the closed-form solution.

std::array<double, 2> burgers_exact(double x1, double x2, const Param& mu,
                                    const BurgersConstants& c) {
  const double a1 = mu[0], lam = mu[1];
  const double a2 = a1;  // tied, Table of constants
  const double e_pos = std::exp(lam * (x1 - c.x1_0));
  const double e_neg = std::exp(-lam * (x1 - c.x1_0));
  const double cos_ly = std::cos(lam * x2);
  const double sin_ly = std::sin(lam * x2);
  const double phi = a1 + a2 * x1 + c.a3 * x2 + c.a4 * x1 * x2 + c.a5 * (e_pos + e_neg) * cos_ly;
  if (phi == 0.0) throw SingularDenominator("scalar potential vanishes at evaluation point");
  // u = -2 nu grad(phi) / phi
  const double dphi_dx1 = a2 + c.a4 * x2 + c.a5 * lam * (e_pos - e_neg) * cos_ly;
  const double dphi_dx2 = c.a3 + c.a4 * x1 - c.a5 * lam * (e_pos + e_neg) * sin_ly;
  return {-2.0 * c.nu * dphi_dx1 / phi, -2.0 * c.nu * dphi_dx2 / phi};
}

struct BurgersKernel {
  const FomProblem& p;
  const StructuredMesh& m;
  Param mu;
  double hx, hy, nu;

  BurgersKernel(const FomProblem& problem, const Param& mu_in)
      : p(problem), m(problem.mesh()), mu(mu_in), hx(m.hx()), hy(m.hy()),
        nu(problem.burgers_constants().nu) {}

  double node_value(const Eigen::VectorXd& x, int gi, int gj, int comp) const {
    if (m.is_boundary_node(gi, gj)) {
      return burgers_exact(m.node_x1(gi), m.node_x2(gj), mu, p.burgers_constants())[comp];
    }
    return x[2 * m.free_node(gi, gj) + comp];
  }

  double residual_row(int row, const Eigen::VectorXd& x) const {
    const int node = row / 2, c = row % 2;
    const int gi = m.free_node_gi(node), gj = m.free_node_gj(node);
    const double u1 = node_value(x, gi, gj, 0);
    const double u2 = node_value(x, gi, gj, 1);
    const double uP = (c == 0) ? u1 : u2;
    const double uE = node_value(x, gi + 1, gj, c);
    const double uW = node_value(x, gi - 1, gj, c);
    const double uN = node_value(x, gi, gj + 1, c);
    const double uS = node_value(x, gi, gj - 1, c);
    const double conv = u1 * (uE - uW) / (2.0 * hx) + u2 * (uN - uS) / (2.0 * hy);
    const double diff = nu * ((uE - 2.0 * uP + uW) / (hx * hx) + (uN - 2.0 * uP + uS) / (hy * hy));
    return conv - diff;
  }

  void jacobian_row(int row, const Eigen::VectorXd& x, JacobianRows& out) const {
    const int node = row / 2, c = row % 2;
    const int gi = m.free_node_gi(node), gj = m.free_node_gj(node);
    const double u1 = node_value(x, gi, gj, 0);
    const double u2 = node_value(x, gi, gj, 1);
    const double uE = node_value(x, gi + 1, gj, c);
    const double uW = node_value(x, gi - 1, gj, c);
    const double uN = node_value(x, gi, gj + 1, c);
    const double uS = node_value(x, gi, gj - 1, c);

    const int center = m.free_node(gi, gj);
    // d/d(uc at P): advective self term plus diffusion diagonal
    double dP = 2.0 * nu * (1.0 / (hx * hx) + 1.0 / (hy * hy));
    if (c == 0) dP += (uE - uW) / (2.0 * hx);
    else dP += (uN - uS) / (2.0 * hy);
    // d/d(other component at P)
    const double dO = (c == 0) ? (uN - uS) / (2.0 * hy) : (uE - uW) / (2.0 * hx);

    // Emit in ascending global column order: S, W, P(c=0), P(c=1), E, N.
    if (!m.is_boundary_node(gi, gj - 1)) {
      out.cols.push_back(2 * m.free_node(gi, gj - 1) + c);
      out.vals.push_back(-u2 / (2.0 * hy) - nu / (hy * hy));
    }
    if (!m.is_boundary_node(gi - 1, gj)) {
      out.cols.push_back(2 * m.free_node(gi - 1, gj) + c);
      out.vals.push_back(-u1 / (2.0 * hx) - nu / (hx * hx));
    }
    if (c == 0) {
      out.cols.push_back(2 * center);
      out.vals.push_back(dP);
      out.cols.push_back(2 * center + 1);
      out.vals.push_back(dO);
    } else {
      out.cols.push_back(2 * center);
      out.vals.push_back(dO);
      out.cols.push_back(2 * center + 1);
      out.vals.push_back(dP);
    }
    if (!m.is_boundary_node(gi + 1, gj)) {
      out.cols.push_back(2 * m.free_node(gi + 1, gj) + c);
      out.vals.push_back(u1 / (2.0 * hx) - nu / (hx * hx));
    }
    if (!m.is_boundary_node(gi, gj + 1)) {
      out.cols.push_back(2 * m.free_node(gi, gj + 1) + c);
      out.vals.push_back(u2 / (2.0 * hy) - nu / (hy * hy));
    }
    out.offsets.push_back(static_cast<int>(out.cols.size()));
  }

  std::vector<int> stencil(int row) const {
    const int node = row / 2, c = row % 2;
    const int gi = m.free_node_gi(node), gj = m.free_node_gj(node);
    std::vector<int> cols;
    const int center = m.free_node(gi, gj);
    if (!m.is_boundary_node(gi, gj - 1)) cols.push_back(2 * m.free_node(gi, gj - 1) + c);
    if (!m.is_boundary_node(gi - 1, gj)) cols.push_back(2 * m.free_node(gi - 1, gj) + c);
    cols.push_back(2 * center);
    cols.push_back(2 * center + 1);
    if (!m.is_boundary_node(gi + 1, gj)) cols.push_back(2 * m.free_node(gi + 1, gj) + c);
    if (!m.is_boundary_node(gi, gj + 1)) cols.push_back(2 * m.free_node(gi, gj + 1) + c);
    return cols;
  }
};

FomProblem FomProblem::burgers(const StructuredMesh& mesh, const ParamDomain& dom,
                               const BurgersConstants& c) {
  FomProblem p;
  p.kind_ = FomKind::BurgersFd;
  p.mesh_ = mesh;
  p.mesh_.dofs_per_node = 2;
  p.domain_ = dom;
  p.burgers_ = c;
  if (!p.mesh_.valid()) throw ConfigError("burgers mesh requires nx, ny >= 2");
  return p;
}

double burgers_residual_row(const FomProblem& p, const Param& mu, int row,
                            const Eigen::VectorXd& x) {
  return BurgersKernel(p, mu).residual_row(row, x);
}

void burgers_jacobian_row(const FomProblem& p, const Param& mu, int row,
                          const Eigen::VectorXd& x, JacobianRows& out) {
  BurgersKernel(p, mu).jacobian_row(row, x, out);
}

std::vector<int> burgers_stencil(const FomProblem& p, int row) {
  return BurgersKernel(p, {1.0, 1.0}).stencil(row);
}

}  // namespace ddrom
