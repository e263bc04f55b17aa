#include <Eigen/SparseLU>
#include <cmath>

#include "ddrom/errors.hpp"
#include "ddrom/fom.hpp"

namespace ddrom {

double heat_residual_row(const FomProblem&, const Param&, int, const Eigen::VectorXd&);
void heat_jacobian_row(const FomProblem&, const Param&, int, const Eigen::VectorXd&,
                       JacobianRows&);
std::vector<int> heat_stencil(const FomProblem&, int);
double burgers_residual_row(const FomProblem&, const Param&, int, const Eigen::VectorXd&);
void burgers_jacobian_row(const FomProblem&, const Param&, int, const Eigen::VectorXd&,
                          JacobianRows&);
std::vector<int> burgers_stencil(const FomProblem&, int);

void FomProblem::validate(const Eigen::VectorXd& x, const Param& mu) const {
  if (x.size() != size()) throw Error("state length does not match problem size");
  if (!x.allFinite()) throw NonFiniteState("state vector contains non-finite entries");
  if (!domain_.contains(mu)) throw ParameterOutOfDomain("parameter outside configured domain");
}

Eigen::VectorXd FomProblem::residual(const Eigen::VectorXd& x, const Param& mu) const {
  validate(x, mu);
  Eigen::VectorXd r(size());
  if (kind_ == FomKind::HeatFem) {
    for (int k = 0; k < size(); ++k) r[k] = heat_residual_row(*this, mu, k, x);
  } else {
    for (int k = 0; k < size(); ++k) r[k] = burgers_residual_row(*this, mu, k, x);
  }
  return r;
}

void FomProblem::residual_rows(std::span<const int> rows, const Eigen::VectorXd& x,
                               const Param& mu, Eigen::VectorXd& out) const {
  out.resize(static_cast<Eigen::Index>(rows.size()));
  if (kind_ == FomKind::HeatFem) {
    for (size_t i = 0; i < rows.size(); ++i) out[i] = heat_residual_row(*this, mu, rows[i], x);
  } else {
    for (size_t i = 0; i < rows.size(); ++i) out[i] = burgers_residual_row(*this, mu, rows[i], x);
  }
}

void FomProblem::jacobian_rows(std::span<const int> rows, const Eigen::VectorXd& x,
                               const Param& mu, JacobianRows& out) const {
  out.clear();
  if (kind_ == FomKind::HeatFem) {
    for (int r : rows) heat_jacobian_row(*this, mu, r, x, out);
  } else {
    for (int r : rows) burgers_jacobian_row(*this, mu, r, x, out);
  }
}

Eigen::SparseMatrix<double> FomProblem::jacobian(const Eigen::VectorXd& x,
                                                 const Param& mu) const {
  validate(x, mu);
  std::vector<int> all(size());
  for (int k = 0; k < size(); ++k) all[k] = k;
  JacobianRows rows;
  jacobian_rows(all, x, mu, rows);

  Eigen::SparseMatrix<double> J(size(), size());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(rows.cols.size());
  for (int r = 0; r < rows.num_rows(); ++r) {
    for (int k = rows.offsets[r]; k < rows.offsets[r + 1]; ++k) {
      trips.emplace_back(r, rows.cols[k], rows.vals[k]);
    }
  }
  J.setFromTriplets(trips.begin(), trips.end());
  return J;
}

std::vector<int> FomProblem::stencil(int row) const {
  return kind_ == FomKind::HeatFem ? heat_stencil(*this, row) : burgers_stencil(*this, row);
}

double FomProblem::residual_entry_flops() const {
  // Rough per-row work: heat visits 4 elements with a 2x2 rule, Burgers is a
  // five-point cross with two components at the center.
  return kind_ == FomKind::HeatFem ? 4.0 * (4.0 * 10.0 + 8.0) : 20.0;
}

double FomProblem::jacobian_row_flops() const {
  return kind_ == FomKind::HeatFem ? 4.0 * (16.0 * 4.0 + 16.0) : 30.0;
}

FomSolution newton_solve(const FomProblem& problem, const Param& mu,
                         const Eigen::VectorXd& x0, const NewtonOptions& opts) {
  if (opts.tol <= 0.0) throw ConfigError("newton tolerance must be positive");
  FomSolution sol;
  sol.mu = mu;
  sol.x = x0.size() == 0 ? Eigen::VectorXd::Zero(problem.size()) : x0;

  Eigen::VectorXd r = problem.residual(sol.x, mu);
  const double r0 = std::max(1.0, r.norm());
  sol.residual_history.push_back(r.norm());

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  for (int it = 0; it < opts.max_iters; ++it) {
    if (r.norm() <= opts.tol * r0) {
      sol.newton_iters = it;
      return sol;
    }
    if (opts.keep_residual_iterates) sol.residual_iterates.push_back(r);

    Eigen::SparseMatrix<double> J = problem.jacobian(sol.x, mu);
    lu.compute(J);
    if (lu.info() != Eigen::Success) {
      throw SingularJacobian("sparse factorization of the Jacobian failed");
    }
    Eigen::VectorXd dx = lu.solve(-r);
    if (!dx.allFinite()) throw SingularJacobian("Jacobian solve produced non-finite step");

    const double rn = r.norm();
    double alpha = 1.0;
    Eigen::VectorXd x_trial, r_trial;
    while (true) {
      x_trial = sol.x + alpha * dx;
      r_trial = problem.residual(x_trial, mu);
      if (r_trial.norm() < rn || alpha <= opts.min_step) break;
      alpha *= 0.5;
    }
    sol.x = x_trial;
    r = r_trial;
    sol.residual_history.push_back(r.norm());
  }
  if (r.norm() <= opts.tol * r0) {
    sol.newton_iters = opts.max_iters;
    return sol;
  }
  throw NonConvergence("newton iteration budget exhausted", sol.residual_history);
}

}  // namespace ddrom
