#pragma once

#include <Eigen/Dense>
#include <random>

#include "ddrom/fom.hpp"

namespace ddrom::test {

inline FomProblem small_heat(int nx = 8, int ny = 8, double lo = 0.0) {
  StructuredMesh mesh;
  mesh.nx = nx;
  mesh.ny = ny;
  mesh.domain_box = {0.0, 1.0, 0.0, 1.0};
  ParamDomain dom;
  dom.lo = {lo, std::max(lo, 0.01)};
  dom.hi = {10.0, 10.0};
  return FomProblem::heat(mesh, dom);
}

inline FomProblem coarse_heat() { return small_heat(40, 40, 0.01); }

inline FomProblem small_burgers(int nx = 20, int ny = 6) {
  StructuredMesh mesh;
  mesh.nx = nx;
  mesh.ny = ny;
  mesh.domain_box = {-1.0, 1.0, 0.0, 0.05};
  ParamDomain dom;
  dom.lo = {1.0, 5.0};
  dom.hi = {10000.0, 25.0};
  return FomProblem::burgers(mesh, dom);
}

inline Eigen::VectorXd random_state(int n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = dist(rng);
  return x;
}

/// Central finite-difference Jacobian, the independent derivative oracle.
inline Eigen::MatrixXd fd_jacobian(const FomProblem& p, const Eigen::VectorXd& x,
                                   const Param& mu, double step = 1e-6) {
  Eigen::MatrixXd J(p.size(), p.size());
  Eigen::VectorXd xp = x, xm = x;
  for (int c = 0; c < p.size(); ++c) {
    xp[c] += step;
    xm[c] -= step;
    J.col(c) = (p.residual(xp, mu) - p.residual(xm, mu)) / (2.0 * step);
    xp[c] = x[c];
    xm[c] = x[c];
  }
  return J;
}

}  // namespace ddrom::test
