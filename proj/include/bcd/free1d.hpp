#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "bcd/greens.hpp"
#include "bcd/parallel.hpp"
#include "bcd/resonance.hpp"
#include "bcd/types.hpp"

namespace bcd::free1d {

struct Grid1D {
  double length = 10.0;
  double step = 0.05;

  static Grid1D make(double length, double step) {
    if (!(step > 0)) throw std::invalid_argument("grid1d: step must be > 0");
    double ratio = length / step;
    if (std::abs(ratio - std::round(ratio)) > 1e-12)
      throw std::invalid_argument("grid1d: L/h must be integral");
    return {length, step};
  }
  int nodes() const { return static_cast<int>(std::round(length / step)) + 1; }
  double node(int j) const { return -0.5 * length + j * step; }
};

// principal branch: arg(sqrt z) in (-pi/2, pi/2); Im sqrt(z) > 0 away from
// the positive real axis, so one formula continues through [0,inf) into the
// lower plane (where the kernel grows with |x - x'|)
inline cplx branch_sqrt(cplx z) {
  if (z == cplx(0, 0)) throw BranchPoint("helmholtz kernel: branch point at z = 0");
  return std::sqrt(z);
}

// R0(x,x';z) = exp(i sqrt(z) |x-x'|) / (2 i sqrt(z))
inline cplx helmholtz_kernel(cplx z, double x, double xp) {
  cplx s = branch_sqrt(z);
  return std::exp(cplx(0, 1) * s * std::abs(x - xp)) / (cplx(0, 2) * s);
}

// dK/dz = K (i r - 1/s) / (2 s), r = |x-x'|, s = sqrt(z)
inline cplx helmholtz_kernel_dz(cplx z, double x, double xp) {
  cplx s = branch_sqrt(z);
  double r = std::abs(x - xp);
  cplx k = std::exp(cplx(0, 1) * s * r) / (cplx(0, 2) * s);
  return k * (cplx(0, r) - 1.0 / s) / (2.0 * s);
}

// potential with an analytic extension (needed for complex scaling)
struct Potential {
  std::string name;
  std::function<double(double)> real;
  std::function<cplx(cplx)> analytic;
};

inline Potential double_well() {
  auto f = [](cplx x) { return 2.0 * (std::exp(-(x / 2.0) * (x / 2.0)) - std::exp(-x * x)); };
  return {"double-well", [f](double x) { return f(cplx(x, 0)).real(); }, f};
}

inline Potential potential_by_name(const std::string& name) {
  if (name == "double-well") return double_well();
  throw ConfigError("free1d: unknown potential '" + name + "'");
}

// A(z)_{jk} = delta_{jk} - V(x_j) K(z, x_j, x_k) w_k with trapezoid weights
// (endpoints halved); deriv gets dA/dz
inline Eigen::MatrixXcd assemble_free_A(const Grid1D& grid, const Potential& pot, cplx z,
                                        Eigen::MatrixXcd* deriv = nullptr) {
  const int n = grid.nodes();
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Identity(n, n);
  if (deriv) deriv->setZero(n, n);
  cplx s = branch_sqrt(z);
  for (int j = 0; j < n; ++j) {
    double vj = pot.real(grid.node(j));
    for (int k = 0; k < n; ++k) {
      double w = (k == 0 || k == n - 1) ? 0.5 * grid.step : grid.step;
      double r = std::abs(grid.node(j) - grid.node(k));
      cplx kern = std::exp(cplx(0, 1) * s * r) / (cplx(0, 2) * s);
      a(j, k) -= vj * kern * w;
      if (deriv) (*deriv)(j, k) = -vj * w * kern * (cplx(0, r) - 1.0 / s) / (2.0 * s);
    }
  }
  return a;
}

// Eigenvalues of H_theta = -exp(-2 i theta) Laplacian + V(x exp(i theta)) on
// the interior nodes (Dirichlet), 3-point stencil. The continuous spectrum
// rotates to the ray arg = -2 theta, uncovering resonances above it.
inline std::vector<cplx> complex_scaled_spectrum(const Grid1D& grid, const Potential& pot,
                                                 double theta) {
  const int n = grid.nodes() - 2;
  const cplx rot = std::exp(cplx(0, -2.0 * theta));
  const cplx phase = std::exp(cplx(0, theta));
  const double h2 = grid.step * grid.step;
  Eigen::MatrixXcd hmat = Eigen::MatrixXcd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    hmat(j, j) = rot * 2.0 / h2 + pot.analytic(phase * grid.node(j + 1));
    if (j + 1 < n) {
      hmat(j, j + 1) = -rot / h2;
      hmat(j + 1, j) = -rot / h2;
    }
  }
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(hmat, false);
  std::vector<cplx> ev(es.eigenvalues().data(), es.eigenvalues().data() + n);
  return ev;
}

inline cplx closest_eigenvalue(const std::vector<cplx>& ev, cplx target) {
  cplx best = ev.at(0);
  for (cplx e : ev)
    if (std::abs(e - target) < std::abs(best - target)) best = e;
  return best;
}

struct FreeResonance {
  cplx z0;
  Eigen::VectorXcd phi;
  double sigma_min = 0;
  int newton_iters = 0;
};

// bordered Newton as in refine_resonance, with the analytic dA/dz
inline FreeResonance refine_free_resonance(const Grid1D& grid, const Potential& pot, cplx z_init,
                                           const NewtonOptions& opt = {}) {
  const int n = grid.nodes();
  Eigen::MatrixXcd a = assemble_free_A(grid, pot, z_init);
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeFullV);
  Eigen::VectorXcd x = svd.matrixV().col(n - 1);
  const Eigen::VectorXcd c = x;
  cplx z = z_init;

  FreeResonance res;
  Eigen::MatrixXcd ap(n, n);
  Eigen::MatrixXcd jac(n + 1, n + 1);
  Eigen::VectorXcd rhs(n + 1);
  double last_step = 1e300;
  bool converged = false;
  for (int it = 0; it < opt.max_iter; ++it) {
    a = assemble_free_A(grid, pot, z, &ap);
    if (last_step < opt.tol_step &&
        (a * x).norm() < opt.tol_residual * std::max(1.0, x.norm())) {
      converged = true;
      break;
    }
    rhs.head(n) = -(a * x);
    rhs(n) = -(c.dot(x) - 1.0);
    jac.topLeftCorner(n, n) = a;
    jac.col(n).head(n) = ap * x;
    jac.row(n).head(n) = c.adjoint();
    jac(n, n) = 0;
    Eigen::VectorXcd step = jac.partialPivLu().solve(rhs);
    x += step.head(n);
    z += step(n);
    res.newton_iters = it + 1;
    last_step = std::abs(step(n));
    if (std::abs(z - z_init) > opt.trust_radius)
      throw DivergedOutsideWindow("free1d refine: left the trust region around the seed");
  }
  if (!converged) throw NoConvergence("free1d refine: Newton did not converge");

  res.z0 = z;
  res.phi = x / x.norm();
  res.sigma_min = smallest_singular_value(assemble_free_A(grid, pot, z));
  return res;
}

// sigma_min(A(z)) map over a z-window (log10), masked at the branch point
inline SigmaScan free_scan(const Grid1D& grid, const Potential& pot,
                           const ComplexEnergyGrid& zgrid) {
  zgrid.check();
  SigmaScan scan;
  scan.grid = zgrid;
  scan.log10_sigma_min.assign(zgrid.size(), 0.0);
  scan.masked.assign(zgrid.size(), 0);
  parallel_chunks(zgrid.size(), 2, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t f = begin; f < end; ++f) {
      int i = static_cast<int>(f) / zgrid.nim, j = static_cast<int>(f) % zgrid.nim;
      try {
        double s = smallest_singular_value(assemble_free_A(grid, pot, zgrid.node(i, j)));
        scan.log10_sigma_min[f] = std::log10(std::max(s, 1e-300));
      } catch (const BranchPoint&) {
        scan.masked[f] = 1;
      }
    }
  });
  return scan;
}

// local minima of a sigma_min scan, deepest first
inline std::vector<cplx> scan_minima(const SigmaScan& scan, double max_log10 = -1.0) {
  std::vector<std::pair<double, cplx>> found;
  const auto& g = scan.grid;
  for (int i = 0; i < g.nre; ++i)
    for (int j = 0; j < g.nim; ++j) {
      std::size_t f = g.flat(i, j);
      if (scan.masked[f] || scan.log10_sigma_min[f] > max_log10) continue;
      bool minimal = true;
      for (int di = -1; di <= 1 && minimal; ++di)
        for (int dj = -1; dj <= 1 && minimal; ++dj) {
          int ii = i + di, jj = j + dj;
          if ((di == 0 && dj == 0) || ii < 0 || jj < 0 || ii >= g.nre || jj >= g.nim) continue;
          std::size_t ff = g.flat(ii, jj);
          if (!scan.masked[ff] && scan.log10_sigma_min[ff] < scan.log10_sigma_min[f])
            minimal = false;
        }
      if (minimal) found.push_back({scan.log10_sigma_min[f], g.node(i, j)});
    }
  std::sort(found.begin(), found.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<cplx> out;
  for (const auto& [v, z] : found) out.push_back(z);
  return out;
}

// phi = kernel of A(z0); psi(x_j) = sum_k K(z0,x_j,x_k) phi(x_k) w_k.
// phi rides the support of V, psi is delocalized (and grows for Im z0 < 0).
inline std::pair<Eigen::VectorXcd, Eigen::VectorXcd> resonant_pair_free(const Grid1D& grid,
                                                                        const Potential& pot,
                                                                        cplx z0) {
  const int n = grid.nodes();
  Eigen::MatrixXcd a = assemble_free_A(grid, pot, z0);
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeFullV);
  Eigen::VectorXcd phi = svd.matrixV().col(n - 1);
  int imax = 0;
  phi.cwiseAbs().maxCoeff(&imax);
  phi /= phi(imax);  // max-modulus normalization for plotting
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(n);
  for (int j = 0; j < n; ++j) {
    cplx acc = 0;
    for (int k = 0; k < n; ++k) {
      double w = (k == 0 || k == n - 1) ? 0.5 * grid.step : grid.step;
      acc += helmholtz_kernel(z0, grid.node(j), grid.node(k)) * phi(k) * w;
    }
    psi(j) = acc;
  }
  return {phi, psi};
}

}  // namespace bcd::free1d
