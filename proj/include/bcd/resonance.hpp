#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <span>
#include <vector>

#include "bcd/defect.hpp"
#include "bcd/greens.hpp"
#include "bcd/parallel.hpp"
#include "bcd/types.hpp"

namespace bcd {

inline Eigen::VectorXd singular_values(const Eigen::MatrixXcd& a) {
  if (a.rows() <= 16) return Eigen::JacobiSVD<Eigen::MatrixXcd>(a).singularValues();
  return Eigen::BDCSVD<Eigen::MatrixXcd>(a).singularValues();
}

inline double smallest_singular_value(const Eigen::MatrixXcd& a) {
  Eigen::VectorXd s = singular_values(a);
  return s(s.size() - 1);
}

namespace detail {

// distinct lattice offsets between support sites, in a fixed order
inline std::vector<Eigen::VectorXi> support_deltas(const std::vector<LatticeIndex>& sup) {
  std::vector<Eigen::VectorXi> deltas;
  auto seen = [&](const Eigen::VectorXi& d) {
    for (const auto& x : deltas)
      if (x == d) return true;
    return false;
  };
  for (const auto& a : sup)
    for (const auto& b : sup) {
      Eigen::VectorXi d = a.cell - b.cell;
      if (!seen(d)) deltas.push_back(d);
    }
  return deltas;
}

}  // namespace detail

// Unperturbed resolvent of the extended system restricted to the defect
// support: crystal blocks from the deformed quadrature, one decoupled
// diagonal entry 1/(z - E_d) per extra site, zero cross blocks. Pass deriv to
// also get the z-derivative (crystal part from -(z-H)^-2, extra sites from
// -1/(z-E_d)^2).
inline Eigen::MatrixXcd defect_resolvent_block(const GreenEvaluator& ev, const DefectOperator& defect,
                                               cplx z, Eigen::MatrixXcd* deriv = nullptr,
                                               int workers = 0) {
  const std::vector<LatticeIndex> sup = defect.lattice_support();
  const int nl = static_cast<int>(sup.size());
  const int n = nl + static_cast<int>(defect.extra_sites.size());
  Eigen::MatrixXcd r0 = Eigen::MatrixXcd::Zero(n, n);
  if (deriv) *deriv = Eigen::MatrixXcd::Zero(n, n);

  if (nl > 0) {
    std::vector<Eigen::VectorXi> deltas = detail::support_deltas(sup);
    std::vector<Eigen::MatrixXcd> blocks, dblocks;
    ev.blocks_multi(z, deltas, &blocks, deriv ? &dblocks : nullptr, workers);
    auto find = [&](const Eigen::VectorXi& d) {
      for (std::size_t i = 0; i < deltas.size(); ++i)
        if (deltas[i] == d) return i;
      return deltas.size();
    };
    for (int a = 0; a < nl; ++a)
      for (int b = 0; b < nl; ++b) {
        std::size_t id = find(sup[a].cell - sup[b].cell);
        r0(a, b) = blocks[id](sup[a].orb, sup[b].orb);
        if (deriv) (*deriv)(a, b) = dblocks[id](sup[a].orb, sup[b].orb);
      }
  }
  for (int x = 0; x < static_cast<int>(defect.extra_sites.size()); ++x) {
    cplx dz = z - defect.extra_sites[x].energy;
    r0(nl + x, nl + x) = 1.0 / dz;
    if (deriv) (*deriv)(nl + x, nl + x) = -1.0 / (dz * dz);
  }
  return r0;
}

// A(z) = 1 - V R0(z) on the support; resonances are its nontrivial kernels.
inline Eigen::MatrixXcd assemble_A(const GreenEvaluator& ev, const DefectOperator& defect, cplx z,
                                   Eigen::MatrixXcd* deriv = nullptr, int workers = 0) {
  Eigen::MatrixXcd dr0;
  Eigen::MatrixXcd r0 = defect_resolvent_block(ev, defect, z, deriv ? &dr0 : nullptr, workers);
  Eigen::MatrixXcd v = defect.v_matrix();
  if (deriv) *deriv = -v * dr0;
  return Eigen::MatrixXcd::Identity(r0.rows(), r0.cols()) - v * r0;
}

struct SigmaScan {
  ComplexEnergyGrid grid;
  std::vector<double> log10_sigma_min;  // grid.flat layout
  std::vector<uint8_t> masked;
};

// smallest singular value of A(z) over a z-window, in log10 for plotting
inline SigmaScan svd_scan(const GreenEvaluator& ev, const DefectOperator& defect,
                          const ComplexEnergyGrid& grid) {
  grid.check();
  SigmaScan scan;
  scan.grid = grid;
  scan.log10_sigma_min.assign(grid.size(), 0.0);
  scan.masked.assign(grid.size(), 0);
  parallel_chunks(grid.size(), 4, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t f = begin; f < end; ++f) {
      int i = static_cast<int>(f) / grid.nim, j = static_cast<int>(f) % grid.nim;
      try {
        double s = smallest_singular_value(assemble_A(ev, defect, grid.node(i, j), nullptr, 1));
        scan.log10_sigma_min[f] = std::log10(std::max(s, 1e-300));
      } catch (const SingularKPoint&) {
        scan.masked[f] = 1;
      }
    }
  });
  return scan;
}

struct NewtonOptions {
  int max_iter = 50;
  double trust_radius = 0.5;      // max |z - z_init| before giving up
  double tol_residual = 1e-10;    // on ||A(z) x||
  double tol_step = 1e-12;        // on |dz|
};

struct ResonanceResult {
  cplx z0;
  Eigen::VectorXcd phi;          // resonance source on the support
  double sigma_min = 0;          // smallest singular value of A(z0)
  int newton_iters = 0;
  cplx residue_scale = 1.0;      // scale applied by normalize_residue
  Eigen::VectorXcd psi_support;  // R0(z0) phi on the support (after normalization)
  cplx residue_condition = 0;    // <psi_bar| V R0'(z0) |phi> after normalization
  bool normalized = false;
  std::vector<Warning> warnings;
  std::vector<double> step_history;  // |dz| per Newton iteration
};

// Newton on the bordered system F(x,z) = (A(z) x, c^H x - 1) with the
// normalization functional c frozen to the initial singular vector. The
// Jacobian [[A, A'x],[c^H, 0]] stays nonsingular at simple zeros.
inline ResonanceResult refine_resonance(const GreenEvaluator& ev, const DefectOperator& defect,
                                        cplx z_init, const NewtonOptions& opt = {}) {
  const int n = defect.support_size();
  if (n == 0) throw PatternMismatch("refine: defect has empty support");

  Eigen::MatrixXcd a = assemble_A(ev, defect, z_init);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeFullV);
  Eigen::VectorXcd x = svd.matrixV().col(n - 1);
  const Eigen::VectorXcd c = x;
  cplx z = z_init;

  ResonanceResult res;
  Eigen::MatrixXcd ap(n, n);
  Eigen::MatrixXcd jac(n + 1, n + 1);
  Eigen::VectorXcd rhs(n + 1);
  bool converged = false;
  for (int it = 0; it < opt.max_iter; ++it) {
    a = assemble_A(ev, defect, z, &ap);
    if (!res.step_history.empty() && res.step_history.back() < opt.tol_step &&
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
    res.step_history.push_back(std::abs(step(n)));
    if (std::abs(z - z_init) > opt.trust_radius)
      throw DivergedOutsideWindow("refine: left the trust region around the seed");
  }
  if (!converged) throw NoConvergence("refine: Newton did not converge");

  res.z0 = z;
  res.phi = x / x.norm();
  res.sigma_min = smallest_singular_value(assemble_A(ev, defect, z));
  if (z.imag() > 1e-8) res.warnings.push_back(Warning::PositiveImaginaryPart);
  return res;
}

// Rescale phi so the residue expansion R(z) ~ |psi><psi_bar| / (z - z0)
// holds: s^2 <psi_bar| V R0'(z0) |phi> = -1 with psi = R0(z0) phi and the
// bilinear (unconjugated) pairing. Sign fixed by making the largest entry of
// phi have nonnegative real part.
inline ResonanceResult normalize_residue(const GreenEvaluator& ev, const DefectOperator& defect,
                                         ResonanceResult res) {
  Eigen::MatrixXcd a = assemble_A(ev, defect, res.z0);
  Eigen::VectorXd sv = singular_values(a);
  if (sv.size() >= 2 && sv(sv.size() - 2) <= 1e-6)
    throw DegenerateResonance("normalize: resonance is not simple");

  Eigen::MatrixXcd dr0;
  Eigen::MatrixXcd r0 = defect_resolvent_block(ev, defect, res.z0, &dr0);
  Eigen::MatrixXcd v = defect.v_matrix();
  Eigen::VectorXcd psi = r0 * res.phi;
  // bilinear pairing: <psi_bar| X |phi> = psi^T X phi, no conjugation
  auto pairing = [&]() { return cplx((psi.transpose() * (v * (dr0 * res.phi)))(0, 0)); };
  cplx q = pairing();
  if (std::abs(q) < 1e-300) throw DegenerateResonance("normalize: vanishing residue pairing");
  cplx s = std::sqrt(-1.0 / q);
  res.phi *= s;
  psi *= s;

  int imax = 0;
  res.phi.cwiseAbs().maxCoeff(&imax);
  if (res.phi(imax).real() < 0) {
    res.phi = -res.phi;
    psi = -psi;
    s = -s;
  }
  res.psi_support = psi;
  res.residue_scale = s;
  res.residue_condition = pairing();
  res.normalized = true;
  return res;
}

// Second-order estimate of the adatom resonance: eps^2 R0(0,0;E_d) summed
// over the couplings, evaluated with the deformation retargeted at E = E_d.
// The imaginary part is the predicted width.
inline cplx fermi_golden_rule(const GreenEvaluator& ev, const DefectOperator& defect) {
  if (defect.extra_sites.size() != 1 || !defect.lattice_entries.empty())
    throw PatternMismatch("fermi golden rule: defect must be a single extra site");
  const DefectOperator::ExtraSite& site = defect.extra_sites[0];
  if (site.couplings.empty())
    throw PatternMismatch("fermi golden rule: extra site has no couplings");

  DeformationParams p = ev.field().params;
  p.energy = site.energy;
  GreenEvaluator at_ed(ev.model(), build_deformation(ev.model(), p, ev.grid_n()));

  cplx acc = 0;
  for (const auto& [ia, va] : site.couplings)
    for (const auto& [ib, vb] : site.couplings) {
      Eigen::MatrixXcd g = at_ed.block(cplx(site.energy, 0), ia.cell, ib.cell);
      acc += std::conj(va) * vb * g(ia.orb, ib.orb);
    }
  return acc;
}

struct StateSample {
  Eigen::VectorXi cell;
  int orb = 0;
  cplx psi;
};

struct StateSamples {
  std::vector<StateSample> lattice;
  std::vector<cplx> extra;  // one amplitude per extra site
};

// psi(R,i) = sum_support R0(R,R_s;z0)_{i,j} phi_s over the requested window,
// plus the extra-site amplitudes phi_e / (z0 - E_d).
inline StateSamples resonant_state_samples(const GreenEvaluator& ev, const DefectOperator& defect,
                                           const ResonanceResult& res,
                                           std::span<const Eigen::VectorXi> window) {
  const std::vector<LatticeIndex> sup = defect.lattice_support();
  const int nl = static_cast<int>(sup.size());
  const int m = ev.model().orbitals;

  std::vector<Eigen::VectorXi> deltas;
  auto find_or_add = [&](const Eigen::VectorXi& d) {
    for (std::size_t i = 0; i < deltas.size(); ++i)
      if (deltas[i] == d) return i;
    deltas.push_back(d);
    return deltas.size() - 1;
  };
  std::vector<std::vector<std::size_t>> idx(window.size());
  for (std::size_t w = 0; w < window.size(); ++w)
    for (int s = 0; s < nl; ++s) idx[w].push_back(find_or_add(window[w] - sup[s].cell));

  std::vector<Eigen::MatrixXcd> blocks;
  ev.blocks_multi(res.z0, deltas, &blocks, nullptr);

  StateSamples out;
  for (std::size_t w = 0; w < window.size(); ++w)
    for (int i = 0; i < m; ++i) {
      cplx amp = 0;
      for (int s = 0; s < nl; ++s) amp += blocks[idx[w][s]](i, sup[s].orb) * res.phi(s);
      out.lattice.push_back({window[w], i, amp});
    }
  for (int x = 0; x < static_cast<int>(defect.extra_sites.size()); ++x)
    out.extra.push_back(res.phi(nl + x) / (res.z0 - defect.extra_sites[x].energy));
  return out;
}

}  // namespace bcd
