#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "bcd/lattice.hpp"
#include "bcd/parallel.hpp"
#include "bcd/types.hpp"

namespace bcd {

enum class CutoffKind { Gaussian };

// chi(x): 1 at 0, -> 0 for large |x|
inline double cutoff_eval(CutoffKind kind, double x) {
  switch (kind) {
    case CutoffKind::Gaussian: return std::exp(-x * x);
  }
  return 0;
}

struct DeformationParams {
  double energy = 0;
  double alpha = 0;  // > 0 for a real deformation; 0 gives the trivial field
  double delta_e = 1;
  CutoffKind cutoff = CutoffKind::Gaussian;

  void check() const {
    if (!(alpha >= 0)) throw std::invalid_argument("deformation: alpha must be >= 0");
    if (!(delta_e > 0)) throw std::invalid_argument("deformation: delta_e must be > 0");
    if (!std::isfinite(energy)) throw std::invalid_argument("deformation: energy must be finite");
  }
};

// h(k) sampled on the N^d Monkhorst-Pack grid k_j = j/N (reduced coordinates,
// periodic wraparound), together with det(1 + i h'(k)). h itself is stored in
// reduced units, so the deformed point is kappa = k + i h(k) and all phases
// stay exp(2 pi i kappa . T).
struct DeformationField {
  DeformationParams params{};
  int dim = 1;
  int grid_n = 1;
  std::vector<double> samples;   // npoints * dim, [point][axis]
  std::vector<cplx> jacobians;   // npoints
  std::vector<Warning> warnings;

  std::size_t npoints() const {
    std::size_t n = 1;
    for (int a = 0; a < dim; ++a) n *= static_cast<std::size_t>(grid_n);
    return n;
  }
  // row-major flat index; axis 0 is the slowest
  int index_coord(std::size_t flat, int axis) const {
    std::size_t s = 1;
    for (int a = dim - 1; a > axis; --a) s *= static_cast<std::size_t>(grid_n);
    return static_cast<int>((flat / s) % static_cast<std::size_t>(grid_n));
  }
  double k_coord(std::size_t flat, int axis) const {
    return static_cast<double>(index_coord(flat, axis)) / grid_n;
  }
  Eigen::VectorXd k_point(std::size_t flat) const {
    Eigen::VectorXd k(dim);
    for (int a = 0; a < dim; ++a) k(a) = k_coord(flat, a);
    return k;
  }
  const double* h_at(std::size_t flat) const { return samples.data() + flat * dim; }
  Eigen::VectorXcd kappa_at(std::size_t flat) const {
    Eigen::VectorXcd kap(dim);
    for (int a = 0; a < dim; ++a) kap(a) = cplx(k_coord(flat, a), h_at(flat)[a]);
    return kap;
  }
  bool trivial() const {
    for (double v : samples)
      if (v != 0.0) return false;
    return true;
  }

  static DeformationField zero(int dim, int n) {
    DeformationField f;
    f.dim = dim;
    f.grid_n = n;
    f.samples.assign(f.npoints() * dim, 0.0);
    f.jacobians.assign(f.npoints(), cplx(1, 0));
    return f;
  }
};

namespace detail {

// Derivative of the trigonometric interpolant along one grid axis. Exact for
// band-limited samples; decays with the smoothness of h otherwise, which keeps
// the change-of-variables identity at quadrature accuracy.
inline void spectral_derivative_axis(const DeformationField& f, const std::vector<double>& in,
                                     int axis, std::vector<double>& out) {
  const int n = f.grid_n;
  const std::size_t np = f.npoints();
  out.assign(np, 0.0);
  std::size_t stride = 1;
  for (int a = f.dim - 1; a > axis; --a) stride *= static_cast<std::size_t>(n);
  const std::size_t nlines = np / static_cast<std::size_t>(n);

  std::vector<cplx> coef(n), line(n);
  for (std::size_t l = 0; l < nlines; ++l) {
    // base flat index of this line: distribute l over the non-axis dims
    std::size_t lo = l % stride;
    std::size_t hi = l / stride;
    std::size_t base = hi * stride * static_cast<std::size_t>(n) + lo;
    for (int j = 0; j < n; ++j) line[j] = in[base + static_cast<std::size_t>(j) * stride];
    for (int m = 0; m < n; ++m) {
      cplx acc = 0;
      for (int j = 0; j < n; ++j)
        acc += line[j] * std::exp(cplx(0, -two_pi * m * j / n));
      coef[m] = acc / static_cast<double>(n);
    }
    for (int j = 0; j < n; ++j) {
      cplx acc = 0;
      for (int m = 0; m < n; ++m) {
        int mm = m <= (n - 1) / 2 ? m : m - n;
        if (2 * m == n) mm = 0;  // Nyquist mode carries no odd derivative
        acc += cplx(0, two_pi * mm) * coef[m] * std::exp(cplx(0, two_pi * m * j / n));
      }
      out[base + static_cast<std::size_t>(j) * stride] = std::real(acc);
    }
  }
}

}  // namespace detail

// det(1 + i h'(k)) from the sampled field, h' by spectral differentiation on
// the periodic grid. Appends DeformationTooStrong when any |det| < 1e-6.
inline void compute_jacobians(DeformationField& f) {
  const std::size_t np = f.npoints();
  const int d = f.dim;
  f.jacobians.assign(np, cplx(0, 0));
  // hprime[a][b] = d h_a / d k_b
  std::vector<std::vector<double>> hprime(static_cast<std::size_t>(d) * d);
  std::vector<double> comp(np);
  for (int a = 0; a < d; ++a) {
    for (std::size_t p = 0; p < np; ++p) comp[p] = f.samples[p * d + a];
    for (int b = 0; b < d; ++b)
      detail::spectral_derivative_axis(f, comp, b, hprime[static_cast<std::size_t>(a) * d + b]);
  }
  bool too_strong = false;
  Eigen::MatrixXcd j(d, d);
  for (std::size_t p = 0; p < np; ++p) {
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        j(a, b) = (a == b ? cplx(1, 0) : cplx(0, 0)) +
                  cplx(0, 1) * hprime[static_cast<std::size_t>(a) * d + b][p];
    cplx det = d == 1 ? j(0, 0) : j.determinant();
    f.jacobians[p] = det;
    if (std::abs(det) < 1e-6) too_strong = true;
  }
  if (too_strong) f.warnings.push_back(Warning::DeformationTooStrong);
}

inline cplx jacobian_det(const DeformationField& f, std::size_t flat) { return f.jacobians[flat]; }

// Sample an arbitrary periodic field h(k) (reduced in, reduced out); used by
// the invariance tests and available for custom deformations.
inline DeformationField field_from_function(
    int dim, int n, const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& h) {
  DeformationField f;
  f.dim = dim;
  f.grid_n = n;
  f.samples.assign(f.npoints() * dim, 0.0);
  for (std::size_t p = 0; p < f.npoints(); ++p) {
    Eigen::VectorXd v = h(f.k_point(p));
    for (int a = 0; a < dim; ++a) f.samples[p * dim + a] = v(a);
  }
  compute_jacobians(f);
  return f;
}

// h(k) = -alpha sum_n grad eps_nk chi((eps_nk - E)/dE), with the gradient and
// amplitude taken in Cartesian k units (the scale the parameter rules speak
// of) and the result stored in reduced units: h_red = A^T h_cart / (2 pi),
// i.e. h_red = -(alpha / 4 pi^2) G grad_red eps chi with G the direct-lattice
// Gram matrix.
inline DeformationField build_deformation(const TightBindingModel& model,
                                          const DeformationParams& params, int n,
                                          double gradient_floor = 1e-3) {
  params.check();
  if (n < 2) throw std::invalid_argument("deformation: grid size must be >= 2");
  DeformationField f;
  f.params = params;
  f.dim = model.dim;
  f.grid_n = n;
  const std::size_t np = f.npoints();
  f.samples.assign(np * model.dim, 0.0);

  const Eigen::MatrixXd gram = model.gram() / (4.0 * M_PI * M_PI);
  const Eigen::MatrixXd cart = model.lattice_vectors / two_pi;  // grad_cart = A grad_red / 2 pi
  std::vector<uint8_t> van_hove(np, 0);

  parallel_chunks(np, 256, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      BandData bd = band_eigens(model, f.k_point(p));
      Eigen::VectorXd h = Eigen::VectorXd::Zero(model.dim);
      for (int band = 0; band < model.orbitals; ++band) {
        double x = (bd.energies(band) - params.energy) / params.delta_e;
        double chi = cutoff_eval(params.cutoff, x);
        if (chi < 1e-300) continue;
        h -= params.alpha * chi * (gram * bd.gradients.col(band));
        if (std::abs(bd.energies(band) - params.energy) < params.delta_e) {
          double speed = (cart * bd.gradients.col(band)).norm();
          if (speed < gradient_floor || bd.degenerate) van_hove[p] = 1;
        }
      }
      for (int a = 0; a < model.dim; ++a) f.samples[p * model.dim + a] = h(a);
    }
  });

  for (std::size_t p = 0; p < np; ++p)
    if (van_hove[p] && params.alpha > 0) {
      f.warnings.push_back(Warning::VanHoveProximity);
      break;
    }
  compute_jacobians(f);
  return f;
}

// ---------------------------------------------------------------------------
// parameter rules of thumb

enum class RuleGrade { Pass, Warn, Fail };

inline const char* grade_name(RuleGrade g) {
  switch (g) {
    case RuleGrade::Pass: return "pass";
    case RuleGrade::Warn: return "warn";
    case RuleGrade::Fail: return "fail";
  }
  return "?";
}

struct ValidationReport {
  struct Rule {
    std::string name;
    double lhs = 0;    // the side that must be small
    double rhs = 0;    // the side that must dominate
    double ratio = 0;  // rhs / lhs
    RuleGrade grade = RuleGrade::Fail;
  };
  std::vector<Rule> rules;                // exactly the five rules, fixed order
  std::vector<double> van_hove_energies;  // detected critical energies near E

  bool all_pass() const {
    for (const auto& r : rules)
      if (r.grade != RuleGrade::Pass) return false;
    return true;
  }
  const Rule& rule(const std::string& name) const {
    for (const auto& r : rules)
      if (r.name == name) return r;
    throw std::out_of_range("no such rule: " + name);
  }
};

namespace detail {

// critical energies of the band structure: zero group velocity or band
// crossings, clustered. Sampled on its own sweep grid so small run N does not
// blind the detector.
inline std::vector<double> detect_van_hove(const TightBindingModel& model, double gradient_floor,
                                           int sweep_n) {
  std::vector<double> found;
  DeformationField probe = DeformationField::zero(model.dim, sweep_n);
  const Eigen::MatrixXd cart = model.lattice_vectors / two_pi;
  for (std::size_t p = 0; p < probe.npoints(); ++p) {
    BandData bd = band_eigens(model, probe.k_point(p), 1e-6);
    for (int band = 0; band < model.orbitals; ++band) {
      double speed = (cart * bd.gradients.col(band)).norm();
      bool crossing = (band > 0 && bd.energies(band) - bd.energies(band - 1) < 1e-6) ||
                      (band + 1 < model.orbitals && bd.energies(band + 1) - bd.energies(band) < 1e-6);
      if (speed < gradient_floor || crossing) found.push_back(bd.energies(band));
    }
  }
  std::sort(found.begin(), found.end());
  std::vector<double> clustered;
  for (double e : found)
    if (clustered.empty() || e - clustered.back() > 2e-2) clustered.push_back(e);
  return clustered;
}

}  // namespace detail

// The five parameter rules. "a << b" is graded by the ratio b/a: >= 5 pass,
// >= 2 warn, otherwise fail. The spectrum-clearance rule needs a reference
// continuation depth |Im z|; pass imz_ref explicitly or accept the default of
// 0.2% of the spectral span. All gradients are Cartesian.
inline ValidationReport validate_parameters(const TightBindingModel& model,
                                            const DeformationParams& params, int n, int rmax,
                                            double imz_ref = -1.0, double gradient_floor = 1e-3) {
  ValidationReport rep;
  const Eigen::MatrixXd cart = model.lattice_vectors / two_pi;
  const double diam = model.bz_diameter();

  const int sweep_n = model.dim == 1 ? std::max(n, 512) : std::max(n, 64);
  rep.van_hove_energies = detail::detect_van_hove(model, gradient_floor, sweep_n);

  // spectral span for the default depth reference
  double emin = 1e300, emax = -1e300;
  {
    DeformationField probe = DeformationField::zero(model.dim, sweep_n);
    for (std::size_t p = 0; p < probe.npoints(); ++p) {
      BandData bd = band_eigens(model, probe.k_point(p));
      emin = std::min(emin, bd.energies(0));
      emax = std::max(emax, bd.energies(model.orbitals - 1));
    }
  }
  if (imz_ref <= 0) imz_ref = 2e-3 * (emax - emin);

  // Fermi shell on the run grid: |eps - E| < dE/4
  double vmin = 1e300, vmax = 0.0, res_min = 1e300;
  {
    DeformationField probe = DeformationField::zero(model.dim, n);
    for (std::size_t p = 0; p < probe.npoints(); ++p) {
      BandData bd = band_eigens(model, probe.k_point(p));
      for (int band = 0; band < model.orbitals; ++band) {
        if (std::abs(bd.energies(band) - params.energy) >= params.delta_e / 4) continue;
        double speed = (cart * bd.gradients.col(band)).norm();
        vmin = std::min(vmin, speed);
        vmax = std::max(vmax, speed);
        res_min = std::min(res_min, std::min(params.delta_e / std::max(speed, 1e-300),
                                             params.alpha * speed));
      }
    }
  }
  const bool shell = vmax > 0.0 || vmin < 1e300;

  auto grade = [](double ratio) {
    if (ratio >= 5.0) return RuleGrade::Pass;
    if (ratio >= 2.0) return RuleGrade::Warn;
    return RuleGrade::Fail;
  };
  auto push = [&](const std::string& name, double lhs, double rhs) {
    double ratio = lhs > 0 ? rhs / lhs : (rhs > 0 ? 1e300 : 0.0);
    rep.rules.push_back({name, lhs, rhs, ratio, grade(ratio)});
  };

  double vh_dist = 1e300;
  for (double e : rep.van_hove_energies) vh_dist = std::min(vh_dist, std::abs(e - params.energy));
  // with no Fermi shell at E there is nothing to deform around; shell rules
  // then pass vacuously
  push("smoothness", params.delta_e, vh_dist);
  push("first-order", shell ? params.alpha * vmax : 0.0, diam);
  push("spectrum-clearance", imz_ref, shell ? params.alpha * vmin * vmin : 1e300);
  push("integration-accuracy", diam / n, shell ? res_min : diam);
  push("locality", static_cast<double>(std::max(rmax, 0)), static_cast<double>(n));
  return rep;
}

}  // namespace bcd
