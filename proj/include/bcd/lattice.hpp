#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "bcd/types.hpp"

namespace bcd {

// Periodic tight-binding Hamiltonian on a lattice isomorphic to Z^d with M
// orbitals per cell. All reciprocal-space math runs in reduced coordinates:
// a wavevector kappa lives in [-1/2,1/2)^d up to periodicity and enters
// phases as exp(2*pi*i * kappa.T) with T an integer translation. Cartesian
// geometry (lattice_vectors, orbital_positions) is only used when building
// deformation fields and when emitting real-space plots.
struct TightBindingModel {
  int dim = 1;
  int orbitals = 1;
  // finite hopping set: T -> H0(0,T), kept sorted by T for determinism
  std::vector<std::pair<Eigen::VectorXi, Eigen::MatrixXcd>> hoppings;
  Eigen::MatrixXd lattice_vectors;     // dim x dim, column i = a_i
  std::vector<std::string> labels;     // optional orbital names
  Eigen::MatrixXd orbital_positions;   // dim x orbitals, Cartesian offsets

  const Eigen::MatrixXcd* hop(const Eigen::VectorXi& t) const {
    for (const auto& [tt, m] : hoppings)
      if (tt == t) return &m;
    return nullptr;
  }

  void add_hopping(const Eigen::VectorXi& t, const Eigen::MatrixXcd& m) {
    for (auto& [tt, mm] : hoppings)
      if (tt == t) {
        mm += m;
        return;
      }
    hoppings.emplace_back(t, m);
    std::sort(hoppings.begin(), hoppings.end(),
              [](const auto& a, const auto& b) {
                return std::lexicographical_compare(a.first.data(), a.first.data() + a.first.size(),
                                                    b.first.data(), b.first.data() + b.first.size());
              });
  }

  bool is_real(double tol = 0.0) const {
    for (const auto& [t, m] : hoppings)
      if (m.imag().cwiseAbs().maxCoeff() > tol) return false;
    return true;
  }

  // real-space hermiticity H0(0,-T) = H0(0,T)^dagger, shape consistency
  void check() const {
    if (dim < 1) throw std::invalid_argument("model: dim must be >= 1");
    if (orbitals < 1) throw std::invalid_argument("model: orbitals must be >= 1");
    if (lattice_vectors.rows() != dim || lattice_vectors.cols() != dim)
      throw std::invalid_argument("model: lattice_vectors must be dim x dim");
    for (const auto& [t, m] : hoppings) {
      if (t.size() != dim) throw std::invalid_argument("model: hopping T has wrong dimension");
      if (m.rows() != orbitals || m.cols() != orbitals)
        throw std::invalid_argument("model: hopping matrix has wrong shape");
      const Eigen::MatrixXcd* back = hop(-t);
      if (!back || ((*back) - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("model: hoppings are not hermitian, H0(0,-T) != H0(0,T)^H");
    }
  }

  // Gram matrix a_i . a_j of the direct lattice
  Eigen::MatrixXd gram() const { return lattice_vectors.transpose() * lattice_vectors; }

  // diameter of the Brillouin zone in Cartesian k units
  double bz_diameter() const {
    Eigen::MatrixXd b = two_pi * lattice_vectors.inverse().transpose();  // columns b_i
    double best = 0;
    // corners of the unit reduced cell relative to its center
    const int ncorner = 1 << dim;
    for (int c = 0; c < ncorner; ++c) {
      Eigen::VectorXd r(dim);
      for (int a = 0; a < dim; ++a) r(a) = (c >> a) & 1 ? 0.5 : -0.5;
      best = std::max(best, 2.0 * (b * r).norm());
    }
    return best;
  }
};

struct BlochMatrix {
  Eigen::VectorXcd kappa;
  Eigen::MatrixXcd value;
};

// H_{0,kappa} = sum_T exp(2*pi*i kappa.T) H0(0,T); entire in kappa
inline Eigen::MatrixXcd bloch_value(const TightBindingModel& model, const Eigen::VectorXcd& kappa) {
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(model.orbitals, model.orbitals);
  for (const auto& [t, m] : model.hoppings) {
    cplx kt = 0;
    for (int a = 0; a < model.dim; ++a) kt += kappa(a) * static_cast<double>(t(a));
    h += std::exp(cplx(0, two_pi) * kt) * m;
  }
  return h;
}

inline BlochMatrix bloch_matrix(const TightBindingModel& model, const Eigen::VectorXcd& kappa) {
  return {kappa, bloch_value(model, kappa)};
}

inline BlochMatrix bloch_matrix(const TightBindingModel& model, const Eigen::VectorXd& k) {
  return bloch_matrix(model, k.cast<cplx>().eval());
}

// dH/dkappa_axis, term-wise 2*pi*i*T factors
inline Eigen::MatrixXcd bloch_gradient(const TightBindingModel& model, const Eigen::VectorXcd& kappa,
                                       int axis) {
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(model.orbitals, model.orbitals);
  for (const auto& [t, m] : model.hoppings) {
    if (t(axis) == 0) continue;
    cplx kt = 0;
    for (int a = 0; a < model.dim; ++a) kt += kappa(a) * static_cast<double>(t(a));
    h += cplx(0, two_pi) * static_cast<double>(t(axis)) * std::exp(cplx(0, two_pi) * kt) * m;
  }
  return h;
}

struct BandData {
  Eigen::VectorXd k;          // reduced
  Eigen::VectorXd energies;   // ascending
  Eigen::MatrixXcd vectors;   // column n = u_{nk}
  Eigen::MatrixXd gradients;  // column n = d eps_n / d kappa (reduced coordinates)
  bool degenerate = false;    // min gap below tolerance; gradients are then Hellmann-Feynman values
};

namespace detail {
// k-independent energy scale of the model; ||H_k|| itself can vanish (Dirac
// points) and would blind the gap test exactly where it matters
inline double degeneracy_scale(const TightBindingModel& model) {
  double s = 0;
  for (const auto& [t, m] : model.hoppings) s += m.norm();
  return s > 0 ? s : 1.0;
}
}  // namespace detail

// Bloch eigenproblem at real k. Eigenvectors orthonormal, energies ascending,
// gradients by Hellmann-Feynman (exact off degeneracies).
inline BandData band_eigens(const TightBindingModel& model, const Eigen::VectorXd& k,
                            double degeneracy_tol = 1e-8) {
  BandData out;
  out.k = k;
  Eigen::VectorXcd kappa = k.cast<cplx>();
  Eigen::MatrixXcd h = bloch_value(model, kappa);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  out.energies = es.eigenvalues();
  out.vectors = es.eigenvectors();
  const int m = model.orbitals;
  double scale = detail::degeneracy_scale(model);
  for (int n = 0; n + 1 < m; ++n)
    if (out.energies(n + 1) - out.energies(n) < degeneracy_tol * scale) out.degenerate = true;
  out.gradients.resize(model.dim, m);
  for (int a = 0; a < model.dim; ++a) {
    Eigen::MatrixXcd dh = bloch_gradient(model, kappa, a);
    for (int n = 0; n < m; ++n)
      out.gradients(a, n) = std::real(cplx(out.vectors.col(n).adjoint() * dh * out.vectors.col(n)));
  }
  return out;
}

// d eps_n / d kappa at real k (reduced coordinates). Sets *degenerate when the
// gap around band n is below tolerance; the Hellmann-Feynman value is still
// returned in that case.
inline Eigen::VectorXd band_gradient(const TightBindingModel& model, const Eigen::VectorXd& k, int n,
                                     bool* degenerate = nullptr, double degeneracy_tol = 1e-8) {
  BandData bd = band_eigens(model, k, degeneracy_tol);
  if (degenerate) {
    *degenerate = false;
    double scale = detail::degeneracy_scale(model);
    if (n > 0 && bd.energies(n) - bd.energies(n - 1) < degeneracy_tol * scale) *degenerate = true;
    if (n + 1 < model.orbitals && bd.energies(n + 1) - bd.energies(n) < degeneracy_tol * scale)
      *degenerate = true;
  }
  return bd.gradients.col(n);
}

}  // namespace bcd
