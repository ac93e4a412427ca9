#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>

#include "bcd/defect.hpp"
#include "bcd/lattice.hpp"

namespace bcd {

struct NamedSystem {
  TightBindingModel model;
  std::optional<DefectOperator> defect;
  std::string notes;
};

namespace detail {
inline Eigen::VectorXi ivec(std::initializer_list<int> v) {
  Eigen::VectorXi x(static_cast<int>(v.size()));
  int i = 0;
  for (int c : v) x(i++) = c;
  return x;
}
}  // namespace detail

// Alternating two-site chain with unit hopping and site energies Ea, Eb.
// Bloch matrix [[Ea, e^{-ik}+1],[e^{ik}+1, Eb]] with k = 2*pi*kappa.
inline TightBindingModel make_diatomic(double ea = 1.0, double eb = 0.0) {
  TightBindingModel m;
  m.dim = 1;
  m.orbitals = 2;
  m.lattice_vectors = Eigen::MatrixXd::Identity(1, 1);
  m.labels = {"a", "b"};
  m.orbital_positions.resize(1, 2);
  m.orbital_positions << 0.0, 0.5;
  Eigen::MatrixXcd on(2, 2), right(2, 2);
  on << ea, 1.0, 1.0, eb;
  right << 0.0, 0.0, 1.0, 0.0;  // b of cell 0 bonds to a of cell 1
  m.add_hopping(detail::ivec({0}), on);
  m.add_hopping(detail::ivec({1}), right);
  m.add_hopping(detail::ivec({-1}), right.adjoint());
  return m;
}

// Two intra-cell bonds (cells 0 and 2) replaced by eps. At eps=0 the four
// sites b0,a1,b1,a2 decouple from the chain and host embedded eigenvalues.
inline DefectOperator make_diatomic_defect(double eps) {
  DefectOperator d;
  d.add_lattice({detail::ivec({0}), 0}, {detail::ivec({0}), 1}, eps - 1.0);
  d.add_lattice({detail::ivec({2}), 0}, {detail::ivec({2}), 1}, eps - 1.0);
  return d;
}

// Nearest-neighbour graphene, reduced BZ [-1/2,1/2]^2, off-diagonal Bloch
// entry -t(1+e^{2 pi i k1}+e^{2 pi i k2}).
inline TightBindingModel make_graphene(double t = 1.0) {
  TightBindingModel m;
  m.dim = 2;
  m.orbitals = 2;
  m.lattice_vectors.resize(2, 2);
  const double s3 = std::sqrt(3.0);
  m.lattice_vectors << s3 / 2, s3 / 2, 0.5, -0.5;  // columns a1, a2
  m.labels = {"A", "B"};
  m.orbital_positions.resize(2, 2);
  m.orbital_positions << 0.0, s3 / 3, 0.0, 0.0;  // B sublattice at (a1+a2)/3
  Eigen::MatrixXcd on(2, 2), ab(2, 2);
  on << 0.0, -t, -t, 0.0;
  ab << 0.0, -t, 0.0, 0.0;
  m.add_hopping(detail::ivec({0, 0}), on);
  m.add_hopping(detail::ivec({1, 0}), ab);
  m.add_hopping(detail::ivec({0, 1}), ab);
  m.add_hopping(detail::ivec({-1, 0}), ab.adjoint());
  m.add_hopping(detail::ivec({0, -1}), ab.adjoint());
  return m;
}

// Adatom in the "top" configuration: one extra site of energy ed, hopping eps
// to orbital `attach` of cell 0.
inline DefectOperator make_adatom_defect(double eps, double ed, int attach = 0, int dim = 2) {
  DefectOperator d;
  DefectOperator::ExtraSite site;
  site.energy = ed;
  site.couplings.push_back({{Eigen::VectorXi::Zero(dim), attach}, cplx(eps, 0)});
  d.extra_sites.push_back(site);
  return d;
}

// Single cosine band eps_k = 2 t cos(2 pi kappa), M = 1.
inline TightBindingModel make_chain1band(double t = 1.0) {
  TightBindingModel m;
  m.dim = 1;
  m.orbitals = 1;
  m.lattice_vectors = Eigen::MatrixXd::Identity(1, 1);
  Eigen::MatrixXcd hop(1, 1);
  hop << t;
  m.add_hopping(detail::ivec({1}), hop);
  m.add_hopping(detail::ivec({-1}), hop.adjoint());
  return m;
}

// Dispersionless toy: hoppings only at T = 0.
inline TightBindingModel make_flatband(const Eigen::VectorXd& energies, int dim = 1) {
  TightBindingModel m;
  m.dim = dim;
  m.orbitals = static_cast<int>(energies.size());
  m.lattice_vectors = Eigen::MatrixXd::Identity(dim, dim);
  m.add_hopping(Eigen::VectorXi::Zero(dim), energies.cast<cplx>().asDiagonal().toDenseMatrix());
  return m;
}

inline TightBindingModel make_flatband(double e0 = 0.0, int dim = 1) {
  Eigen::VectorXd e(1);
  e << e0;
  return make_flatband(e, dim);
}

}  // namespace bcd
