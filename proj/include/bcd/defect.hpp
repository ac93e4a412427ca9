#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <vector>

#include "bcd/lattice.hpp"
#include "bcd/types.hpp"

namespace bcd {

// one crystal degree of freedom: cell R and orbital index
struct LatticeIndex {
  Eigen::VectorXi cell;
  int orb = 0;

  friend bool operator==(const LatticeIndex& a, const LatticeIndex& b) {
    return a.orb == b.orb && a.cell == b.cell;
  }
  friend bool operator<(const LatticeIndex& a, const LatticeIndex& b) {
    if (a.cell.size() != b.cell.size()) return a.cell.size() < b.cell.size();
    for (int i = 0; i < a.cell.size(); ++i)
      if (a.cell(i) != b.cell(i)) return a.cell(i) < b.cell(i);
    return a.orb < b.orb;
  }
};

// Localized perturbation V = H - H0. Lattice entries live on the crystal's
// orbitals; extra sites (adatoms) carry their own site energy, which belongs
// to the extended H0 (so the unperturbed extra site is decoupled), while the
// couplings to the crystal belong to V.
struct DefectOperator {
  struct Entry {
    LatticeIndex row, col;
    cplx value;
  };
  struct ExtraSite {
    double energy = 0;
    std::vector<std::pair<LatticeIndex, cplx>> couplings;
  };

  std::vector<Entry> lattice_entries;  // both (i,j) and (j,i) partners stored
  std::vector<ExtraSite> extra_sites;

  // symmetric insertion helper
  void add_lattice(const LatticeIndex& a, const LatticeIndex& b, cplx v) {
    lattice_entries.push_back({a, b, v});
    if (!(a == b)) lattice_entries.push_back({b, a, std::conj(v)});
  }

  // ordered support: lattice DOFs sorted lexicographically, extra sites after
  std::vector<LatticeIndex> lattice_support() const {
    std::vector<LatticeIndex> s;
    for (const auto& e : lattice_entries) {
      s.push_back(e.row);
      s.push_back(e.col);
    }
    for (const auto& x : extra_sites)
      for (const auto& [li, amp] : x.couplings) s.push_back(li);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
  }

  int support_size() const {
    return static_cast<int>(lattice_support().size() + extra_sites.size());
  }

  // V restricted to the support, basis = [lattice_support..., extra_sites...]
  Eigen::MatrixXcd v_matrix() const {
    std::vector<LatticeIndex> ls = lattice_support();
    const int nl = static_cast<int>(ls.size());
    const int n = nl + static_cast<int>(extra_sites.size());
    auto pos = [&](const LatticeIndex& li) {
      auto it = std::lower_bound(ls.begin(), ls.end(), li);
      return static_cast<int>(it - ls.begin());
    };
    Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& e : lattice_entries) v(pos(e.row), pos(e.col)) += e.value;
    for (int x = 0; x < static_cast<int>(extra_sites.size()); ++x)
      for (const auto& [li, amp] : extra_sites[x].couplings) {
        v(pos(li), nl + x) += std::conj(amp);
        v(nl + x, pos(li)) += amp;
      }
    return v;
  }

  void check(const TightBindingModel& model) const {
    for (const auto& e : lattice_entries) {
      if (e.row.cell.size() != model.dim || e.col.cell.size() != model.dim)
        throw std::invalid_argument("defect: entry cell has wrong dimension");
      if (e.row.orb < 0 || e.row.orb >= model.orbitals || e.col.orb < 0 || e.col.orb >= model.orbitals)
        throw std::invalid_argument("defect: orbital index out of range");
    }
    for (const auto& x : extra_sites)
      for (const auto& [li, amp] : x.couplings)
        if (li.cell.size() != model.dim || li.orb < 0 || li.orb >= model.orbitals)
          throw std::invalid_argument("defect: coupling index out of range");
    Eigen::MatrixXcd v = v_matrix();
    if ((v - v.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
      throw std::invalid_argument("defect: V is not hermitian on its support");
  }
};

}  // namespace bcd
