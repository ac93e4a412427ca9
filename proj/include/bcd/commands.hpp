#pragma once

#include <algorithm>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "bcd/config.hpp"
#include "bcd/csv.hpp"
#include "bcd/free1d.hpp"
#include "bcd/greens.hpp"
#include "bcd/resonance.hpp"

namespace bcd {

namespace detail {

inline void write_manifest(const RunConfig& c) {
  std::ofstream out(c.out + ".manifest.json");
  if (!out) throw ConfigError("cannot write manifest next to '" + c.out + "'");
  out << config_to_json(c).dump(2) << "\n";
}

inline std::string header_comment(const RunConfig& c) {
  std::string mode = c.adaptive ? "adaptive" : c.mode;
  return "# model=" + c.model + " defect=" + c.defect + " nk=" + std::to_string(c.nk) +
         " alpha=" + fmt_double(c.alpha) + " delta_e=" + fmt_double(c.delta_e) +
         " energy=" + fmt_double(c.energy) + " mode=" + mode;
}

inline ComplexEnergyGrid grid_from(const RunConfig& c) {
  ComplexEnergyGrid g{c.window[0], c.window[1], c.window[2], c.window[3], c.resolution[0],
                      c.resolution[1]};
  g.check();
  return g;
}

inline DeformationParams params_from(const RunConfig& c) {
  DeformationParams p;
  p.energy = c.energy;
  p.alpha = c.alpha;
  p.delta_e = c.delta_e;
  return p;
}

inline void write_map_csv(const RunConfig& c, const ComplexMap& map) {
  auto out = csv_open(c.out);
  out << header_comment(c) << "\n";
  out << "re_z,im_z,re_value,im_value\n";
  for (int i = 0; i < map.grid.nre; ++i)
    for (int j = 0; j < map.grid.nim; ++j) {
      std::size_t f = map.grid.flat(i, j);
      cplx v = map.masked[f] ? cplx(std::nan(""), std::nan("")) : map.values[f];
      out << fmt_double(map.grid.re(i)) << "," << fmt_double(map.grid.im(j)) << ","
          << fmt_double(v.real()) << "," << fmt_double(v.imag()) << "\n";
    }
}

inline void write_scan_csv(const RunConfig& c, const SigmaScan& scan) {
  auto out = csv_open(c.out);
  out << header_comment(c) << "\n";
  out << "re_z,im_z,log10_sigma_min\n";
  for (int i = 0; i < scan.grid.nre; ++i)
    for (int j = 0; j < scan.grid.nim; ++j) {
      std::size_t f = scan.grid.flat(i, j);
      double v = scan.masked[f] ? std::nan("") : scan.log10_sigma_min[f];
      out << fmt_double(scan.grid.re(i)) << "," << fmt_double(scan.grid.im(j)) << ","
          << fmt_double(v) << "\n";
    }
}

// reorder bands along a sweep for plotting continuity (greedy max overlap)
inline std::vector<int> continuity_order(const Eigen::MatrixXcd& prev, const Eigen::MatrixXcd& cur,
                                         const std::vector<int>& prev_order) {
  const int m = static_cast<int>(cur.cols());
  std::vector<int> order(m, -1);
  std::vector<bool> used(m, false);
  for (int slot = 0; slot < m; ++slot) {
    int pn = prev_order[slot];
    int best = -1;
    double best_ov = -1;
    for (int n = 0; n < m; ++n) {
      if (used[n]) continue;
      double ov = std::abs(cplx(prev.col(pn).adjoint() * cur.col(n)));
      if (ov > best_ov) {
        best_ov = ov;
        best = n;
      }
    }
    order[slot] = best;
    used[best] = true;
  }
  return order;
}

}  // namespace detail

// band sweep: d=1 crosses the zone, d=2 walks Gamma -> K -> M -> Gamma
inline void cmd_bands(const RunConfig& c) {
  c.check();
  TightBindingModel model = model_from_spec(c.model);
  std::vector<Eigen::VectorXd> path;
  const int npts = std::max(c.resolution[0], 2);
  if (model.dim == 1) {
    for (int i = 0; i < npts; ++i) {
      Eigen::VectorXd k(1);
      k << -0.5 + static_cast<double>(i) / (npts - 1);
      path.push_back(k);
    }
  } else if (model.dim == 2) {
    Eigen::Vector2d gamma(0, 0), kpt(1.0 / 3, -1.0 / 3), mpt(0.5, 0);
    std::vector<Eigen::Vector2d> corners{gamma, kpt, mpt, gamma};
    for (std::size_t s = 0; s + 1 < corners.size(); ++s)
      for (int i = 0; i < npts; ++i) {
        double t = static_cast<double>(i) / npts;
        path.push_back(corners[s] + t * (corners[s + 1] - corners[s]));
      }
    path.push_back(gamma);
  } else {
    throw ConfigError("bands: only d = 1 or 2 sweeps are built in");
  }

  auto out = csv_open(c.out);
  out << detail::header_comment(c) << "\n";
  out << "s";
  for (int a = 0; a < model.dim; ++a) out << ",k" << (a + 1);
  for (int n = 0; n < model.orbitals; ++n) out << ",eps" << (n + 1);
  out << "\n";

  const Eigen::MatrixXd bmat = two_pi * model.lattice_vectors.inverse().transpose();
  double arc = 0;
  Eigen::VectorXd prev_k;
  Eigen::MatrixXcd prev_vecs;
  std::vector<int> order(model.orbitals);
  for (int n = 0; n < model.orbitals; ++n) order[n] = n;
  for (const auto& k : path) {
    BandData bd = band_eigens(model, k);
    if (prev_k.size() > 0) {
      arc += (bmat * (k - prev_k)).norm();
      order = detail::continuity_order(prev_vecs, bd.vectors, order);
    }
    out << fmt_double(arc);
    for (int a = 0; a < model.dim; ++a) out << "," << fmt_double(k(a));
    for (int n = 0; n < model.orbitals; ++n) out << "," << fmt_double(bd.energies(order[n]));
    out << "\n";
    prev_k = k;
    prev_vecs.resize(bd.vectors.rows(), bd.vectors.cols());
    for (int n = 0; n < model.orbitals; ++n) prev_vecs.col(n) = bd.vectors.col(order[n]);
    for (int n = 0; n < model.orbitals; ++n) order[n] = n;
  }
  detail::write_manifest(c);
}

// trace-per-cell map over a complex-z window
inline void cmd_greenmap(const RunConfig& c) {
  c.check();
  TightBindingModel model = model_from_spec(c.model);
  ComplexEnergyGrid grid = detail::grid_from(c);
  ComplexMap map;
  if (c.mode == "undeformed") {
    GreenEvaluator ev(model, DeformationField::zero(model.dim, c.nk));
    map = trace_map(ev, grid, TraceMode::FixedE);
  } else if (c.mode == "fixed") {
    GreenEvaluator ev(model, build_deformation(model, detail::params_from(c), c.nk));
    map = trace_map(ev, grid, TraceMode::FixedE);
  } else if (c.mode == "adaptive") {
    GreenEvaluator ev(model, build_deformation(model, detail::params_from(c), c.nk));
    map = trace_map(ev, grid, TraceMode::AdaptiveE);
  } else {
    throw ConfigError("greenmap: mode must be undeformed, fixed or adaptive");
  }
  detail::write_map_csv(c, map);
  detail::write_manifest(c);
}

// BCD and Gaussian-smearing DOS side by side over an energy sweep
inline void cmd_dos(const RunConfig& c) {
  c.check();
  TightBindingModel model = model_from_spec(c.model);
  if (c.epoints < 1) throw ConfigError("dos: epoints must be >= 1");

  // one band sweep serves every smearing point
  std::vector<double> eps;
  {
    DeformationField probe = DeformationField::zero(model.dim, c.nk);
    for (std::size_t p = 0; p < probe.npoints(); ++p) {
      BandData bd = band_eigens(model, probe.k_point(p));
      for (int n = 0; n < model.orbitals; ++n) eps.push_back(bd.energies(n));
    }
  }
  const double npd = std::pow(static_cast<double>(c.nk), model.dim);

  auto out = csv_open(c.out);
  out << detail::header_comment(c) << " eta=" << fmt_double(c.eta) << "\n";
  out << "e,dos_bcd,dos_smearing\n";
  std::vector<Warning> warnings;
  for (int i = 0; i < c.epoints; ++i) {
    double e = c.epoints == 1 ? c.erange[0]
                              : c.erange[0] + i * (c.erange[1] - c.erange[0]) / (c.epoints - 1);
    double smear = 0;
    for (double x : eps) smear += std::exp(-((x - e) / c.eta) * ((x - e) / c.eta));
    smear /= c.eta * std::sqrt(M_PI) * npd;
    double bcdv;
    try {
      bcdv = dos_bcd(model, e, detail::params_from(c), c.nk, &warnings);
    } catch (const SingularKPoint&) {
      bcdv = std::nan("");
    }
    out << fmt_double(e) << "," << fmt_double(bcdv) << "," << fmt_double(smear) << "\n";
  }
  if (has_warning(warnings, Warning::VanHoveProximity))
    std::cerr << "warning: VanHoveProximity at one or more sweep energies\n";
  detail::write_manifest(c);
}

// smallest-singular-value landscape of 1 - V R0(z)
inline void cmd_scan(const RunConfig& c) {
  c.check();
  TightBindingModel model = model_from_spec(c.model);
  auto defect = defect_from_spec(c.defect, model);
  if (!defect) throw ConfigError("scan: a defect is required");
  defect->check(model);
  ComplexEnergyGrid grid = detail::grid_from(c);

  SigmaScan scan;
  if (c.mode == "fixed" && !c.adaptive) {
    GreenEvaluator ev(model, build_deformation(model, detail::params_from(c), c.nk));
    scan = svd_scan(ev, *defect, grid);
  } else {
    // per-column deformation at E = Re z
    scan.grid = grid;
    scan.log10_sigma_min.assign(grid.size(), 0.0);
    scan.masked.assign(grid.size(), 0);
    parallel_chunks(static_cast<std::size_t>(grid.nre), 1,
                    [&](std::size_t, std::size_t begin, std::size_t end) {
                      for (std::size_t i = begin; i < end; ++i) {
                        DeformationParams p = detail::params_from(c);
                        p.energy = grid.re(static_cast<int>(i));
                        GreenEvaluator ev(model, build_deformation(model, p, c.nk));
                        ComplexEnergyGrid col{grid.re(static_cast<int>(i)),
                                              grid.re(static_cast<int>(i)),
                                              grid.im0,
                                              grid.im1,
                                              1,
                                              grid.nim};
                        SigmaScan cs = svd_scan(ev, *defect, col);
                        for (int j = 0; j < grid.nim; ++j) {
                          scan.log10_sigma_min[grid.flat(static_cast<int>(i), j)] =
                              cs.log10_sigma_min[j];
                          scan.masked[grid.flat(static_cast<int>(i), j)] = cs.masked[j];
                        }
                      }
                    });
  }
  detail::write_scan_csv(c, scan);
  detail::write_manifest(c);
}

// Newton refinement from each --seed-z, with residue normalization
inline void cmd_refine(const RunConfig& c) {
  c.check();
  if (c.seeds.empty()) throw ConfigError("refine: at least one --seed-z is required");
  TightBindingModel model = model_from_spec(c.model);
  auto defect = defect_from_spec(c.defect, model);
  if (!defect) throw ConfigError("refine: a defect is required");
  defect->check(model);

  auto out = csv_open(c.out);
  out << "# resonance records\n" << detail::header_comment(c) << "\n";
  int idx = 0;
  for (cplx seed : c.seeds) {
    DeformationParams p = detail::params_from(c);
    if (c.adaptive || c.energy == 0) p.energy = seed.real();
    GreenEvaluator ev(model, build_deformation(model, p, c.nk));
    ResonanceResult res = refine_resonance(ev, *defect, seed);
    res = normalize_residue(ev, *defect, res);

    out << "resonance " << idx << "\n";
    out << "  seed = " << fmt_double(seed.real()) << " " << fmt_double(seed.imag()) << "\n";
    out << "  z0 = " << fmt_double(res.z0.real()) << " " << fmt_double(res.z0.imag()) << "\n";
    out << "  sigma_min = " << fmt_double(res.sigma_min) << "\n";
    out << "  newton_iters = " << res.newton_iters << "\n";
    out << "  residue_condition = " << fmt_double(res.residue_condition.real()) << " "
        << fmt_double(res.residue_condition.imag()) << "\n";
    out << "  residue_scale = " << fmt_double(res.residue_scale.real()) << " "
        << fmt_double(res.residue_scale.imag()) << "\n";
    for (int i = 0; i < res.phi.size(); ++i)
      out << "  phi_" << i << " = " << fmt_double(res.phi(i).real()) << " "
          << fmt_double(res.phi(i).imag()) << "\n";
    for (int i = 0; i < res.psi_support.size(); ++i)
      out << "  psi_" << i << " = " << fmt_double(res.psi_support(i).real()) << " "
          << fmt_double(res.psi_support(i).imag()) << "\n";

    if (c.state_radius > 0) {
      std::vector<Eigen::VectorXi> window;
      if (model.dim == 1) {
        for (int r = -c.state_radius; r <= c.state_radius; ++r) {
          Eigen::VectorXi cell(1);
          cell << r;
          window.push_back(cell);
        }
      } else {
        for (int r1 = -c.state_radius; r1 <= c.state_radius; ++r1)
          for (int r2 = -c.state_radius; r2 <= c.state_radius; ++r2) {
            Eigen::VectorXi cell(2);
            cell << r1, r2;
            window.push_back(cell);
          }
      }
      StateSamples st = resonant_state_samples(ev, *defect, res, window);
      auto sout = csv_open(c.out + ".state" + std::to_string(idx) + ".csv");
      sout << detail::header_comment(c) << "\n";
      sout << (model.dim == 1 ? "x" : "x,y") << ",re_psi,im_psi,abs_psi,arg_psi\n";
      for (const auto& s : st.lattice) {
        Eigen::VectorXd pos = model.lattice_vectors * s.cell.cast<double>() +
                              model.orbital_positions.col(s.orb);
        for (int a = 0; a < model.dim; ++a) sout << fmt_double(pos(a)) << ",";
        sout << fmt_double(s.psi.real()) << "," << fmt_double(s.psi.imag()) << ","
             << fmt_double(std::abs(s.psi)) << "," << fmt_double(std::arg(s.psi)) << "\n";
      }
      for (std::size_t x = 0; x < st.extra.size(); ++x)
        out << "  psi_extra_" << x << " = " << fmt_double(st.extra[x].real()) << " "
            << fmt_double(st.extra[x].imag()) << "\n";
    }
    ++idx;
  }
  detail::write_manifest(c);
}

// free-Laplacian test bed: scan, refine the minima, optional complex-scaling
// spectrum for cross-checking
inline void cmd_free1d(const RunConfig& c) {
  c.check();
  free1d::Grid1D grid = free1d::Grid1D::make(c.box_length, c.step);
  free1d::Potential pot = free1d::potential_by_name(c.potential);
  ComplexEnergyGrid zgrid = detail::grid_from(c);

  SigmaScan scan = free1d::free_scan(grid, pot, zgrid);
  detail::write_scan_csv(c, scan);

  std::vector<cplx> minima = free1d::scan_minima(scan);
  if (minima.size() > 4) minima.resize(4);
  std::vector<free1d::FreeResonance> refined;
  for (cplx seed : minima) {
    try {
      free1d::FreeResonance r = free1d::refine_free_resonance(grid, pot, seed);
      bool dup = false;
      for (const auto& other : refined)
        if (std::abs(other.z0 - r.z0) < 1e-6) dup = true;
      if (!dup) refined.push_back(r);
    } catch (const NoConvergence&) {
    } catch (const DivergedOutsideWindow&) {
    }
  }
  {
    auto rout = csv_open(c.out + ".resonances.txt");
    rout << "# free-laplacian resonances, L=" << fmt_double(c.box_length)
         << " h=" << fmt_double(c.step) << " potential=" << c.potential << "\n";
    int i = 0;
    for (const auto& r : refined) {
      rout << "resonance " << i++ << "\n";
      rout << "  z0 = " << fmt_double(r.z0.real()) << " " << fmt_double(r.z0.imag()) << "\n";
      rout << "  sigma_min = " << fmt_double(r.sigma_min) << "\n";
      rout << "  newton_iters = " << r.newton_iters << "\n";
    }
  }
  if (!refined.empty()) {
    auto [phi, psi] = free1d::resonant_pair_free(grid, pot, refined.front().z0);
    auto sout = csv_open(c.out + ".state.csv");
    sout << "x,v,re_phi,im_phi,re_psi,im_psi\n";
    for (int j = 0; j < grid.nodes(); ++j)
      sout << fmt_double(grid.node(j)) << "," << fmt_double(pot.real(grid.node(j))) << ","
           << fmt_double(phi(j).real()) << "," << fmt_double(phi(j).imag()) << ","
           << fmt_double(psi(j).real()) << "," << fmt_double(psi(j).imag()) << "\n";
  }
  if (c.theta != 0.0) {
    std::vector<cplx> ev = free1d::complex_scaled_spectrum(grid, pot, c.theta);
    auto eout = csv_open(c.out + ".cs.csv");
    eout << "# complex-scaling eigenvalues, theta=" << fmt_double(c.theta) << "\n";
    eout << "re,im\n";
    for (cplx e : ev) eout << fmt_double(e.real()) << "," << fmt_double(e.imag()) << "\n";
  }
  detail::write_manifest(c);
}

// parameter rules of thumb, report only
inline void cmd_validate(const RunConfig& c, std::ostream& os = std::cout) {
  c.check();
  TightBindingModel model = model_from_spec(c.model);
  ValidationReport rep = validate_parameters(model, detail::params_from(c), c.nk, c.rmax);
  for (const auto& r : rep.rules)
    os << "rule " << r.name << ": lhs=" << fmt_double(r.lhs) << " rhs=" << fmt_double(r.rhs)
       << " ratio=" << fmt_double(r.ratio) << " grade=" << grade_name(r.grade) << "\n";
  os << "van_hove_energies:";
  for (double e : rep.van_hove_energies) os << " " << fmt_double(e);
  os << "\n";
  os << (rep.all_pass() ? "all rules pass\n" : "some rules need attention\n");
}

inline void dispatch(const RunConfig& c) {
  if (c.command == "bands") return cmd_bands(c);
  if (c.command == "greenmap") return cmd_greenmap(c);
  if (c.command == "dos") return cmd_dos(c);
  if (c.command == "scan") return cmd_scan(c);
  if (c.command == "refine") return cmd_refine(c);
  if (c.command == "free1d") return cmd_free1d(c);
  if (c.command == "validate") return cmd_validate(c);
  throw ConfigError("unknown command '" + c.command + "'");
}

}  // namespace bcd
