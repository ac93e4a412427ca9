#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <vector>

#include "bcd/deformation.hpp"
#include "bcd/lattice.hpp"
#include "bcd/parallel.hpp"
#include "bcd/types.hpp"

namespace bcd {

// Deformed Brillouin-zone quadrature of the periodic Green function,
//
//   R0(R,R';z) ~ (1/N^d) sum_k exp(2 pi i kappa(k).(R-R')) (z - H_{0,kappa(k)})^-1 det(1+ih'(k)),
//
// with kappa(k) = k + i h(k) from the attached DeformationField (possibly
// trivial). Bloch matrices at all grid points are cached at construction, so
// evaluating many z against one field costs one small LU per k-point. The
// evaluator is immutable and safe to share across threads; quadrature sums
// reduce over a fixed chunk grid, so results are bit-reproducible at any
// worker count.
class GreenEvaluator {
 public:
  GreenEvaluator(TightBindingModel model, DeformationField field)
      : model_(std::move(model)), field_(std::move(field)) {
    model_.check();
    if (field_.dim != model_.dim)
      throw std::invalid_argument("green: field dimension does not match model");
    const std::size_t np = field_.npoints();
    const int m = model_.orbitals;
    bloch_.resize(np * m * m);
    kappa_.resize(np * model_.dim);
    parallel_chunks(np, 1024, [&](std::size_t, std::size_t begin, std::size_t end) {
      for (std::size_t p = begin; p < end; ++p) {
        Eigen::VectorXcd kap = field_.kappa_at(p);
        for (int a = 0; a < model_.dim; ++a) kappa_[p * model_.dim + a] = kap(a);
        Eigen::Map<Eigen::MatrixXcd>(bloch_.data() + p * m * m, m, m) = bloch_value(model_, kap);
      }
    });
  }

  const TightBindingModel& model() const { return model_; }
  const DeformationField& field() const { return field_; }
  int grid_n() const { return field_.grid_n; }

  // quadrature for a batch of lattice offsets sharing one z; one LU per
  // k-point serves every offset. out/deriv sized ndeltas, each M x M.
  void blocks_multi(cplx z, std::span<const Eigen::VectorXi> deltas,
                    std::vector<Eigen::MatrixXcd>* out, std::vector<Eigen::MatrixXcd>* deriv,
                    int workers = 0) const {
    const int m = model_.orbitals;
    const int d = model_.dim;
    const std::size_t np = field_.npoints();
    const std::size_t nd = deltas.size();
    // cap the chunk count so batched offsets keep the partial sums small;
    // the chunk grid depends only on problem size, never on worker count
    std::size_t chunk = std::max<std::size_t>(256, (np + 63) / 64);
    const std::size_t nchunks = (np + chunk - 1) / chunk;
    std::vector<Eigen::MatrixXcd> partial(nchunks * nd, Eigen::MatrixXcd::Zero(m, m));
    std::vector<Eigen::MatrixXcd> dpartial;
    if (deriv) dpartial.assign(nchunks * nd, Eigen::MatrixXcd::Zero(m, m));

    parallel_chunks(
        np, chunk,
        [&](std::size_t c, std::size_t begin, std::size_t end) {
          Eigen::MatrixXcd a(m, m), inv(m, m), inv2(m, m);
          for (std::size_t p = begin; p < end; ++p) {
            a = -Eigen::Map<const Eigen::MatrixXcd>(bloch_.data() + p * m * m, m, m);
            a.diagonal().array() += z;
            Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
            if (lu.rcond() < 1e-14)
              throw SingularKPoint("z - H_{0,kappa} numerically singular at grid point " +
                                   std::to_string(p));
            inv = lu.inverse();
            if (deriv) inv2 = inv * inv;
            for (std::size_t id = 0; id < nd; ++id) {
              cplx kr = 0;
              for (int ax = 0; ax < d; ++ax)
                kr += kappa_[p * d + ax] * static_cast<double>(deltas[id](ax));
              cplx w = std::exp(cplx(0, two_pi) * kr) * field_.jacobians[p];
              partial[c * nd + id] += w * inv;
              if (deriv) dpartial[c * nd + id] -= w * inv2;
            }
          }
        },
        workers);

    const double norm = 1.0 / static_cast<double>(np);
    if (out) {
      out->assign(nd, Eigen::MatrixXcd::Zero(m, m));
      for (std::size_t c = 0; c < nchunks; ++c)
        for (std::size_t id = 0; id < nd; ++id) (*out)[id] += partial[c * nd + id];
      for (auto& b : *out) b *= norm;
    }
    if (deriv) {
      deriv->assign(nd, Eigen::MatrixXcd::Zero(m, m));
      for (std::size_t c = 0; c < nchunks; ++c)
        for (std::size_t id = 0; id < nd; ++id) (*deriv)[id] += dpartial[c * nd + id];
      for (auto& b : *deriv) b *= norm;
    }
  }

  Eigen::MatrixXcd block(cplx z, const Eigen::VectorXi& r, const Eigen::VectorXi& rp,
                         int workers = 0) const {
    Eigen::VectorXi delta = r - rp;
    std::vector<Eigen::MatrixXcd> out;
    blocks_multi(z, std::span<const Eigen::VectorXi>(&delta, 1), &out, nullptr, workers);
    return out[0];
  }

  Eigen::MatrixXcd derivative(cplx z, const Eigen::VectorXi& r, const Eigen::VectorXi& rp,
                              int workers = 0) const {
    Eigen::VectorXi delta = r - rp;
    std::vector<Eigen::MatrixXcd> deriv;
    blocks_multi(z, std::span<const Eigen::VectorXi>(&delta, 1), nullptr, &deriv, workers);
    return deriv[0];
  }

 private:
  TightBindingModel model_;
  DeformationField field_;
  std::vector<cplx> bloch_;  // np * M * M, column-major blocks
  std::vector<cplx> kappa_;  // np * dim
};

inline Eigen::MatrixXcd green_block(const GreenEvaluator& ev, cplx z, const Eigen::VectorXi& r,
                                    const Eigen::VectorXi& rp) {
  return ev.block(z, r, rp);
}

inline Eigen::MatrixXcd green_derivative(const GreenEvaluator& ev, cplx z, const Eigen::VectorXi& r,
                                         const Eigen::VectorXi& rp) {
  return ev.derivative(z, r, rp);
}

// ---------------------------------------------------------------------------

struct ComplexEnergyGrid {
  double re0 = 0, re1 = 0;
  double im0 = 0, im1 = 0;
  int nre = 1, nim = 1;

  void check() const {
    if (nre < 1 || nim < 1) throw std::invalid_argument("grid: counts must be >= 1");
    if (!std::isfinite(re0) || !std::isfinite(re1) || !std::isfinite(im0) || !std::isfinite(im1))
      throw std::invalid_argument("grid: ranges must be finite");
  }
  double re(int i) const { return nre == 1 ? re0 : re0 + i * (re1 - re0) / (nre - 1); }
  double im(int j) const { return nim == 1 ? im0 : im0 + j * (im1 - im0) / (nim - 1); }
  cplx node(int i, int j) const { return {re(i), im(j)}; }
  std::size_t size() const { return static_cast<std::size_t>(nre) * nim; }
  std::size_t flat(int i, int j) const { return static_cast<std::size_t>(i) * nim + j; }
};

struct ComplexMap {
  ComplexEnergyGrid grid;
  std::vector<cplx> values;      // grid.flat(i,j) layout, re outer
  std::vector<uint8_t> masked;   // nodes where (z - H) was singular
};

enum class TraceMode { FixedE, AdaptiveE };

// Tr R0(0,0;z) over a complex-z window. FixedE reuses the evaluator's single
// field; AdaptiveE rebuilds the deformation per Re(z) column (the evaluator's
// alpha and delta_e retargeted at E = Re z) and reuses it down the column.
// Singular nodes are masked, not fatal.
inline ComplexMap trace_map(const GreenEvaluator& ev, const ComplexEnergyGrid& grid,
                            TraceMode mode) {
  grid.check();
  ComplexMap map;
  map.grid = grid;
  map.values.assign(grid.size(), cplx(0, 0));
  map.masked.assign(grid.size(), 0);
  const Eigen::VectorXi zero = Eigen::VectorXi::Zero(ev.model().dim);

  if (mode == TraceMode::FixedE) {
    parallel_chunks(grid.size(), 8, [&](std::size_t, std::size_t begin, std::size_t end) {
      for (std::size_t f = begin; f < end; ++f) {
        int i = static_cast<int>(f) / grid.nim, j = static_cast<int>(f) % grid.nim;
        try {
          map.values[f] = ev.block(grid.node(i, j), zero, zero, 1).trace();
        } catch (const SingularKPoint&) {
          map.masked[f] = 1;
        }
      }
    });
    return map;
  }

  parallel_chunks(static_cast<std::size_t>(grid.nre), 1,
                  [&](std::size_t, std::size_t begin, std::size_t end) {
                    for (std::size_t i = begin; i < end; ++i) {
                      DeformationParams p = ev.field().params;
                      p.energy = grid.re(static_cast<int>(i));
                      GreenEvaluator col(ev.model(),
                                         build_deformation(ev.model(), p, ev.grid_n()));
                      for (int j = 0; j < grid.nim; ++j) {
                        std::size_t f = grid.flat(static_cast<int>(i), j);
                        try {
                          map.values[f] = col.block(grid.node(static_cast<int>(i), j), zero, zero, 1).trace();
                        } catch (const SingularKPoint&) {
                          map.masked[f] = 1;
                        }
                      }
                    }
                  });
  return map;
}

// Gaussian-smeared density of states per cell,
//   D_{N,eta}(E) = (1/N^d) sum_k sum_n g((eps_nk - E)/eta),  g(x) = e^{-x^2}/(eta sqrt(pi)),
// normalized so that the integral over E recovers the orbital count M.
inline double dos_smearing(const TightBindingModel& model, double energy, double eta, int n) {
  if (!(eta > 0)) throw std::invalid_argument("dos: eta must be > 0");
  DeformationField probe = DeformationField::zero(model.dim, n);
  const std::size_t np = probe.npoints();
  std::size_t chunk = std::max<std::size_t>(256, (np + 63) / 64);
  const std::size_t nchunks = (np + chunk - 1) / chunk;
  std::vector<double> partial(nchunks, 0.0);
  parallel_chunks(np, chunk, [&](std::size_t c, std::size_t begin, std::size_t end) {
    double acc = 0;
    for (std::size_t p = begin; p < end; ++p) {
      BandData bd = band_eigens(model, probe.k_point(p));
      for (int band = 0; band < model.orbitals; ++band) {
        double x = (bd.energies(band) - energy) / eta;
        acc += std::exp(-x * x);
      }
    }
    partial[c] += acc;
  });
  double total = 0;
  for (double v : partial) total += v;
  return total / (eta * std::sqrt(M_PI)) / static_cast<double>(np);
}

// D(E) = -(1/pi) Im Tr R0(0,0;E) evaluated directly on the real axis with the
// deformation retargeted at E.
inline double dos_bcd(const TightBindingModel& model, double energy, DeformationParams params,
                      int n, std::vector<Warning>* warnings = nullptr) {
  params.energy = energy;
  DeformationField field = build_deformation(model, params, n);
  if (warnings)
    for (auto w : field.warnings) warnings->push_back(w);
  GreenEvaluator ev(model, std::move(field));
  const Eigen::VectorXi zero = Eigen::VectorXi::Zero(model.dim);
  return -ev.block(cplx(energy, 0), zero, zero).trace().imag() / M_PI;
}

}  // namespace bcd
