#pragma once

#include <fstream>
#include <nlohmann/json.hpp>
#include <string>

#include "bcd/lattice.hpp"
#include "bcd/types.hpp"

namespace bcd {

// Model definition file (JSON):
//   {
//     "dim": 1, "orbitals": 2,
//     "lattice_vectors": [[1.0]],            // row i = a_i
//     "labels": ["a","b"],                   // optional
//     "orbital_positions": [[0.0],[0.5]],    // optional, Cartesian
//     "hoppings": [ {"t": [0], "matrix": [[1.0, 1.0],[1.0, 0.0]]}, ... ]
//   }
// Matrix entries are numbers or [re,im] pairs. A missing -T partner is filled
// in as the adjoint; an inconsistent one is an error.

namespace detail {

inline cplx json_to_cplx(const nlohmann::json& j) {
  if (j.is_number()) return cplx(j.get<double>(), 0.0);
  if (j.is_array() && j.size() == 2) return cplx(j[0].get<double>(), j[1].get<double>());
  throw ConfigError("model file: matrix entries must be numbers or [re,im] pairs");
}

inline nlohmann::json cplx_to_json(cplx v) {
  if (v.imag() == 0.0) return v.real();
  return nlohmann::json::array({v.real(), v.imag()});
}

}  // namespace detail

inline TightBindingModel model_from_json(const nlohmann::json& j) {
  TightBindingModel m;
  try {
    m.dim = j.at("dim").get<int>();
    m.orbitals = j.at("orbitals").get<int>();
    const auto& lv = j.at("lattice_vectors");
    m.lattice_vectors.resize(m.dim, m.dim);
    for (int i = 0; i < m.dim; ++i)
      for (int a = 0; a < m.dim; ++a) m.lattice_vectors(a, i) = lv.at(i).at(a).get<double>();
    if (j.contains("labels")) m.labels = j["labels"].get<std::vector<std::string>>();
    m.orbital_positions = Eigen::MatrixXd::Zero(m.dim, m.orbitals);
    if (j.contains("orbital_positions"))
      for (int o = 0; o < m.orbitals; ++o)
        for (int a = 0; a < m.dim; ++a)
          m.orbital_positions(a, o) = j["orbital_positions"].at(o).at(a).get<double>();
    for (const auto& h : j.at("hoppings")) {
      Eigen::VectorXi t(m.dim);
      for (int a = 0; a < m.dim; ++a) t(a) = h.at("t").at(a).get<int>();
      Eigen::MatrixXcd mat(m.orbitals, m.orbitals);
      for (int r = 0; r < m.orbitals; ++r)
        for (int c = 0; c < m.orbitals; ++c)
          mat(r, c) = detail::json_to_cplx(h.at("matrix").at(r).at(c));
      m.add_hopping(t, mat);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model file: ") + e.what());
  }
  // complete missing hermitian partners
  for (std::size_t i = 0; i < m.hoppings.size(); ++i) {
    const Eigen::VectorXi t = m.hoppings[i].first;
    const Eigen::MatrixXcd mat = m.hoppings[i].second;
    if (!m.hop(-t)) m.add_hopping((-t).eval(), mat.adjoint());
  }
  try {
    m.check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model file: ") + e.what());
  }
  return m;
}

inline nlohmann::json model_to_json(const TightBindingModel& m) {
  nlohmann::ordered_json j;
  j["dim"] = m.dim;
  j["orbitals"] = m.orbitals;
  auto lv = nlohmann::json::array();
  for (int i = 0; i < m.dim; ++i) {
    auto row = nlohmann::json::array();
    for (int a = 0; a < m.dim; ++a) row.push_back(m.lattice_vectors(a, i));
    lv.push_back(row);
  }
  j["lattice_vectors"] = lv;
  if (!m.labels.empty()) j["labels"] = m.labels;
  auto pos = nlohmann::json::array();
  for (int o = 0; o < m.orbitals; ++o) {
    auto row = nlohmann::json::array();
    for (int a = 0; a < m.dim; ++a) row.push_back(m.orbital_positions(a, o));
    pos.push_back(row);
  }
  j["orbital_positions"] = pos;
  nlohmann::ordered_json hs = nlohmann::ordered_json::array();
  for (const auto& [t, mat] : m.hoppings) {
    nlohmann::ordered_json h;
    auto tv = nlohmann::json::array();
    for (int a = 0; a < m.dim; ++a) tv.push_back(t(a));
    h["t"] = tv;
    auto rows = nlohmann::json::array();
    for (int r = 0; r < m.orbitals; ++r) {
      auto row = nlohmann::json::array();
      for (int c = 0; c < m.orbitals; ++c) row.push_back(detail::cplx_to_json(mat(r, c)));
      rows.push_back(row);
    }
    h["matrix"] = rows;
    hs.push_back(h);
  }
  j["hoppings"] = hs;
  return j;
}

inline TightBindingModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("model file: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model file '" + path + "': " + e.what());
  }
  return model_from_json(j);
}

}  // namespace bcd
