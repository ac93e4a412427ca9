#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "bcd/defect.hpp"
#include "bcd/model_io.hpp"
#include "bcd/models.hpp"
#include "bcd/types.hpp"

namespace bcd {

// One run = one config. Flags override file values; the effective config is
// echoed into the run manifest so every figure records its (N, alpha, dE).
struct RunConfig {
  std::string command;
  std::string model = "diatomic(1,0)";
  std::string defect = "none";

  double energy = 0;
  bool adaptive = false;
  double alpha = 0.3;
  double delta_e = 0.5;
  int nk = 50;

  std::array<double, 4> window{0, 1, -1, 0.05};  // re0, re1, im0, im1
  std::array<int, 2> resolution{60, 40};
  std::vector<cplx> seeds;
  std::string out = "out.csv";
  int workers = 0;

  std::string mode = "adaptive";  // greenmap/scan: undeformed | fixed | adaptive
  double eta = 0.3;               // smearing width for dos
  std::array<double, 2> erange{-3.5, 3.5};
  int epoints = 141;
  int state_radius = 0;  // refine: emit resonant-state samples within this cell radius
  int rmax = 4;          // validate: largest |R - R'| the run will request

  // free1d
  double box_length = 10.0;
  double step = 0.05;
  double theta = 0.0;
  std::string potential = "double-well";

  void check() const {
    if (nk < 2) throw ConfigError("config: nk must be >= 2");
    for (double v : window)
      if (!std::isfinite(v)) throw ConfigError("config: window must be finite");
    if (!std::isfinite(energy) || !std::isfinite(alpha) || !std::isfinite(delta_e))
      throw ConfigError("config: numeric fields must be finite");
    if (resolution[0] < 1 || resolution[1] < 1) throw ConfigError("config: resolution must be >= 1");
  }
};

inline nlohmann::ordered_json config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["command"] = c.command;
  j["model"] = c.model;
  j["defect"] = c.defect;
  j["energy"] = c.energy;
  j["adaptive"] = c.adaptive;
  j["alpha"] = c.alpha;
  j["delta_e"] = c.delta_e;
  j["nk"] = c.nk;
  j["window"] = c.window;
  j["resolution"] = c.resolution;
  auto seeds = nlohmann::json::array();
  for (cplx s : c.seeds) seeds.push_back({s.real(), s.imag()});
  j["seeds"] = seeds;
  j["out"] = c.out;
  j["workers"] = c.workers;
  j["mode"] = c.mode;
  j["eta"] = c.eta;
  j["erange"] = c.erange;
  j["epoints"] = c.epoints;
  j["state_radius"] = c.state_radius;
  j["rmax"] = c.rmax;
  j["box_length"] = c.box_length;
  j["step"] = c.step;
  j["theta"] = c.theta;
  j["potential"] = c.potential;
  return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
    };
    get("command", c.command);
    get("model", c.model);
    get("defect", c.defect);
    get("energy", c.energy);
    get("adaptive", c.adaptive);
    get("alpha", c.alpha);
    get("delta_e", c.delta_e);
    get("nk", c.nk);
    get("window", c.window);
    get("resolution", c.resolution);
    if (j.contains("seeds"))
      for (const auto& s : j["seeds"]) c.seeds.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
    get("out", c.out);
    get("workers", c.workers);
    get("mode", c.mode);
    get("eta", c.eta);
    get("erange", c.erange);
    get("epoints", c.epoints);
    get("state_radius", c.state_radius);
    get("rmax", c.rmax);
    get("box_length", c.box_length);
    get("step", c.step);
    get("theta", c.theta);
    get("potential", c.potential);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

// "name(p1,p2,...)" -> name + params
inline std::pair<std::string, std::vector<double>> parse_call(const std::string& spec) {
  auto open = spec.find('(');
  if (open == std::string::npos) return {spec, {}};
  if (spec.back() != ')') throw ConfigError("bad spec '" + spec + "'");
  std::string name = spec.substr(0, open);
  std::vector<double> params;
  std::string body = spec.substr(open + 1, spec.size() - open - 2);
  std::size_t pos = 0;
  while (pos < body.size()) {
    std::size_t comma = body.find(',', pos);
    std::string tok = body.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      params.push_back(std::stod(tok));
    } catch (...) {
      throw ConfigError("bad numeric parameter in '" + spec + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return {name, params};
}

inline TightBindingModel model_from_spec(const std::string& spec) {
  if (spec.rfind("file:", 0) == 0) return load_model_file(spec.substr(5));
  if (spec.size() > 5 && spec.substr(spec.size() - 5) == ".json") return load_model_file(spec);
  auto [name, p] = parse_call(spec);
  auto arg = [&](std::size_t i, double dflt) { return i < p.size() ? p[i] : dflt; };
  if (name == "diatomic") return make_diatomic(arg(0, 1.0), arg(1, 0.0));
  if (name == "graphene") return make_graphene(arg(0, 1.0));
  if (name == "chain1band") return make_chain1band(arg(0, 1.0));
  if (name == "flatband") return make_flatband(arg(0, 0.0));
  throw ConfigError("unknown model '" + spec + "'");
}

inline std::optional<DefectOperator> defect_from_spec(const std::string& spec,
                                                      const TightBindingModel& model) {
  if (spec.empty() || spec == "none") return std::nullopt;
  auto [name, p] = parse_call(spec);
  auto arg = [&](std::size_t i, double dflt) { return i < p.size() ? p[i] : dflt; };
  if (name == "bond") {
    if (model.dim != 1 || model.orbitals != 2)
      throw ConfigError("defect 'bond' expects the diatomic chain");
    return make_diatomic_defect(arg(0, 0.2));
  }
  if (name == "adatom")
    return make_adatom_defect(arg(0, 0.4), arg(1, 2.0), static_cast<int>(arg(2, 0)), model.dim);
  throw ConfigError("unknown defect '" + spec + "'");
}

}  // namespace bcd
