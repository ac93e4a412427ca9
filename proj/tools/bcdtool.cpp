// bcdtool: Green functions of periodic tight-binding crystals by complex
// deformation of the Brillouin zone, and defect resonances through the
// integral equation phi = V R0(z) phi.
//
// Subcommands: bands, greenmap, dos, scan, refine, free1d, validate.
// A JSON config (--config) supplies defaults; flags override. Environment
// overrides use the BCD_ prefix (BCD_WORKERS, BCD_NK, ...).

#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "bcd/commands.hpp"
#include "bcd/parallel.hpp"

namespace {

// --config is honored before flag parsing so flags can override file values
std::string preparse_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return {};
}

void add_common(CLI::App* cmd, bcd::RunConfig& c) {
  cmd->add_option("--config", "JSON run config (parsed before flags)");
  cmd->add_option("--model", c.model, "model spec: diatomic(Ea,Eb), graphene(t), chain1band(t), flatband(E0), or a .json file");
  cmd->add_option("--defect", c.defect, "defect spec: bond(eps), adatom(eps,Ed[,attach]), none");
  cmd->add_option("--energy", c.energy, "deformation target energy E")->envname("BCD_ENERGY");
  cmd->add_flag("--adaptive", c.adaptive, "retarget the deformation at Re z per column/seed");
  cmd->add_option("--alpha", c.alpha, "deformation amplitude")->envname("BCD_ALPHA");
  cmd->add_option("--delta-e", c.delta_e, "energy window Delta E")->envname("BCD_DELTA_E");
  cmd->add_option("--nk", c.nk, "Monkhorst-Pack points per dimension")->envname("BCD_NK");
  cmd->add_option("--window", c.window, "complex window: re0 re1 im0 im1")->expected(4);
  cmd->add_option("--resolution", c.resolution, "grid nodes: n_re n_im")->expected(2);
  cmd->add_option("--seed-z", [&c](const std::vector<std::string>& vals) {
        for (std::size_t i = 0; i + 1 < vals.size(); i += 2)
          c.seeds.push_back({std::stod(vals[i]), std::stod(vals[i + 1])});
        return true;
      },
      "Newton seed: re im (repeatable)")
      ->expected(2)
      ->allow_extra_args();
  cmd->add_option("--out", c.out, "output path");
  cmd->add_option("--workers", c.workers, "max worker threads (0 = all cores)")
      ->envname("BCD_WORKERS");
}

}  // namespace

int main(int argc, char** argv) {
  bcd::RunConfig config;
  try {
    std::string cfg = preparse_config_path(argc, argv);
    if (!cfg.empty()) config = bcd::load_config_file(cfg);
  } catch (const bcd::ConfigError& e) {
    std::cerr << "ConfigError: " << e.what() << "\n";
    return 2;
  }

  CLI::App app{"Brillouin-zone complex deformation toolkit"};
  app.require_subcommand(1);

  auto* bands = app.add_subcommand("bands", "band structure sweep (CSV)");
  add_common(bands, config);

  auto* greenmap = app.add_subcommand("greenmap", "trace-per-cell map over a complex-z window");
  add_common(greenmap, config);
  greenmap->add_option("--mode", config.mode, "undeformed | fixed | adaptive");

  auto* dos = app.add_subcommand("dos", "density of states, BCD and Gaussian smearing");
  add_common(dos, config);
  dos->add_option("--eta", config.eta, "smearing width");
  dos->add_option("--e-range", config.erange, "sweep range: e0 e1")->expected(2);
  dos->add_option("--e-points", config.epoints, "sweep points");

  auto* scan = app.add_subcommand("scan", "log10 sigma_min(1 - V R0(z)) landscape");
  add_common(scan, config);
  scan->add_option("--mode", config.mode, "fixed | adaptive");

  auto* refine = app.add_subcommand("refine", "Newton-refine resonances from seeds");
  add_common(refine, config);
  refine->add_option("--state-radius", config.state_radius,
                     "emit resonant-state samples within this cell radius");

  auto* free1d = app.add_subcommand("free1d", "free-Laplacian double-well test bed");
  add_common(free1d, config);
  free1d->add_option("--box-length", config.box_length, "domain [-L/2, L/2]");
  free1d->add_option("--step", config.step, "finite-difference step h");
  free1d->add_option("--theta", config.theta, "complex-scaling angle (0 = skip)");
  free1d->add_option("--scan-window", config.window, "alias of --window")->expected(4);
  free1d->add_option("--potential", config.potential, "named potential (double-well)");

  auto* validate = app.add_subcommand("validate", "parameter rules of thumb");
  add_common(validate, config);
  validate->add_option("--rmax", config.rmax, "largest |R - R'| the run will request");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  config.command = app.get_subcommands().front()->get_name();
  bcd::set_max_workers(config.workers);
  try {
    bcd::dispatch(config);
  } catch (const bcd::ConfigError& e) {
    std::cerr << "ConfigError: " << e.what() << "\n";
    return 2;
  } catch (const bcd::SingularKPoint& e) {
    std::cerr << "SingularKPoint: " << e.what() << "\n";
    return 3;
  } catch (const bcd::NoConvergence& e) {
    std::cerr << "NoConvergence: " << e.what() << "\n";
    return 3;
  } catch (const bcd::DivergedOutsideWindow& e) {
    std::cerr << "DivergedOutsideWindow: " << e.what() << "\n";
    return 3;
  } catch (const bcd::BranchPoint& e) {
    std::cerr << "BranchPoint: " << e.what() << "\n";
    return 3;
  } catch (const bcd::PatternMismatch& e) {
    std::cerr << "PatternMismatch: " << e.what() << "\n";
    return 3;
  } catch (const bcd::DegenerateResonance& e) {
    std::cerr << "DegenerateResonance: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "ConfigError: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
