#include "psamp/bench.hpp"

#include <CLI11.hpp>

#include <exception>
#include <iostream>

namespace {

// Leftover --key=value tokens become config overrides.
std::vector<std::string> collect_overrides(const std::vector<std::string>& extras) {
  std::vector<std::string> out;
  for (const std::string& e : extras) {
    if (e.rfind("--", 0) == 0 && e.find('=') != std::string::npos) {
      out.push_back(e.substr(2));
    } else {
      throw CLI::ParseError("unrecognized argument: " + e, 2);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"psamp: exact accelerated sampling for discrete autoregressive models"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration")->capture_default_str();

  auto* train = app.add_subcommand("train", "train a model (and forecast heads) from a config");
  auto* bench = app.add_subcommand("bench", "measure call counts per strategy/seed/batch");
  auto* maps = app.add_subcommand("maps", "emit sample, mistake and convergence PGM maps");
  auto* ablate = app.add_subcommand("ablate", "reparametrization and representation ablations");
  auto* verify = app.add_subcommand("verify", "randomized exactness sweep");
  for (auto* sc : {train, bench, maps, ablate, verify}) sc->allow_extras();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    psamp::RunConfig cfg = psamp::load_config(config_path, collect_overrides(sub->remaining()));
    if (sub == train) return psamp::run_train(cfg);
    if (sub == bench) return psamp::run_bench(cfg);
    if (sub == maps) return psamp::run_maps(cfg);
    if (sub == ablate) return psamp::run_ablate(cfg);
    return psamp::run_verify(cfg);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
