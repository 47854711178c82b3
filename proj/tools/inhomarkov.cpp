#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "inhomarkov/config.hpp"
#include "inhomarkov/pipeline.hpp"

namespace {

constexpr int kExitNumerical = 1;
constexpr int kExitInput = 2;

}  // namespace

int main(int argc, char** argv) {
  using namespace inhomarkov;
  using Stage = std::function<void(const RunConfig&, std::ostream&)>;
  const std::map<std::string, Stage> stages{
      {"ingest", cmd_ingest}, {"train", cmd_train}, {"diagnose", cmd_diagnose},
      {"ck", cmd_ck},         {"eval", cmd_eval},   {"synth", cmd_synth},
  };

  CLI::App app{"Inhomogeneous Markov operators for discretized return series"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  for (const auto& name : {"ingest", "train", "diagnose", "ck", "eval", "synth"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "run configuration file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides run.out)");
    sub->add_option("--seed", seed, "master seed (overrides run.seed)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    RunConfig config = load_run_config(config_path);
    if (out_dir) config.out_dir = *out_dir;
    if (seed) config.seed = *seed;
    const std::string name = app.get_subcommands().front()->get_name();
    stages.at(name)(config, std::cout);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return 0;
}
