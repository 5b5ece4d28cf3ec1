// Command-line front end: runs scenario files, compares theories on one
// scenario, and executes the built-in consistency checks.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spinjump/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CommonOpts {
  std::string output_dir = ".";
  std::optional<std::uint64_t> seed_override;
  std::optional<int> threads_override;
  bool quiet = false;
};

std::optional<spinjump::ScenarioConfig> load_config(const std::string& path,
                                                    const CommonOpts& opts) {
  const auto text = read_file(path);
  if (!text) {
    std::cerr << "error: cannot read config file '" << path << "'\n";
    return std::nullopt;
  }
  spinjump::ParseResult parsed = spinjump::parse_config(*text);
  if (!parsed.ok()) {
    std::cerr << "invalid config '" << path << "':\n";
    for (const std::string& e : parsed.errors) std::cerr << "  " << e << "\n";
    return std::nullopt;
  }
  spinjump::ScenarioConfig cfg = *parsed.config;
  if (opts.seed_override) cfg.seed = *opts.seed_override;
  if (opts.threads_override) cfg.threads = *opts.threads_override;
  return cfg;
}

std::optional<spinjump::TheorySelector> theory_from_name(const std::string& name) {
  using spinjump::TheorySelector;
  if (name == "haberkorn") return TheorySelector::Haberkorn;
  if (name == "jones_hore") return TheorySelector::JonesHore;
  if (name == "kominis_nonreacting") return TheorySelector::KominisNonReacting;
  if (name == "kominis_revised") return TheorySelector::KominisRevised;
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spinjump: spin-selective radical-pair reaction dynamics"};
  app.set_version_flag("--version",
                       std::string(spinjump::kToolName) + " " + spinjump::kToolVersion);
  app.require_subcommand(1);

  CommonOpts opts;
  std::string config_path;
  std::string theories_arg;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--output-dir", opts.output_dir, "Directory for output files");
    cmd->add_option("--seed", opts.seed_override, "Override the config seed");
    cmd->add_option("--threads", opts.threads_override, "Override the config thread count");
    cmd->add_flag("--quiet", opts.quiet, "Suppress progress output");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "Run one scenario config");
  run_cmd->add_option("config", config_path, "Scenario config file")->required();
  add_common(run_cmd);

  CLI::App* compare_cmd =
      app.add_subcommand("compare", "Run one scenario under several theories");
  compare_cmd->add_option("config", config_path, "Scenario config file")->required();
  compare_cmd->add_option("--theories", theories_arg,
                          "Comma-separated theory names (default: all four)");
  add_common(compare_cmd);

  CLI::App* selftest_cmd =
      app.add_subcommand("selftest", "Run the built-in consistency checks");
  add_common(selftest_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (selftest_cmd->parsed()) {
      const bool ok = spinjump::selftest(std::cout);
      std::cout << (ok ? "selftest passed" : "selftest FAILED") << "\n";
      return ok ? kExitOk : kExitValidation;
    }

    const auto cfg = load_config(config_path, opts);
    if (!cfg) return kExitValidation;

    if (run_cmd->parsed()) {
      const spinjump::RunOutput out = spinjump::run_scenario(*cfg, opts.output_dir);
      if (!opts.quiet) {
        std::cout << "wrote " << out.timeseries_path << "\n";
        std::cout << "wrote " << out.summary_path << "\n";
      }
      return kExitOk;
    }

    // compare
    std::vector<spinjump::TheorySelector> theories;
    if (theories_arg.empty()) {
      theories = {spinjump::TheorySelector::Haberkorn, spinjump::TheorySelector::JonesHore,
                  spinjump::TheorySelector::KominisNonReacting,
                  spinjump::TheorySelector::KominisRevised};
    } else {
      std::stringstream ss(theories_arg);
      std::string name;
      while (std::getline(ss, name, ',')) {
        const auto theory = theory_from_name(name);
        if (!theory) {
          std::cerr << "error: unknown theory '" << name << "'\n";
          return kExitValidation;
        }
        theories.push_back(*theory);
      }
    }
    if (cfg->mode != spinjump::RunMode::MasterEquation) {
      std::cerr << "error: compare requires a master-equation config (key 'theory')\n";
      return kExitValidation;
    }
    const spinjump::RunOutput out =
        spinjump::compare_theories(*cfg, theories, opts.output_dir);
    if (!opts.quiet) {
      std::cout << "wrote " << out.timeseries_path << "\n";
      std::cout << "wrote " << out.summary_path << "\n";
    }
    return kExitOk;
  } catch (const spinjump::NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
