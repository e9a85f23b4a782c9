// mfchaos: rates, assumption checks and coupled propagation-of-chaos runs.
#include <fmt/core.h>

#include <cstdint>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "mfchaos/config.hpp"
#include "mfchaos/errors.hpp"
#include "mfchaos/experiments.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitHypothesis = 2;
constexpr int kExitNumerical = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field particle systems: coupling rates and propagation-of-chaos experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--config", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides output_dir)");
  app.add_option("--seed", seed, "random seed (overrides seed)");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  auto* rates = app.add_subcommand("rates", "compute R0, R1, c, f and write rate_profile.json");
  auto* validate = app.add_subcommand("validate", "check the hypotheses and the f inequality");
  auto* poc = app.add_subcommand("poc-scaling", "plateau distance against N");
  auto* contraction = app.add_subcommand("contraction", "distance against t with envelope");
  auto* moments = app.add_subcommand("moments", "second moment against the Gronwall bound");

  CLI11_PARSE(app, argc, argv);

  try {
    mfchaos::ExperimentConfig config = mfchaos::load_config(config_path);
    if (out_dir) config.output_dir = *out_dir;
    if (seed) config.seed = *seed;
    const mfchaos::RunOptions options{threads, config.output_dir};

    if (rates->parsed()) {
      fmt::print("{}", mfchaos::cmd_rates(config, options).text);
      return 0;
    }
    if (validate->parsed()) {
      const auto out = mfchaos::cmd_validate(config, options);
      fmt::print("{}", out.text);
      return out.exit_code;
    }
    mfchaos::ExperimentResult res;
    if (poc->parsed()) {
      res = mfchaos::cmd_poc_scaling(config, options);
    } else if (contraction->parsed()) {
      res = mfchaos::cmd_contraction(config, options);
    } else if (moments->parsed()) {
      res = mfchaos::cmd_moments(config, options);
    }
    fmt::print("{}verdict: {}\nwrote {}/results.csv and summary.json\n", res.text,
               res.passed ? "pass" : "FAIL", options.out_dir);
    return 0;
  } catch (const mfchaos::HypothesisError& e) {
    fmt::print(stderr, "hypothesis violated: {}\n", e.what());
    return kExitHypothesis;
  } catch (const mfchaos::NumericalError& e) {
    fmt::print(stderr, "numerical failure: {}\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitConfig;
  }
}
