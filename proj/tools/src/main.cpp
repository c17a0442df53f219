// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "blochkit/errors.hpp"
#include "commands.hpp"

namespace
{

using blochkit::ErrorCode;
using blochkit::cli::CommandContext;

// Input problems exit with 2, numerical failures with 3.
int ExitCodeFor(ErrorCode code)
{
  switch (code)
  {
    case ErrorCode::BadShape:
    case ErrorCode::NotCoercive:
    case ErrorCode::InvalidField:
    case ErrorCode::InvalidArgument:
    case ErrorCode::StepTooLarge:
      return 2;
    default:
      return 3;
  }
}

}  // namespace

int main(int argc, char **argv)
{
  auto logger = spdlog::stderr_color_mt("blochkit");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Bloch spectra, band-edge models and resolvent comparisons for periodic "
               "divergence-form operators"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = ".";
  std::int64_t seed = -1;
  int threads = 0;
  std::vector<std::string> overrides;
  bool verbose = false;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out-dir", out_dir, "directory for output files");
  app.add_option("--seed", seed, "random seed (overrides the config)")->check(CLI::NonNegativeNumber);
  app.add_option("--threads", threads, "worker threads; results do not depend on it")
      ->check(CLI::PositiveNumber);
  app.add_option("--set", overrides, "config override key=value (value parsed as JSON)");
  app.add_flag("-v,--verbose", verbose, "debug logging");

  using Handler = std::function<int(const CommandContext &)>;
  const std::vector<std::tuple<std::string, std::string, Handler>> table = {
      {"bands", "band functions on the quasimomentum grid", blochkit::cli::CmdBands},
      {"gaps", "spectral gaps with edge diagnostics", blochkit::cli::CmdGaps},
      {"edge", "edge points and quadratic models of one gap edge", blochkit::cli::CmdEdge},
      {"split", "first-order splitting perturbation at one point", blochkit::cli::CmdSplit},
      {"split-multi", "scalar perturbation splitting several points", blochkit::cli::CmdSplitMulti},
      {"global-simple", "fibered cover making one band simple everywhere",
       blochkit::cli::CmdGlobalSimple},
      {"homog", "resolvent versus effective resolvent near a gap edge", blochkit::cli::CmdHomog},
      {"compare-resolvents", "projected resolvent norms near the edge points",
       blochkit::cli::CmdCompareResolvents},
      {"validate", "consistency checks of a coefficient field", blochkit::cli::CmdValidate},
  };
  std::map<CLI::App *, const Handler *> handlers;
  for (const auto &[name, help, fn] : table)
  {
    handlers[app.add_subcommand(name, help)] = &fn;
  }

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError &e)
  {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (verbose)
  {
    spdlog::set_level(spdlog::level::debug);
  }

  CLI::App *sub = app.get_subcommands().front();
  try
  {
    CommandContext ctx{sub->get_name(),
                       blochkit::cli::RunConfig::Load(config_path, overrides, seed, threads),
                       out_dir};
    return (*handlers.at(sub))(ctx);
  }
  catch (const blochkit::cli::ConfigError &e)
  {
    spdlog::error("{}", e.what());
    return 2;
  }
  catch (const blochkit::Error &e)
  {
    spdlog::error("{}", e.what());
    return ExitCodeFor(e.code());
  }
  catch (const std::exception &e)
  {
    spdlog::error("{}", e.what());
    return 3;
  }
}
