// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCHKIT_TOOLS_COMMANDS_HPP
#define BLOCHKIT_TOOLS_COMMANDS_HPP

#include <filesystem>
#include <string>

#include "config.hpp"

namespace blochkit::cli
{

struct CommandContext
{
  std::string command;
  RunConfig config;
  std::filesystem::path out_dir;
};

// Each returns the process exit code. Config problems throw ConfigError,
// solver problems throw blochkit::Error.
int CmdBands(const CommandContext &ctx);
int CmdGaps(const CommandContext &ctx);
int CmdEdge(const CommandContext &ctx);
int CmdSplit(const CommandContext &ctx);
int CmdSplitMulti(const CommandContext &ctx);
int CmdGlobalSimple(const CommandContext &ctx);
int CmdHomog(const CommandContext &ctx);
int CmdCompareResolvents(const CommandContext &ctx);
int CmdValidate(const CommandContext &ctx);

}  // namespace blochkit::cli

#endif  // BLOCHKIT_TOOLS_COMMANDS_HPP
