// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCHKIT_TOOLS_OUTPUT_HPP
#define BLOCHKIT_TOOLS_OUTPUT_HPP

#include <string>
#include <vector>

#include "blochkit/fourier.hpp"
#include "commands.hpp"
#include "json.hpp"

namespace blochkit::cli
{

using ojson = nlohmann::ordered_json;

// Full-precision scientific notation.
std::string Num(double x);

ojson VectorJson(const RVector &v);
ojson MatrixJson(const RMatrix &m);

// CSV with "# key value" provenance lines before the header.
class CsvWriter
{
public:
  CsvWriter(const CommandContext &ctx, std::string name);
  void Header(const std::vector<std::string> &columns);
  void Row(const std::vector<std::string> &cells);
  // Trailing "# name {json}" line.
  void Block(const std::string &name, const ojson &doc);
  // Writes the file; returns its path.
  std::string Close();

private:
  const CommandContext &ctx_;
  std::string name_;
  std::string body_;
};

// Writes doc with a "provenance" member to out_dir/name.
std::string WriteJson(const CommandContext &ctx, const std::string &name, ojson doc);

ojson Provenance(const CommandContext &ctx);

}  // namespace blochkit::cli

#endif  // BLOCHKIT_TOOLS_OUTPUT_HPP
