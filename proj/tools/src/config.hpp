// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCHKIT_TOOLS_CONFIG_HPP
#define BLOCHKIT_TOOLS_CONFIG_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace blochkit::cli
{

// Raised for anything wrong with the run configuration; maps to exit code 2.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Effective run configuration: the JSON file with command-line overrides
// merged on top. Keys missing from both fall back to the defaults below.
class RunConfig
{
public:
  // Loads path ("" for none), applies "key=value" overrides (value parsed as
  // JSON, else taken as a string) and the common flags.
  static RunConfig Load(const std::string &path, const std::vector<std::string> &overrides,
                        std::int64_t seed, int threads);

  const nlohmann::ordered_json &Json() const { return doc_; }
  std::string Digest() const { return digest_; }
  std::uint64_t Seed() const;
  int Threads() const;

  bool Has(const std::string &key) const { return doc_.contains(key); }
  double Number(const std::string &key, double fallback) const;
  int Integer(const std::string &key, int fallback) const;
  std::string Text(const std::string &key, const std::string &fallback) const;
  std::vector<double> Numbers(const std::string &key, const std::vector<double> &fallback) const;
  // Path relative to the config file directory.
  std::string Path(const std::string &key) const;
  const nlohmann::ordered_json &At(const std::string &key) const;

private:
  nlohmann::ordered_json doc_;
  std::string base_dir_;
  std::string digest_;
};

// Hex SHA-256 of a byte string.
std::string Sha256Hex(const std::string &bytes);

}  // namespace blochkit::cli

#endif  // BLOCHKIT_TOOLS_CONFIG_HPP
