// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

namespace blochkit::cli
{

namespace
{

nlohmann::ordered_json ParseValue(const std::string &text)
{
  try
  {
    return nlohmann::ordered_json::parse(text);
  }
  catch (const nlohmann::json::parse_error &)
  {
    return text;
  }
}

}  // namespace

std::string Sha256Hex(const std::string &bytes)
{
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
  {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static const char *hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; i++)
  {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

RunConfig RunConfig::Load(const std::string &path, const std::vector<std::string> &overrides,
                          std::int64_t seed, int threads)
{
  RunConfig cfg;
  cfg.doc_ = nlohmann::ordered_json::object();
  if (!path.empty())
  {
    std::ifstream in(path);
    if (!in)
    {
      throw ConfigError("cannot open config file " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    try
    {
      cfg.doc_ = nlohmann::ordered_json::parse(ss.str());
    }
    catch (const nlohmann::json::parse_error &e)
    {
      throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    if (!cfg.doc_.is_object())
    {
      throw ConfigError("config " + path + " must be a JSON object");
    }
    cfg.base_dir_ = std::filesystem::absolute(path).parent_path().string();
  }
  else
  {
    cfg.base_dir_ = std::filesystem::current_path().string();
  }
  for (const auto &ov : overrides)
  {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0)
    {
      throw ConfigError("override '" + ov + "' is not of the form key=value");
    }
    cfg.doc_[ov.substr(0, eq)] = ParseValue(ov.substr(eq + 1));
  }
  if (seed >= 0)
  {
    cfg.doc_["seed"] = seed;
  }
  if (threads > 0)
  {
    cfg.doc_["threads"] = threads;
  }
  if (!cfg.doc_.contains("seed"))
  {
    cfg.doc_["seed"] = 0;
  }
  // The thread count never changes results, so it stays out of the digest.
  nlohmann::ordered_json digest_doc = cfg.doc_;
  digest_doc.erase("threads");
  cfg.digest_ = Sha256Hex(digest_doc.dump());
  cfg.Seed();
  return cfg;
}

std::uint64_t RunConfig::Seed() const
{
  const auto &s = doc_.at("seed");
  if (!s.is_number_integer() || s.get<std::int64_t>() < 0)
  {
    throw ConfigError("seed must be a nonnegative integer");
  }
  return s.get<std::uint64_t>();
}

int RunConfig::Threads() const { return Integer("threads", 1); }

const nlohmann::ordered_json &RunConfig::At(const std::string &key) const
{
  if (!doc_.contains(key))
  {
    throw ConfigError("missing config key '" + key + "'");
  }
  return doc_.at(key);
}

double RunConfig::Number(const std::string &key, double fallback) const
{
  if (!doc_.contains(key))
  {
    return fallback;
  }
  const auto &v = doc_.at(key);
  if (!v.is_number())
  {
    throw ConfigError("config key '" + key + "' must be a number");
  }
  return v.get<double>();
}

int RunConfig::Integer(const std::string &key, int fallback) const
{
  if (!doc_.contains(key))
  {
    return fallback;
  }
  const auto &v = doc_.at(key);
  if (!v.is_number_integer())
  {
    throw ConfigError("config key '" + key + "' must be an integer");
  }
  return v.get<int>();
}

std::string RunConfig::Text(const std::string &key, const std::string &fallback) const
{
  if (!doc_.contains(key))
  {
    return fallback;
  }
  const auto &v = doc_.at(key);
  if (!v.is_string())
  {
    throw ConfigError("config key '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

std::vector<double> RunConfig::Numbers(const std::string &key,
                                       const std::vector<double> &fallback) const
{
  if (!doc_.contains(key))
  {
    return fallback;
  }
  const auto &v = doc_.at(key);
  std::vector<double> out;
  if (v.is_number())
  {
    out.push_back(v.get<double>());
    return out;
  }
  if (!v.is_array())
  {
    throw ConfigError("config key '" + key + "' must be a number list");
  }
  for (const auto &x : v)
  {
    if (!x.is_number())
    {
      throw ConfigError("config key '" + key + "' must contain numbers only");
    }
    out.push_back(x.get<double>());
  }
  return out;
}

std::string RunConfig::Path(const std::string &key) const
{
  const std::filesystem::path p(Text(key, ""));
  if (p.empty())
  {
    throw ConfigError("missing config key '" + key + "'");
  }
  return p.is_absolute() ? p.string() : (std::filesystem::path(base_dir_) / p).string();
}

}  // namespace blochkit::cli
