// SPDX-License-Identifier: Apache-2.0

#include "output.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <spdlog/spdlog.h>

namespace blochkit::cli
{

namespace
{

std::string WriteFile(const CommandContext &ctx, const std::string &name, const std::string &text)
{
  std::filesystem::create_directories(ctx.out_dir);
  const std::filesystem::path p = ctx.out_dir / name;
  std::ofstream out(p, std::ios::binary);
  if (!out)
  {
    throw ConfigError("cannot write " + p.string());
  }
  out << text;
  spdlog::info("wrote {}", p.string());
  return p.string();
}

}  // namespace

std::string Num(double x)
{
  if (std::isnan(x))
  {
    return "nan";
  }
  if (std::isinf(x))
  {
    return x > 0 ? "inf" : "-inf";
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.16e", x);
  return buf;
}

ojson VectorJson(const RVector &v)
{
  ojson a = ojson::array();
  for (int i = 0; i < v.size(); i++)
  {
    a.push_back(v(i));
  }
  return a;
}

ojson MatrixJson(const RMatrix &m)
{
  ojson a = ojson::array();
  for (int i = 0; i < m.rows(); i++)
  {
    a.push_back(VectorJson(m.row(i).transpose()));
  }
  return a;
}

ojson Provenance(const CommandContext &ctx)
{
  ojson p;
  p["tool"] = "blochkit";
  p["version"] = BLOCHKIT_VERSION;
  p["command"] = ctx.command;
  p["config_sha256"] = ctx.config.Digest();
  p["seed"] = ctx.config.Seed();
  return p;
}

CsvWriter::CsvWriter(const CommandContext &ctx, std::string name) : ctx_(ctx), name_(std::move(name))
{
  body_ += "# tool blochkit " + std::string(BLOCHKIT_VERSION) + "\n";
  body_ += "# command " + ctx.command + "\n";
  body_ += "# config_sha256 " + ctx.config.Digest() + "\n";
  body_ += "# seed " + std::to_string(ctx.config.Seed()) + "\n";
}

void CsvWriter::Header(const std::vector<std::string> &columns) { Row(columns); }

void CsvWriter::Row(const std::vector<std::string> &cells)
{
  for (std::size_t i = 0; i < cells.size(); i++)
  {
    body_ += (i ? "," : "") + cells[i];
  }
  body_ += "\n";
}

void CsvWriter::Block(const std::string &name, const ojson &doc)
{
  body_ += "# " + name + " " + doc.dump() + "\n";
}

std::string CsvWriter::Close() { return WriteFile(ctx_, name_, body_); }

std::string WriteJson(const CommandContext &ctx, const std::string &name, ojson doc)
{
  ojson out;
  out["provenance"] = Provenance(ctx);
  for (auto it = doc.begin(); it != doc.end(); ++it)
  {
    out[it.key()] = it.value();
  }
  return WriteFile(ctx, name, out.dump(2) + "\n");
}

}  // namespace blochkit::cli
