// SPDX-License-Identifier: Apache-2.0

#include "blochkit/field_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "blochkit/errors.hpp"
#include "json.hpp"

namespace blochkit
{

namespace
{

using nlohmann::json;

constexpr double kInvariantTol = 1e-10;

json ParseJson(const std::string &text)
{
  try
  {
    return json::parse(text);
  }
  catch (const json::exception &e)
  {
    throw Error(ErrorCode::InvalidField, std::string("malformed field document: ") + e.what());
  }
}

template <typename T>
T GetKey(const json &doc, const char *key)
{
  Require(doc.contains(key), ErrorCode::InvalidField, std::string("missing key '") + key + "'");
  try
  {
    return doc.at(key).get<T>();
  }
  catch (const json::exception &e)
  {
    throw Error(ErrorCode::InvalidField, std::string("bad value for '") + key + "': " + e.what());
  }
}

void CheckInvariants(const FourierMatrixTable &t)
{
  const int d = t.Dimension();
  const auto &lat = t.Lattice();
  for (int p = 0; p < lat.Size(); p++)
  {
    const LatticeIndex k = lat.Index(p);
    for (int l = 0; l < d; l++)
    {
      for (int m = 0; m < d; m++)
      {
        const cplx v = t.Get(k, l, m);
        if (std::abs(v - t.Get(k, m, l)) > kInvariantTol)
        {
          throw Error(ErrorCode::InvalidField,
                      "symmetry violated: A(k)_lm != A(k)_ml at k=(" + std::to_string(k[0]) +
                          "," + std::to_string(k[1]) + ")");
        }
        if (std::abs(v - std::conj(t.Get(Negate(k), l, m))) > kInvariantTol)
        {
          throw Error(ErrorCode::InvalidField,
                      "reality violated: A(-k) != conj(A(k)) at k=(" + std::to_string(k[0]) +
                          "," + std::to_string(k[1]) + ")");
        }
      }
    }
  }
}

FourierMatrixTable TableFromJson(const json &doc)
{
  const int d = GetKey<int>(doc, "dimension");
  const int kc = GetKey<int>(doc, "cutoff");
  Require(d == 1 || d == 2, ErrorCode::InvalidField, "dimension must be 1 or 2");
  Require(kc >= 0, ErrorCode::InvalidField, "cutoff must be nonnegative");
  FourierMatrixTable t(d, kc);
  const json modes = GetKey<json>(doc, "modes");
  Require(modes.is_array(), ErrorCode::InvalidField, "'modes' must be an array");
  for (const auto &rec : modes)
  {
    const auto k = GetKey<std::vector<int>>(rec, "k");
    Require(static_cast<int>(k.size()) == d, ErrorCode::InvalidField,
            "mode index length differs from dimension");
    const LatticeIndex idx{k[0], d == 2 ? k[1] : 0};
    Require(t.Lattice().Contains(idx), ErrorCode::InvalidField, "mode index exceeds cutoff");
    const json entries = GetKey<json>(rec, "entries");
    Require(entries.is_array() && static_cast<int>(entries.size()) == d, ErrorCode::InvalidField,
            "entries must be a d x d matrix");
    for (int l = 0; l < d; l++)
    {
      Require(entries[l].is_array() && static_cast<int>(entries[l].size()) == d,
              ErrorCode::InvalidField, "entries must be a d x d matrix");
      for (int m = 0; m < d; m++)
      {
        const json &e = entries[l][m];
        Require(e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number(),
                ErrorCode::InvalidField, "each entry must be [re, im]");
        t.Set(idx, l, m, cplx(e[0].get<double>(), e[1].get<double>()));
      }
    }
  }
  CheckInvariants(t);
  return t;
}

}  // namespace

FourierMatrixTable ParseFieldTable(const std::string &text) { return TableFromJson(ParseJson(text)); }

CoefficientField ParseCoefficientField(const std::string &text)
{
  const json doc = ParseJson(text);
  if (doc.contains("laminate"))
  {
    Require(GetKey<int>(doc, "dimension") == 1, ErrorCode::InvalidField,
            "laminate fields are 1D");
    const json &lam = doc.at("laminate");
    return BuildLaminate1d(GetKey<std::vector<double>>(lam, "values"),
                           GetKey<std::vector<double>>(lam, "fractions"),
                           GetKey<int>(doc, "cutoff"));
  }
  return BuildFromFourier(TableFromJson(doc));
}

PerturbationField ParsePerturbationField(const std::string &text)
{
  return PerturbationField::FromFourier(TableFromJson(ParseJson(text)));
}

CoefficientField LoadCoefficientField(const std::string &path)
{
  std::ifstream in(path);
  Require(in.good(), ErrorCode::InvalidField, "cannot open field file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseCoefficientField(ss.str());
}

std::string FieldDocument(const MatrixField &field)
{
  const int d = field.Dimension();
  json doc;
  doc["dimension"] = d;
  doc["cutoff"] = field.Cutoff();
  json modes = json::array();
  const auto &t = field.Coefficients();
  const auto &lat = t.Lattice();
  for (int p = 0; p < lat.Size(); p++)
  {
    const LatticeIndex k = lat.Index(p);
    const CMatrix m = t.Mode(k);
    if (m.cwiseAbs().maxCoeff() == 0.0)
    {
      continue;
    }
    json rec;
    rec["k"] = d == 1 ? json::array({k[0]}) : json::array({k[0], k[1]});
    json entries = json::array();
    for (int l = 0; l < d; l++)
    {
      json row = json::array();
      for (int c = 0; c < d; c++)
      {
        row.push_back(json::array({m(l, c).real(), m(l, c).imag()}));
      }
      entries.push_back(row);
    }
    rec["entries"] = entries;
    modes.push_back(rec);
  }
  doc["modes"] = modes;
  return doc.dump(2);
}

}  // namespace blochkit
