#pragma once

// JSON file formats and table rendering.
//
// Utility file:    {"groups": [...], "values": {"0": g, "0,2": g, ...}, "grand": g}
//                  omitted proper coalitions are missing.
// Constraint file: [{"terms": [{"coalition": "0,2", "coef": c}, ...], "rhs": r}, ...]
//                  every row means sum(coef * g(coalition)) <= rhs.
// Coalition keys are comma-joined ascending group indices.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "gshap/coalition.hpp"
#include "gshap/errors.hpp"
#include "gshap/partial.hpp"
#include "gshap/roy.hpp"
#include "gshap/shapley.hpp"

namespace gshap::io {

using json = nlohmann::json;

// Schema or syntax violation in an input document.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// 17 significant digits, so parsing the text gives back the same double.
inline std::string format_real(double v) {
  if (!std::isfinite(v)) throw InputError("cannot serialize a non-finite number");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string format_fixed(double v, int decimals) {
  if (std::isnan(v)) return "NaN";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  std::string s(buf, res.ptr);
  if (s.starts_with("-") && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);  // no "-0.000"
  return s;
}

inline CoalitionMask parse_coalition_key(std::string_view key, std::size_t n_groups) {
  if (key.empty()) throw SchemaError("empty coalition key (the empty coalition is implicit)");
  std::uint64_t bits = 0;
  long prev = -1;
  std::size_t pos = 0;
  while (pos <= key.size()) {
    const std::size_t comma = std::min(key.find(',', pos), key.size());
    const std::string_view part = key.substr(pos, comma - pos);
    long idx = -1;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), idx);
    if (part.empty() || ec != std::errc{} || ptr != part.data() + part.size())
      throw SchemaError("malformed coalition key '" + std::string(key) + "'");
    if (idx < 0 || static_cast<std::size_t>(idx) >= n_groups)
      throw SchemaError("coalition key '" + std::string(key) + "' references an unknown group");
    if (idx <= prev) throw SchemaError("coalition key '" + std::string(key) + "' must list ascending indices");
    bits |= std::uint64_t{1} << idx;
    prev = idx;
    pos = comma + 1;
  }
  const CoalitionMask m(bits);
  if (m == CoalitionMask::full(n_groups))
    throw SchemaError("coalition key '" + std::string(key) + "' is the full coalition; use \"grand\"");
  return m;
}

inline json parse_json_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

namespace detail {

inline double require_number(const json& j, const std::string& what) {
  if (!j.is_number()) throw SchemaError(what + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(what + " must be finite");
  return v;
}

}  // namespace detail

inline UtilityTable parse_utility_json(const std::string& text) {
  const json doc = parse_json_text(text);
  if (!doc.is_object()) throw SchemaError("utility file must be a JSON object");
  for (const auto& [k, _] : doc.items())
    if (k != "groups" && k != "values" && k != "grand") throw SchemaError("utility file: unknown field '" + k + "'");
  if (!doc.contains("groups") || !doc["groups"].is_array()) throw SchemaError("utility file: \"groups\" array required");
  if (!doc.contains("grand")) throw SchemaError("utility file: \"grand\" is required");
  if (!doc.contains("values") || !doc["values"].is_object())
    throw SchemaError("utility file: \"values\" object required");
  std::vector<std::string> labels;
  for (const auto& g : doc["groups"]) {
    if (!g.is_string()) throw SchemaError("utility file: group labels must be strings");
    labels.push_back(g.get<std::string>());
  }
  try {
    UtilityTable table(GroupPartition(labels), detail::require_number(doc["grand"], "\"grand\""));
    for (const auto& [key, value] : doc["values"].items())
      table.set(parse_coalition_key(key, labels.size()), detail::require_number(value, "value of \"" + key + "\""));
    return table;
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(std::string("utility file: ") + e.what());
  }
}

inline UtilityTable read_utility_file(const std::string& path) { return parse_utility_json(read_text_file(path)); }

// Canonical serialization: coalitions in canonical order, 17 significant digits.
inline std::string write_utility_json(const UtilityTable& table) {
  std::string out = "{\n  \"groups\": [";
  const auto& labels = table.partition().labels();
  for (std::size_t i = 0; i < labels.size(); ++i) out += (i ? ", " : "") + json(labels[i]).dump();
  out += "],\n  \"values\": {";
  bool first = true;
  for (CoalitionMask m : enumerate_proper_coalitions(table.groups())) {
    const auto v = table.value(m);
    if (!v) continue;
    out += first ? "\n" : ",\n";
    out += "    \"" + coalition_key(m) + "\": " + format_real(*v);
    first = false;
  }
  out += first ? "},\n" : "\n  },\n";
  out += "  \"grand\": " + format_real(table.grand()) + "\n}\n";
  return out;
}

inline LinearConstraintSet parse_constraint_json(const std::string& text, std::size_t n_groups) {
  const json doc = parse_json_text(text);
  if (!doc.is_array()) throw SchemaError("constraint file must be a JSON array of rows");
  LinearConstraintSet out(n_groups);
  for (std::size_t r = 0; r < doc.size(); ++r) {
    const json& row = doc[r];
    const std::string where = "constraint row " + std::to_string(r);
    if (!row.is_object() || !row.contains("terms") || !row["terms"].is_array() || !row.contains("rhs"))
      throw SchemaError(where + ": needs \"terms\" array and \"rhs\"");
    ConstraintRow cr;
    cr.rhs = detail::require_number(row["rhs"], where + " rhs");
    for (const auto& t : row["terms"]) {
      if (!t.is_object() || !t.contains("coalition") || !t["coalition"].is_string() || !t.contains("coef"))
        throw SchemaError(where + ": each term needs \"coalition\" and \"coef\"");
      cr.terms.push_back({parse_coalition_key(t["coalition"].get<std::string>(), n_groups),
                          detail::require_number(t["coef"], where + " coef")});
    }
    out.add(std::move(cr));
  }
  return out;
}

inline LinearConstraintSet read_constraint_file(const std::string& path, std::size_t n_groups) {
  return parse_constraint_json(read_text_file(path), n_groups);
}

inline std::string write_constraint_json(const LinearConstraintSet& set) {
  std::string out = "[";
  for (std::size_t r = 0; r < set.rows().size(); ++r) {
    const auto& row = set.rows()[r];
    out += r ? ",\n  " : "\n  ";
    out += "{\"terms\": [";
    for (std::size_t t = 0; t < row.terms.size(); ++t) {
      out += t ? ", " : "";
      out += "{\"coalition\": \"" + coalition_key(row.terms[t].coalition) +
             "\", \"coef\": " + format_real(row.terms[t].coef) + "}";
    }
    out += "], \"rhs\": " + format_real(row.rhs) + "}";
  }
  out += set.empty() ? "]\n" : "\n]\n";
  return out;
}

// ---------------------------------------------------------------------------
// Importance tables

inline constexpr int kValueDecimals = 6;
inline constexpr int kShareDecimals = 4;

struct ImportanceRow {
  std::string label;
  double value = 0.0;
  double share = 0.0;
};

struct ImportanceTable {
  std::vector<ImportanceRow> rows;
  double grand = 0.0;
  bool shares_defined = false;
  std::string method;
};

inline ImportanceTable importance_table(const ShapleyResult& r) {
  ImportanceTable t{{}, r.grand, r.shares_defined, to_string(r.method)};
  for (std::size_t i = 0; i < r.values.size(); ++i)
    t.rows.push_back({r.partition.label(i), r.values[i], r.shares[i]});
  return t;
}

// Values sum to grand and shares sum to one, each within the displayed precision.
inline bool satisfies_display_invariants(const ImportanceTable& t) {
  double vs = 0.0, ss = 0.0;
  for (const auto& r : t.rows) {
    vs += r.value;
    ss += r.share;
  }
  const double n = static_cast<double>(t.rows.size());
  const double vtol = (n + 1.0) * 0.5 * std::pow(10.0, -kValueDecimals);
  const double stol = (n + 1.0) * 0.5 * std::pow(10.0, -kShareDecimals);
  if (std::abs(vs - t.grand) > vtol + 1e-8 * std::abs(t.grand)) return false;
  if (t.shares_defined && std::abs(ss - 1.0) > stol) return false;
  return true;
}

inline std::string render_csv(const ImportanceTable& t) {
  std::string out = "group,value,share\n";
  for (const auto& r : t.rows)
    out += json(r.label).dump() + "," + format_fixed(r.value, kValueDecimals) + "," +
           format_fixed(t.shares_defined ? r.share : NAN, kShareDecimals) + "\n";
  out += "\"total\"," + format_fixed(t.grand, kValueDecimals) + "," +
         format_fixed(t.shares_defined ? 1.0 : NAN, kShareDecimals) + "\n";
  out += "# method: " + t.method + "\n";
  return out;
}

namespace detail {

inline std::string markdown_grid(const std::vector<std::vector<std::string>>& cells, std::size_t left_cols) {
  std::vector<std::size_t> width(cells.front().size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    out += "|";
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      const std::string& s = cells[r][c];
      const std::string pad(width[c] - s.size(), ' ');
      out += " " + (c < left_cols ? s + pad : pad + s) + " |";
    }
    out += "\n";
    if (r == 0) {
      out += "|";
      for (std::size_t c = 0; c < width.size(); ++c)
        out += (c < left_cols ? " :" + std::string(width[c] - 1, '-') : " " + std::string(width[c] - 1, '-') + ":") +
               " |";
      out += "\n";
    }
  }
  return out;
}

}  // namespace detail

inline std::string render_markdown(const ImportanceTable& t) {
  std::vector<std::vector<std::string>> cells{{"Group", "Value", "Share"}};
  for (const auto& r : t.rows)
    cells.push_back({r.label, format_fixed(r.value, kValueDecimals),
                     format_fixed(t.shares_defined ? r.share : NAN, kShareDecimals)});
  cells.push_back({"Total", format_fixed(t.grand, kValueDecimals),
                   format_fixed(t.shares_defined ? 1.0 : NAN, kShareDecimals)});
  std::string out = detail::markdown_grid(cells, 1);
  out += "\nMethod: " + t.method + ". Share = value / g(P).\n";
  if (!t.shares_defined) out += "Shares are undefined because g(P) is zero.\n";
  return out;
}

// SLB / SUB / SMNS block, one row per bound type and one column per group.
inline std::string render_bounds(const GroupPartition& partition, const PartialInferenceResult& r, bool markdown) {
  auto cell = [](const SolveStatus& s) {
    return s.optimal() ? format_fixed(s.objective, kValueDecimals) : std::string(to_string(s.status));
  };
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"Bound"};
  for (const auto& l : partition.labels()) header.push_back(l);
  cells.push_back(header);
  std::vector<std::string> slb{"SLB"}, sub{"SUB"}, smns{"SMNS"};
  for (std::size_t j = 0; j < partition.size(); ++j) {
    slb.push_back(j < r.lower.size() ? cell(r.lower[j]) : "-");
    sub.push_back(j < r.upper.size() ? cell(r.upper[j]) : "-");
    smns.push_back(r.smns ? format_fixed(r.smns->values[j], kValueDecimals) : std::string(to_string(r.feasibility)));
  }
  cells.push_back(slb);
  cells.push_back(sub);
  cells.push_back(smns);
  if (markdown) return detail::markdown_grid(cells, 1);
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + row[c];
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Roy scenario documents
//
// {
//   "benchmark":      {"beta1": [1,1], "beta2": [0.5,1], "gamma1": 0, "gamma2": 1,
//                      "sigma1_sq": 2, "sigma2_sq": 3, "tau": 0, "rho": 0.95},
//   "counterfactual": {...},
//   "groups": [{"label": "beta", "members": ["beta1", "beta2"]}, ...],
//   "simulation": {"draws": 1000000, "seed": 1, "quantiles": [0.1, 0.9],
//                  "covariates": {"z_mean": 0, "z_sd": 1}}
// }

struct RoyDocument {
  roy::RoyScenario scenario;
  roy::SimConfig config;
};

namespace detail {

inline roy::RoyParams parse_roy_params(const json& j, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + " must be an object");
  roy::RoyParams p;
  for (const auto& [k, v] : j.items()) {
    if (k == "beta1" || k == "beta2") {
      if (!v.is_array() || v.size() != 2) throw SchemaError(where + "." + k + " must be a 2-element array");
      std::array<double, 2> b{require_number(v[0], where + "." + k), require_number(v[1], where + "." + k)};
      (k == "beta1" ? p.beta1 : p.beta2) = b;
    } else if (k == "gamma1") p.gamma1 = require_number(v, where + "." + k);
    else if (k == "gamma2") p.gamma2 = require_number(v, where + "." + k);
    else if (k == "sigma1_sq") p.sigma1_sq = require_number(v, where + "." + k);
    else if (k == "sigma2_sq") p.sigma2_sq = require_number(v, where + "." + k);
    else if (k == "tau") p.tau = require_number(v, where + "." + k);
    else if (k == "rho") p.rho = require_number(v, where + "." + k);
    else throw SchemaError(where + ": unknown parameter '" + k + "'");
  }
  for (const char* req : {"beta1", "beta2", "gamma1", "gamma2", "sigma1_sq", "sigma2_sq", "tau", "rho"})
    if (!j.contains(req)) throw SchemaError(where + ": missing parameter '" + std::string(req) + "'");
  return p;
}

}  // namespace detail

inline RoyDocument parse_roy_scenario_json(const std::string& text) {
  const json doc = parse_json_text(text);
  if (!doc.is_object()) throw SchemaError("scenario must be a JSON object");
  if (!doc.contains("benchmark") || !doc.contains("counterfactual") || !doc.contains("groups"))
    throw SchemaError("scenario needs \"benchmark\", \"counterfactual\" and \"groups\"");
  if (!doc["groups"].is_array() || doc["groups"].empty()) throw SchemaError("scenario: \"groups\" must be a non-empty array");
  std::vector<std::string> labels;
  std::vector<std::vector<std::string>> members;
  for (const auto& g : doc["groups"]) {
    if (!g.is_object() || !g.contains("label") || !g["label"].is_string() || !g.contains("members") ||
        !g["members"].is_array())
      throw SchemaError("scenario: each group needs \"label\" and \"members\"");
    labels.push_back(g["label"].get<std::string>());
    std::vector<std::string> ms;
    for (const auto& m : g["members"]) {
      if (!m.is_string()) throw SchemaError("scenario: group members must be strings");
      ms.push_back(m.get<std::string>());
    }
    members.push_back(std::move(ms));
  }
  roy::SimConfig cfg;
  if (doc.contains("simulation")) {
    const json& s = doc["simulation"];
    if (!s.is_object()) throw SchemaError("scenario: \"simulation\" must be an object");
    if (s.contains("draws")) {
      if (!s["draws"].is_number_integer() || s["draws"].get<long long>() <= 0)
        throw SchemaError("scenario: simulation.draws must be a positive integer");
      cfg.n_draws = s["draws"].get<std::size_t>();
    }
    if (s.contains("seed")) {
      if (!s["seed"].is_number_unsigned()) throw SchemaError("scenario: simulation.seed must be a non-negative integer");
      cfg.seed = s["seed"].get<std::uint64_t>();
    }
    if (s.contains("quantiles")) {
      if (!s["quantiles"].is_array() || s["quantiles"].size() != 2)
        throw SchemaError("scenario: simulation.quantiles must be [low, high]");
      cfg.q_low = detail::require_number(s["quantiles"][0], "quantiles[0]");
      cfg.q_high = detail::require_number(s["quantiles"][1], "quantiles[1]");
    }
    if (s.contains("covariates")) {
      const json& c = s["covariates"];
      if (c.contains("z_mean")) cfg.covariates.z_mean = detail::require_number(c["z_mean"], "covariates.z_mean");
      if (c.contains("z_sd")) cfg.covariates.z_sd = detail::require_number(c["z_sd"], "covariates.z_sd");
    }
  }
  try {
    RoyDocument out{{detail::parse_roy_params(doc["benchmark"], "benchmark"),
                     detail::parse_roy_params(doc["counterfactual"], "counterfactual"),
                     GroupPartition(labels, members)},
                    cfg};
    out.scenario.validate();
    out.config.validate();
    return out;
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(std::string("scenario: ") + e.what());
  }
}

}  // namespace gshap::io
