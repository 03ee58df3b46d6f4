#pragma once

// JSONL structure records and CSV tables.
//
// One record per line:
//   {"species": [...], "frac" | "coords": n x 3, "lattice": 3 x 3 | null,
//    "energy_per_atom": number | null, "meta": {...}}

#include "structsearch/evaluate.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace structsearch {

using json = nlohmann::ordered_json;

struct StructureRecord {
  Structure structure;
  std::optional<double> energy_per_atom;
  json meta = json::object();
};

inline json rows_to_json(const Coords& c) {
  json a = json::array();
  for (Eigen::Index j = 0; j < c.rows(); ++j) a.push_back({c(j, 0), c(j, 1), c(j, 2)});
  return a;
}

inline Coords rows_from_json(const json& a, const char* what) {
  if (!a.is_array()) throw ValidationError(std::string(what) + ": expected an array of rows");
  Coords c(static_cast<Eigen::Index>(a.size()), 3);
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (!a[j].is_array() || a[j].size() != 3)
      throw ValidationError(std::string(what) + ": every row needs 3 numbers");
    for (int k = 0; k < 3; ++k) c(static_cast<Eigen::Index>(j), k) = a[j][k].get<double>();
  }
  return c;
}

inline json to_json(const StructureRecord& r) {
  const Structure& s = r.structure;
  json j;
  j["species"] = s.species();
  if (s.periodic()) {
    j["frac"] = rows_to_json(s.positions());
    Coords L(3, 3);
    L = s.lattice();
    j["lattice"] = rows_to_json(L);
  } else {
    j["coords"] = rows_to_json(s.positions());
    j["lattice"] = nullptr;
  }
  j["energy_per_atom"] = r.energy_per_atom ? json(*r.energy_per_atom) : json(nullptr);
  j["meta"] = r.meta;
  return j;
}

inline StructureRecord record_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("record: expected a JSON object");
  for (const auto& [k, v] : j.items())
    if (k != "species" && k != "frac" && k != "coords" && k != "lattice" && k != "energy_per_atom" &&
        k != "meta")
      throw ValidationError("record: unknown key '" + k + "'");
  StructureRecord r;
  const auto species = j.at("species").get<std::vector<std::string>>();
  const bool periodic = j.contains("lattice") && !j["lattice"].is_null();
  if (periodic) {
    if (!j.contains("frac")) throw ValidationError("record: periodic record needs 'frac'");
    const Coords L = rows_from_json(j["lattice"], "lattice");
    if (L.rows() != 3) throw ValidationError("record: lattice must be 3 x 3");
    // Sampled cells may be left-handed; keep them as written.
    r.structure = Structure::crystal_unchecked(species, rows_from_json(j["frac"], "frac"), Mat3(L));
    if (static_cast<Eigen::Index>(species.size()) != r.structure.positions().rows())
      throw ValidationError("record: species count does not match rows");
  } else {
    if (!j.contains("coords")) throw ValidationError("record: molecular record needs 'coords'");
    r.structure = Structure::molecule(species, rows_from_json(j["coords"], "coords"));
  }
  if (j.contains("energy_per_atom") && !j["energy_per_atom"].is_null())
    r.energy_per_atom = j["energy_per_atom"].get<double>();
  if (j.contains("meta")) r.meta = j["meta"];
  return r;
}

inline void write_jsonl(std::ostream& os, const std::vector<StructureRecord>& records) {
  for (const auto& r : records) os << to_json(r).dump() << '\n';
}

inline void write_jsonl(const std::string& path, const std::vector<StructureRecord>& records) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  write_jsonl(os, records);
}

inline std::vector<StructureRecord> read_jsonl(std::istream& is, const std::string& name = "input") {
  std::vector<StructureRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw ValidationError(name + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<StructureRecord> read_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path);
  return read_jsonl(is, path);
}

inline StructureRecord to_structure_record(const SearchRecord& r) {
  StructureRecord out;
  out.structure = r.structure;
  out.energy_per_atom = r.energy_per_atom;
  out.meta["method"] = r.method;
  out.meta["seed"] = r.seed;
  out.meta["trial"] = r.trial;
  out.meta["converged"] = r.converged;
  out.meta["failed"] = r.failed;
  out.meta["relax_steps"] = r.relax_steps;
  out.meta["max_force"] = r.max_force;
  if (!r.note.empty()) out.meta["note"] = r.note;
  return out;
}

inline Sample to_sample(const StructureRecord& r) {
  bool failed = false;
  if (r.meta.contains("failed") && r.meta["failed"].is_boolean()) failed = r.meta["failed"].get<bool>();
  return {r.structure, r.energy_per_atom, failed};
}

inline std::vector<Sample> to_samples(const std::vector<StructureRecord>& rs) {
  std::vector<Sample> out;
  out.reserve(rs.size());
  for (const auto& r : rs) out.push_back(to_sample(r));
  return out;
}

/// Doubles in CSV cells: shortest text that reads back to the same value.
inline std::string csv_number(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  return json(x).dump();
}

struct SummaryRow {
  std::string system, method;
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  double coverage = 0.0, mean_energy = 0.0, low_energy_fraction = 0.0, budget_cost = 0.0;
  bool solved = false;
};

inline const char* kSummaryHeader =
    "system,method,seed,trials,coverage,mean_energy,low_energy_fraction,budget_cost,solved";

inline std::string summary_csv_line(const SummaryRow& r) {
  std::ostringstream os;
  os << r.system << ',' << r.method << ',' << r.seed << ',' << r.trials << ',' << csv_number(r.coverage)
     << ',' << csv_number(r.mean_energy) << ',' << csv_number(r.low_energy_fraction) << ','
     << csv_number(r.budget_cost) << ',' << (r.solved ? "true" : "false");
  return os.str();
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_csv_number(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  return json::parse(s).get<double>();
}

inline SummaryRow parse_summary_line(const std::string& line) {
  const auto c = split_csv(line);
  if (c.size() != 9) throw ValidationError("summary csv: expected 9 columns");
  SummaryRow r;
  r.system = c[0];
  r.method = c[1];
  r.seed = std::stoull(c[2]);
  r.trials = std::stoull(c[3]);
  r.coverage = parse_csv_number(c[4]);
  r.mean_energy = parse_csv_number(c[5]);
  r.low_energy_fraction = parse_csv_number(c[6]);
  r.budget_cost = parse_csv_number(c[7]);
  r.solved = c[8] == "true";
  return r;
}

}  // namespace structsearch
