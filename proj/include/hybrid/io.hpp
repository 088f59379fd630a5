#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hybrid/world.hpp"

namespace hybrid {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Formats a number with 12 significant digits, the precision every CSV
/// output uses so files are byte-reproducible.
inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline nlohmann::json world_to_json(const HybridWorld& world) {
  nlohmann::json j;
  j["prior"] = world.prior;
  nlohmann::json e;
  if (world.expert.is_gaussian()) {
    const TruncatedGaussian& g = world.expert.gaussian();
    e["family"] = "truncated_gaussian";
    nlohmann::json support = nlohmann::json::array();
    if (world.expert.lo_infinite()) {
      support.push_back("-inf");
    } else {
      support.push_back(world.expert.lo());
    }
    if (world.expert.hi_infinite()) {
      support.push_back("inf");
    } else {
      support.push_back(world.expert.hi());
    }
    e["support"] = support;
    e["mean0"] = g.mean0;
    e["std0"] = g.std0;
    e["mean1"] = g.mean1;
    e["std1"] = g.std1;
  } else {
    const Tabulated& t = world.expert.tabulated();
    e["family"] = "tabulated";
    nlohmann::json grid = nlohmann::json::array();
    for (std::size_t i = 0; i < t.x.size(); ++i) {
      grid.push_back({t.x[i], t.f0[i], t.f1[i]});
    }
    e["grid"] = grid;
  }
  j["expert"] = e;
  nlohmann::json groups = nlohmann::json::array();
  for (const NonExpertGroup& g : world.groups) {
    nlohmann::json gj;
    gj["label"] = g.label;
    gj["q0"] = g.q0;
    gj["q1"] = g.q1;
    gj["elements"] = g.elements;
    if (g.thresholds) gj["thresholds"] = *g.thresholds;
    groups.push_back(gj);
  }
  j["groups"] = groups;
  return j;
}

inline HybridWorld world_from_json(const nlohmann::json& j) {
  auto need = [&](const nlohmann::json& obj, const char* field) {
    if (!obj.contains(field)) {
      throw IoError(std::string("world file missing field '") + field + "'");
    }
    return obj.at(field);
  };

  const double prior = need(j, "prior").get<double>();
  const nlohmann::json& e = need(j, "expert");
  const std::string family = need(e, "family").get<std::string>();

  auto build_expert = [&]() -> ExpertSignalModel {
    if (family == "truncated_gaussian") {
      TruncatedGaussian g;
      g.mean0 = need(e, "mean0").get<double>();
      g.std0 = need(e, "std0").get<double>();
      g.mean1 = need(e, "mean1").get<double>();
      g.std1 = need(e, "std1").get<double>();
      const nlohmann::json& support = need(e, "support");
      if (!support.is_array() || support.size() != 2) {
        throw IoError("expert.support must be a two-element array");
      }
      double lo = 0.0, hi = 0.0;
      bool lo_inf = false, hi_inf = false;
      if (support[0].is_string()) {
        if (support[0].get<std::string>() != "-inf") {
          throw IoError("expert.support[0]: expected number or \"-inf\"");
        }
        lo_inf = true;
      } else {
        lo = support[0].get<double>();
      }
      if (support[1].is_string()) {
        if (support[1].get<std::string>() != "inf") {
          throw IoError("expert.support[1]: expected number or \"inf\"");
        }
        hi_inf = true;
      } else {
        hi = support[1].get<double>();
      }
      return ExpertSignalModel(g, lo, hi, lo_inf, hi_inf);
    }
    if (family == "tabulated") {
      Tabulated t;
      for (const auto& row : need(e, "grid")) {
        if (!row.is_array() || row.size() != 3) {
          throw IoError("expert.grid rows must be [x, f0, f1]");
        }
        t.x.push_back(row[0].get<double>());
        t.f0.push_back(row[1].get<double>());
        t.f1.push_back(row[2].get<double>());
      }
      return ExpertSignalModel(std::move(t));
    }
    throw IoError("unknown density family '" + family + "'");
  };

  std::vector<NonExpertGroup> groups;
  for (const auto& gj : need(j, "groups")) {
    NonExpertGroup g;
    g.label = need(gj, "label").get<std::string>();
    g.q0 = need(gj, "q0").get<std::vector<double>>();
    g.q1 = need(gj, "q1").get<std::vector<double>>();
    if (gj.contains("elements")) {
      g.elements = gj.at("elements").get<std::vector<std::string>>();
    } else {
      for (std::size_t k = 0; k < g.q0.size(); ++k) {
        g.elements.push_back("theta" + std::to_string(k + 1));
      }
    }
    if (gj.contains("thresholds")) {
      g.thresholds = gj.at("thresholds").get<std::vector<double>>();
    }
    groups.push_back(std::move(g));
  }
  return HybridWorld(prior, build_expert(), std::move(groups));
}

inline HybridWorld load_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open world file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("world file '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    return world_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("world file '" + path + "': " + e.what());
  }
}

inline void save_world(const HybridWorld& world, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write world file '" + path + "'");
  out << world_to_json(world).dump(2) << "\n";
}

/// FNV-1a over a file's bytes; stamped into output manifests so a result can
/// be traced to the exact world description that produced it.
inline std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot hash file '" + path + "'");
  std::uint64_t h = 14695981039346656037ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

/// Provenance block embedded as comment lines at the top of every CSV; a file
/// regenerated from the same manifest is byte-identical.
struct RunManifest {
  std::string command;
  std::string world_hash;  // empty when no world file involved
  std::string seed;
  std::string tolerances;
  std::string version = "1.0.0";
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string render_csv(const RunManifest& manifest,
                              const CsvTable& table) {
  std::ostringstream out;
  out << "# command=" << manifest.command << "\n";
  if (!manifest.world_hash.empty()) {
    out << "# world_hash=" << manifest.world_hash << "\n";
  }
  if (!manifest.seed.empty()) out << "# seed=" << manifest.seed << "\n";
  if (!manifest.tolerances.empty()) {
    out << "# tolerances=" << manifest.tolerances << "\n";
  }
  out << "# version=" << manifest.version << "\n";
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i > 0) out << ",";
    out << csv_escape(table.header[i]);
  }
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ",";
      out << csv_escape(row[i]);
    }
    out << "\n";
  }
  return out.str();
}

inline void write_csv(const RunManifest& manifest, const CsvTable& table,
                      const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << render_csv(manifest, table);
}

}  // namespace hybrid
