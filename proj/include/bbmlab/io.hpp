#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bbmlab/common.hpp"
#include "bbmlab/fkpp.hpp"
#include "bbmlab/genealogy.hpp"
#include "bbmlab/point_measure.hpp"

namespace bbm {

using json = nlohmann::json;

// ---- point measures ----

inline void write_point_measure_csv(std::ostream& os, const PointMeasure& pm) {
  os << "position\n";
  os.precision(17);
  for (double x : pm.atoms()) os << x << "\n";
}

inline json point_measure_to_json(const PointMeasure& pm) {
  return json(pm.atoms());
}

inline PointMeasure point_measure_from_json(const json& j) {
  return PointMeasure(j.get<std::vector<double>>());
}

// ---- genealogy snapshots ----

inline json snapshot_to_json(const GenealogySnapshot& snap) {
  json j;
  j["final_time"] = snap.final_time;
  j["rng_seed"] = snap.rng_seed;
  j["normalization"] = {{"variance", snap.norm.variance},
                        {"drift", snap.norm.drift},
                        {"branch_rate", snap.norm.branch_rate},
                        {"direction",
                         snap.norm.direction == Direction::Max ? "max" : "min"}};
  j["checkpoint_times"] = snap.checkpoint_times;
  j["checkpoint_positions"] = snap.checkpoint_values;
  j["pruned_count"] = snap.pruned_count;
  j["spine_leaf"] = snap.spine_leaf;
  j["leaves"] = snap.leaves;
  json parts = json::array();
  for (const auto& r : snap.particles) {
    parts.push_back({{"position", r.position},
                     {"parent", r.parent},
                     {"birth_time", r.birth_time},
                     {"birth_position", r.birth_position},
                     {"end_time", r.end_time},
                     {"status", static_cast<int>(r.status)},
                     {"cp_begin", r.cp_begin},
                     {"cp_count", r.cp_count},
                     {"cp_offset", r.cp_offset}});
  }
  j["particles"] = std::move(parts);
  return j;
}

inline GenealogySnapshot snapshot_from_json(const json& j) {
  GenealogySnapshot snap;
  snap.final_time = j.at("final_time").get<double>();
  snap.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  const auto& n = j.at("normalization");
  snap.norm.variance = n.at("variance").get<double>();
  snap.norm.drift = n.at("drift").get<double>();
  snap.norm.branch_rate = n.at("branch_rate").get<double>();
  snap.norm.direction =
      n.at("direction").get<std::string>() == "max" ? Direction::Max : Direction::Min;
  snap.checkpoint_times = j.at("checkpoint_times").get<std::vector<double>>();
  snap.checkpoint_values = j.at("checkpoint_positions").get<std::vector<double>>();
  snap.pruned_count = j.at("pruned_count").get<std::int64_t>();
  snap.spine_leaf = j.at("spine_leaf").get<std::int32_t>();
  snap.leaves = j.at("leaves").get<std::vector<std::int32_t>>();
  for (const auto& p : j.at("particles")) {
    ParticleRecord r;
    r.position = p.at("position").get<double>();
    r.parent = p.at("parent").get<std::int32_t>();
    r.birth_time = p.at("birth_time").get<double>();
    r.birth_position = p.at("birth_position").get<double>();
    r.end_time = p.at("end_time").get<double>();
    r.status = static_cast<ParticleStatus>(p.at("status").get<int>());
    r.cp_begin = p.at("cp_begin").get<std::int32_t>();
    r.cp_count = p.at("cp_count").get<std::int32_t>();
    r.cp_offset = p.at("cp_offset").get<std::int64_t>();
    snap.particles.push_back(r);
  }
  return snap;
}

// ---- fields ----

inline void write_field_csv(std::ostream& os, const Field& f) {
  os << "x,u\n";
  os.precision(17);
  for (int i = 0; i < f.grid.n(); ++i)
    os << f.grid.x(i) << "," << f.values[i] << "\n";
}

inline json field_sidecar_json(const Field& f) {
  return {{"t", f.t},
          {"grid", {{"x_min", f.grid.x_min},
                    {"x_max", f.grid.x_max},
                    {"dx", f.grid.dx},
                    {"dt", f.grid.dt}}},
          {"scheme", "strang: exact logistic reaction + tilted Crank-Nicolson diffusion"},
          {"clamp_count", f.clamp_count}};
}

// ---- key=value experiment configs ----

// Plain-text configuration: one `key = value` per line, '#' comments.
// Consumers declare the full key set; unknown keys are rejected.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    Config c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      c.parse_line(line, path + ":" + std::to_string(lineno));
    }
    return c;
  }

  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
  }

  // "key=value" override, as passed on the command line
  void apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override must look like key=value: " + kv);
    set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': not a number: " + it->second);
    }
  }

  long get_long(const std::string& key, long fallback) const {
    const double v = get_double(key, static_cast<double>(fallback));
    const long l = static_cast<long>(v);
    if (static_cast<double>(l) != v)
      throw ConfigError("config key '" + key + "': not an integer");
    return l;
  }

  void require_known_keys(const std::set<std::string>& allowed) const {
    for (const auto& [k, v] : values_)
      if (!allowed.count(k))
        throw ConfigError("unknown config key: " + k);
  }

  json to_json() const {
    json j = json::object();
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  void parse_line(const std::string& raw, const std::string& where) {
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) return;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("bad config line (expected key = value) at " + where);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty config key at " + where);
    values_[key] = value;
  }

  std::map<std::string, std::string> values_;
};

// Generic CSV writer: comment header first (config echo), then a header row.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns,
            const json& params)
      : out_(path) {
    if (!out_) throw Error("cannot open output file: " + path);
    out_ << "# " << params.dump() << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i)
      out_ << (i ? "," : "") << columns[i];
    out_ << "\n";
    out_.precision(17);
    ncols_ = columns.size();
  }

  void row(const std::vector<double>& values) {
    if (values.size() != ncols_) throw Error("csv row width mismatch");
    for (std::size_t i = 0; i < values.size(); ++i)
      out_ << (i ? "," : "") << values[i];
    out_ << "\n";
  }

 private:
  std::ofstream out_;
  std::size_t ncols_ = 0;
};

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open output file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace bbm
