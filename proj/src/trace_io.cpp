#include "immcda/trace_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace immcda {

using Json = nlohmann::ordered_json;

const std::vector<std::string>& episodeCsvColumns() {
  static const std::vector<std::string> columns = {
      "k",         "t",          "truth_x1", "truth_vx1",      "truth_x2",  "truth_vx2",
      "truth_omega", "true_mode", "z1",      "z2",             "est_x1",    "est_vx1",
      "est_x2",    "est_vx2",    "est_omega", "mu1",           "mu2",       "mu3",
      "est_mode",  "advisory_theta", "trigger_j", "separation"};
  return columns;
}

std::string formatDouble(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

template <int R, int C>
Json matrixToJson(const Eigen::Matrix<double, R, C>& m) {
  Json rows = Json::array();
  for (int i = 0; i < R; ++i) {
    Json row = Json::array();
    for (int j = 0; j < C; ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <int N>
Eigen::Matrix<double, N, N> matrixFromJson(const Json& j, const std::string& where) {
  std::vector<double> flat;
  auto take = [&](const Json& x) {
    if (!x.is_number()) throw ParseError(where + ": matrix entries must be numbers");
    flat.push_back(x.get<double>());
  };
  if (!j.is_array()) throw ParseError(where + ": expected a bracketed list");
  if (!j.empty() && j.front().is_array()) {
    if (j.size() != N) {
      throw ParseError(where + ": expected " + std::to_string(N) + " rows");
    }
    for (const auto& row : j) {
      if (!row.is_array() || row.size() != N) {
        throw ParseError(where + ": expected " + std::to_string(N) + " columns per row");
      }
      for (const auto& x : row) take(x);
    }
  } else {
    for (const auto& x : j) take(x);
  }
  if (flat.size() != static_cast<std::size_t>(N * N)) {
    throw ParseError(where + ": expected " + std::to_string(N * N) + " entries, got " +
                     std::to_string(flat.size()));
  }
  Eigen::Matrix<double, N, N> m;
  for (int i = 0; i < N; ++i) {
    for (int c = 0; c < N; ++c) m(i, c) = flat[static_cast<std::size_t>(i * N + c)];
  }
  return m;
}

double asDouble(const Json& j, const std::string& where) {
  if (!j.is_number()) throw ParseError(where + ": expected a number");
  return j.get<double>();
}

long long asInteger(const Json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ParseError(where + ": expected an integer");
  return j.get<long long>();
}

bool asBool(const Json& j, const std::string& where) {
  if (!j.is_boolean()) throw ParseError(where + ": expected true or false");
  return j.get<bool>();
}

using Setter = std::function<void(ScenarioConfig&, const Json&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"dt", [](auto& c, const Json& j, const auto& w) { c.dt = asDouble(j, w); }},
      {"steps", [](auto& c, const Json& j, const auto& w) {
         c.steps = static_cast<int>(asInteger(j, w));
       }},
      {"v_cruise", [](auto& c, const Json& j, const auto& w) { c.v_cruise = asDouble(j, w); }},
      {"r_safe", [](auto& c, const Json& j, const auto& w) { c.r_safe = asDouble(j, w); }},
      {"spawn_radius",
       [](auto& c, const Json& j, const auto& w) { c.spawn_radius = asDouble(j, w); }},
      {"pi", [](auto& c, const Json& j, const auto& w) { c.pi = matrixFromJson<3>(j, w); }},
      {"process_cov",
       [](auto& c, const Json& j, const auto& w) { c.process_cov = matrixFromJson<5>(j, w); }},
      {"meas_cov",
       [](auto& c, const Json& j, const auto& w) { c.meas_cov = matrixFromJson<2>(j, w); }},
      {"cda_enabled",
       [](auto& c, const Json& j, const auto& w) { c.cda_enabled = asBool(j, w); }},
      {"seed", [](auto& c, const Json& j, const auto& w) {
         if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
           throw ParseError(w + ": expected a nonnegative integer");
         }
         c.seed = j.get<std::uint64_t>();
       }},
      {"lookahead_max", [](auto& c, const Json& j, const auto& w) {
         c.lookahead_max = static_cast<int>(asInteger(j, w));
       }},
      {"mode_threshold",
       [](auto& c, const Json& j, const auto& w) { c.mode_threshold = asDouble(j, w); }},
      {"metric_burn_in", [](auto& c, const Json& j, const auto& w) {
         c.metric_burn_in = static_cast<int>(asInteger(j, w));
       }},
      {"noise_free_truth",
       [](auto& c, const Json& j, const auto& w) { c.noise_free_truth = asBool(j, w); }},
      {"intruder_approach_straight", [](auto& c, const Json& j, const auto& w) {
         c.intruder_approach_straight = asBool(j, w);
       }},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

Json configToJson(const ScenarioConfig& c) {
  Json j;
  j["dt"] = c.dt;
  j["steps"] = c.steps;
  j["v_cruise"] = c.v_cruise;
  j["r_safe"] = c.r_safe;
  j["spawn_radius"] = c.spawn_radius;
  j["pi"] = matrixToJson(c.pi);
  j["process_cov"] = matrixToJson(c.process_cov);
  j["meas_cov"] = matrixToJson(c.meas_cov);
  j["cda_enabled"] = c.cda_enabled;
  j["seed"] = c.seed;
  j["lookahead_max"] = c.lookahead_max;
  j["mode_threshold"] = c.mode_threshold;
  j["metric_burn_in"] = c.metric_burn_in;
  j["noise_free_truth"] = c.noise_free_truth;
  j["intruder_approach_straight"] = c.intruder_approach_straight;
  return j;
}

ScenarioConfig configFromJson(const Json& j) {
  if (!j.is_object()) throw ParseError("manifest config: expected an object");
  ScenarioConfig cfg;
  for (const auto& [key, value] : j.items()) {
    applyConfigValue(cfg, key, value.dump(), "manifest config");
  }
  return cfg;
}

std::string readFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void writeFile(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << contents;
  out.flush();
  if (!out) throw IoError("write to " + path.string() + " failed");
}

}  // namespace

void applyConfigValue(ScenarioConfig& cfg, const std::string& key, const std::string& value,
                      const std::string& origin) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ParseError(origin + ": unknown key '" + key + "'");
  const std::string where = origin + " (" + key + ")";
  Json parsed;
  try {
    parsed = Json::parse(value);
  } catch (const Json::parse_error&) {
    throw ParseError(where + ": cannot parse value '" + value + "'");
  }
  it->second(cfg, parsed, where);
}

ConfigOverrides parseConfigText(const std::string& text, const std::string& source) {
  ConfigOverrides out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  ScenarioConfig scratch;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string origin = source + " line " + std::to_string(line_no);
    if (eq == std::string::npos) throw ParseError(origin + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty() || value.empty()) throw ParseError(origin + ": expected key = value");
    applyConfigValue(scratch, key, value, origin);  // type check now, with the line number
    out[key] = value;
  }
  return out;
}

ScenarioConfig loadConfigFile(const std::filesystem::path& path) {
  const std::string text = readFile(path);
  if (path.extension() == ".json") {
    Json doc;
    try {
      doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
    if (!doc.contains("manifest") || !doc["manifest"].contains("config")) {
      throw ParseError(path.string() + ": no manifest.config section");
    }
    return configFromJson(doc["manifest"]["config"]);
  }
  ScenarioConfig cfg;
  for (const auto& [key, value] : parseConfigText(text, path.string())) {
    applyConfigValue(cfg, key, value, path.string());
  }
  return cfg;
}

std::string flagName(const std::string& key) {
  std::string flag = "--" + key;
  std::replace(flag.begin(), flag.end(), '_', '-');
  return flag;
}

ScenarioConfig resolveConfig(const std::optional<std::filesystem::path>& file,
                             const ConfigOverrides& flags, const char* env_seed) {
  ScenarioConfig cfg;
  if (env_seed != nullptr && *env_seed != '\0') {
    applyConfigValue(cfg, "seed", env_seed, kSeedEnvVar);
  }
  if (file) {
    if (file->extension() == ".json") {
      cfg = loadConfigFile(*file);
    } else {
      for (const auto& [key, value] : parseConfigText(readFile(*file), file->string())) {
        applyConfigValue(cfg, key, value, file->string());
      }
    }
  }
  for (const auto& [key, value] : flags) applyConfigValue(cfg, key, value, flagName(key));
  cfg.validate();
  return cfg;
}

std::string formatConfig(const ScenarioConfig& cfg) {
  std::ostringstream os;
  const Json j = configToJson(cfg);
  for (const auto& [key, value] : j.items()) {
    os << key << " = " << value.dump() << '\n';
  }
  return os.str();
}

std::string episodeCsv(const EpisodeTrace& trace) {
  std::string out;
  const auto& cols = episodeCsvColumns();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out += cols[i];
    out += i + 1 < cols.size() ? ',' : '\n';
  }
  for (const auto& s : trace.steps) {
    std::vector<std::string> cells = {
        std::to_string(s.k),
        formatDouble(s.t),
        formatDouble(s.truth.x1),
        formatDouble(s.truth.vx1),
        formatDouble(s.truth.x2),
        formatDouble(s.truth.vx2),
        formatDouble(s.truth.omega),
        std::to_string(static_cast<int>(s.true_mode)),
        formatDouble(s.z[0]),
        formatDouble(s.z[1]),
        formatDouble(s.estimate.mean[kX1]),
        formatDouble(s.estimate.mean[kVx1]),
        formatDouble(s.estimate.mean[kX2]),
        formatDouble(s.estimate.mean[kVx2]),
        formatDouble(s.estimate.mean[kOmega]),
        formatDouble(s.mu[0]),
        formatDouble(s.mu[1]),
        formatDouble(s.mu[2]),
        std::to_string(static_cast<int>(s.est_mode)),
        s.advisory ? formatDouble(s.advisory->theta) : std::string(),
        s.advisory ? std::to_string(s.advisory->trigger_j) : std::string(),
        formatDouble(s.separation),
    };
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out += cells[i];
      out += i + 1 < cells.size() ? ',' : '\n';
    }
  }
  return out;
}

void writeEpisodeCsv(const EpisodeTrace& trace, const std::filesystem::path& path) {
  writeFile(path, episodeCsv(trace));
}

double CsvRow::at(const std::string& column) const {
  const auto it = values.find(column);
  if (it == values.end() || !it->second) {
    throw ParseError("csv: no value in column '" + column + "'");
  }
  return *it->second;
}

std::vector<CsvRow> parseEpisodeCsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("csv: empty input");
  const auto& cols = episodeCsvColumns();
  {
    std::vector<std::string> header;
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
    if (header != cols) throw ParseError("csv: header does not match the episode schema");
  }
  std::vector<CsvRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string::npos ? comma : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() != cols.size()) {
      throw ParseError("csv line " + std::to_string(line_no) + ": expected " +
                       std::to_string(cols.size()) + " cells");
    }
    CsvRow row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].empty()) {
        row.values[cols[i]] = std::nullopt;
        continue;
      }
      double v = 0.0;
      const auto res = std::from_chars(cells[i].data(), cells[i].data() + cells[i].size(), v);
      if (res.ec != std::errc() || res.ptr != cells[i].data() + cells[i].size()) {
        throw ParseError("csv line " + std::to_string(line_no) + ": bad number in column '" +
                         cols[i] + "'");
      }
      row.values[cols[i]] = v;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<CsvRow> readEpisodeCsv(const std::filesystem::path& path) {
  return parseEpisodeCsv(readFile(path));
}

std::string summaryJson(const MonteCarloSummary& s, const RunManifest& manifest) {
  Json doc;
  Json m;
  m["tool_version"] = manifest.tool_version;
  m["timestamp"] = manifest.timestamp;
  m["config"] = configToJson(manifest.config);
  m["seeds"] = manifest.seeds;
  m["outputs"] = manifest.outputs;
  doc["manifest"] = std::move(m);
  doc["n_episodes"] = s.n_episodes;
  doc["min_separation"] = {
      {"mean", s.min_sep_mean}, {"median", s.min_sep_median}, {"stddev", s.min_sep_stddev}};
  doc["breach_fraction"] = s.breach_fraction;
  // Combined-axis RMSE: sqrt(mean(e1^2 + e2^2)); per-axis values follow.
  doc["rmse_position_est"] = s.rmsePositionEst();
  doc["rmse_position_meas"] = s.rmsePositionMeas();
  const Vec2 re = s.est_error.rmseAxis();
  const Vec2 rm = s.meas_error.rmseAxis();
  const Vec2 se = s.est_error.stddevAxis();
  const Vec2 sm = s.meas_error.stddevAxis();
  doc["rmse_axis"] = {{"est", {re[0], re[1]}}, {"meas", {rm[0], rm[1]}}};
  doc["error_stddev_axis"] = {{"est", {se[0], se[1]}}, {"meas", {sm[0], sm[1]}}};
  doc["mode_accuracy"] = s.modeAccuracy();
  doc["events"] = {{"advisories", s.advisories}, {"interior_breaches", s.interior_breaches}};
  return doc.dump(2) + "\n";
}

void writeSummaryJson(const MonteCarloSummary& summary, const RunManifest& manifest,
                      const std::filesystem::path& path) {
  writeFile(path, summaryJson(summary, manifest));
}

SummaryDocument parseSummaryJson(const std::string& text) {
  SummaryDocument d;
  try {
    const Json doc = Json::parse(text);
    const Json& m = doc.at("manifest");
    d.manifest.tool_version = m.at("tool_version").get<std::string>();
    d.manifest.timestamp = m.at("timestamp").get<std::string>();
    d.manifest.config = configFromJson(m.at("config"));
    d.manifest.seeds = m.at("seeds").get<std::vector<std::uint64_t>>();
    d.manifest.outputs = m.at("outputs").get<std::vector<std::string>>();
    d.n_episodes = doc.at("n_episodes").get<int>();
    d.min_sep_mean = doc.at("min_separation").at("mean").get<double>();
    d.min_sep_median = doc.at("min_separation").at("median").get<double>();
    d.min_sep_stddev = doc.at("min_separation").at("stddev").get<double>();
    d.breach_fraction = doc.at("breach_fraction").get<double>();
    d.rmse_position_est = doc.at("rmse_position_est").get<double>();
    d.rmse_position_meas = doc.at("rmse_position_meas").get<double>();
    auto vec2 = [](const Json& j) { return Vec2(j.at(0).get<double>(), j.at(1).get<double>()); };
    d.rmse_est_axis = vec2(doc.at("rmse_axis").at("est"));
    d.rmse_meas_axis = vec2(doc.at("rmse_axis").at("meas"));
    d.stddev_est_axis = vec2(doc.at("error_stddev_axis").at("est"));
    d.stddev_meas_axis = vec2(doc.at("error_stddev_axis").at("meas"));
    d.mode_accuracy = doc.at("mode_accuracy").get<double>();
  } catch (const Json::exception& e) {
    throw ParseError(std::string("summary json: ") + e.what());
  }
  return d;
}

SummaryDocument readSummaryJson(const std::filesystem::path& path) {
  return parseSummaryJson(readFile(path));
}

}  // namespace immcda
