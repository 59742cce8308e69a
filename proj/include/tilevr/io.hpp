#pragma once

// Configuration documents, trace and saliency ingestion, and result tables
// in CSV or JSON.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tilevr/simulator.hpp"

namespace tilevr {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Text helpers

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(cat("cannot open '", path.string(), "'"));
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw IoError(cat("cannot read '", path.string(), "'"));
  return os.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(cat("cannot open '", path.string(), "' for writing"));
  out << text;
  out.flush();
  if (!out) throw IoError(cat("cannot write '", path.string(), "'"));
}

inline std::string trim(std::string s) {
  auto sp = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && sp(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && sp(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_number(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing");
    if (!std::isfinite(v)) throw std::invalid_argument("finite");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(cat(where, ": '", text, "' is not a number"));
  }
}

/// Non-empty, non-comment lines with their 1-based line numbers.
inline std::vector<std::pair<int, std::string>> content_lines(const std::string& text) {
  std::vector<std::pair<int, std::string>> out;
  std::istringstream is(text);
  std::string line;
  int no = 0;
  while (std::getline(is, line)) {
    ++no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    out.emplace_back(no, t);
  }
  return out;
}

/// "%.6g" formatting used by every emitted number.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v == 0.0 ? 0.0 : v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Saliency and traces

struct SaliencyLoad {
  SaliencyMap weights;
  std::vector<std::string> warnings;
};

/// Comma- or whitespace-separated non-negative weights, row-major over the
/// grid; renormalized to sum to one.
inline SaliencyLoad parse_saliency(const std::string& text, int tiles, const std::string& name = "saliency") {
  SaliencyLoad out;
  std::string flat = text;
  for (char& c : flat)
    if (c == ',' || c == ';') c = ' ';
  std::istringstream is(flat);
  std::string tok;
  while (is >> tok) {
    if (tok[0] == '#') {
      std::string rest;
      std::getline(is, rest);
      continue;
    }
    out.weights.push_back(detail::parse_number(tok, name));
  }
  if (static_cast<int>(out.weights.size()) != tiles)
    throw ConfigError(detail::cat(name, ": expected ", tiles, " entries, found ", out.weights.size()));
  double sum = 0.0;
  for (std::size_t j = 0; j < out.weights.size(); ++j) {
    if (out.weights[j] < 0.0) throw ConfigError(detail::cat(name, ": entry ", j + 1, " is negative"));
    sum += out.weights[j];
  }
  if (!(sum > 0.0)) throw ConfigError(detail::cat(name, ": weights sum to zero"));
  if (std::abs(sum - 1.0) > 0.01)
    out.warnings.push_back(detail::cat(name, ": weights sum to ", detail::format_number(sum), ", renormalized"));
  for (double& w : out.weights) w /= sum;
  return out;
}

inline SaliencyLoad load_saliency(const std::filesystem::path& path, int tiles) {
  return parse_saliency(detail::read_file(path), tiles, path.filename().string());
}

namespace detail {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Header plus numeric rows; every row must have the header's width.
inline CsvTable parse_csv_table(const std::string& text, const std::string& name, std::size_t min_columns) {
  CsvTable t;
  auto lines = content_lines(text);
  if (lines.empty()) throw ConfigError(cat(name, ": missing header row"));
  t.header = split_csv_line(lines[0].second);
  bool numeric_header = !t.header.empty() && !t.header[0].empty() &&
                        (std::isdigit(static_cast<unsigned char>(t.header[0][0])) || t.header[0][0] == '-' || t.header[0][0] == '.');
  if (numeric_header) throw ConfigError(cat(name, ": missing header row"));
  if (t.header.size() < min_columns)
    throw ConfigError(cat(name, ": missing columns, expected at least ", min_columns, ", header has ", t.header.size()));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    auto cells = split_csv_line(lines[r].second);
    if (cells.size() != t.header.size())
      throw ConfigError(cat(name, ": row ", r, " has ", cells.size(), " columns, expected ", t.header.size()));
    std::vector<double> row;
    for (std::size_t c = 0; c < cells.size(); ++c)
      row.push_back(parse_number(cells[c], cat(name, ": row ", r, ", column '", t.header[c], "'")));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void check_monotone(const CsvTable& t, const std::string& name) {
  for (std::size_t r = 1; r < t.rows.size(); ++r)
    if (t.rows[r][0] < t.rows[r - 1][0]) throw ConfigError(cat(name, ": non-monotone time at row ", r + 1));
}

inline int user_index(double v, int users, const std::string& where) {
  if (v != std::floor(v) || v < 0 || (users >= 0 && v >= users))
    throw ConfigError(cat(where, ": user ", v, " out of range"));
  return static_cast<int>(v);
}

}  // namespace detail

/// Rows (t, user, r_lte, r_wifi_1..I), one snapshot per distinct time.
/// `users` and `aps` of -1 are taken from the file.
inline NetworkTrace parse_network_trace(const std::string& text, int users = -1, int aps = -1,
                                        const std::string& name = "network trace") {
  auto t = detail::parse_csv_table(text, name, 3);
  detail::check_monotone(t, name);
  const int cols_aps = static_cast<int>(t.header.size()) - 3;
  if (aps >= 0 && cols_aps != aps)
    throw ConfigError(detail::cat(name, ": column count gives ", cols_aps, " Wi-Fi rates per row, scenario has ", aps, " APs"));
  NetworkTrace tr;
  tr.aps = cols_aps;
  int max_user = -1;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    max_user = std::max(max_user, detail::user_index(t.rows[r][1], users, detail::cat(name, ": row ", r + 1)));
  tr.users = users >= 0 ? users : max_user + 1;

  std::vector<double> times;
  for (std::size_t r = 0; r < t.rows.size();) {
    const double time = t.rows[r][0];
    NetworkSnapshot s;
    s.r_lte.assign(static_cast<std::size_t>(tr.users), -1.0);
    s.r_wifi.assign(static_cast<std::size_t>(tr.users), {});
    for (; r < t.rows.size() && t.rows[r][0] == time; ++r) {
      const auto& row = t.rows[r];
      auto n = static_cast<std::size_t>(row[1]);
      if (s.r_lte[n] >= 0.0) throw ConfigError(detail::cat(name, ": row ", r + 1, " repeats user ", n, " at t=", time));
      for (std::size_t c = 2; c < row.size(); ++c)
        if (row[c] < 0.0) throw ConfigError(detail::cat(name, ": row ", r + 1, ": rate < 0"));
      s.r_lte[n] = row[2];
      s.r_wifi[n].assign(row.begin() + 3, row.end());
    }
    for (int n = 0; n < tr.users; ++n)
      if (s.r_lte[static_cast<std::size_t>(n)] < 0.0)
        throw ConfigError(detail::cat(name, ": no row for user ", n, " at t=", time));
    times.push_back(time);
    tr.snapshots.push_back(std::move(s));
  }
  if (times.size() >= 2) {
    tr.epoch = times[1] - times[0];
    for (std::size_t k = 2; k < times.size(); ++k)
      if (std::abs(times[k] - times[k - 1] - tr.epoch) > 1e-6)
        throw ConfigError(detail::cat(name, ": epoch spacing is not uniform at t=", times[k]));
    if (!(tr.epoch > 0.0)) throw ConfigError(detail::cat(name, ": epoch spacing must be positive"));
  }
  return tr;
}

/// Rows (t, user, yaw, pitch[, pred_yaw, pred_pitch, gamma]), one per user
/// per frame. With prediction columns, the row at each GoP's first frame
/// gives that GoP's prediction.
inline FovTrace parse_fov_trace(const std::string& text, int users, double fps, int gop,
                                const std::string& name = "FoV trace") {
  auto t = detail::parse_csv_table(text, name, 4);
  if (t.header.size() != 4 && t.header.size() != 7)
    throw ConfigError(detail::cat(name, ": expected 4 or 7 columns, header has ", t.header.size()));
  detail::check_monotone(t, name);
  const bool with_pred = t.header.size() == 7;
  FovTrace tr;
  tr.fps = fps;
  tr.gop = gop;
  int count = users;
  if (count < 0) {
    count = 0;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
      count = std::max(count, detail::user_index(t.rows[r][1], -1, detail::cat(name, ": row ", r + 1)) + 1);
  }
  tr.truth.assign(static_cast<std::size_t>(count), {});
  std::vector<std::vector<GopPrediction>> preds(static_cast<std::size_t>(count));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    auto n = static_cast<std::size_t>(detail::user_index(row[1], count, detail::cat(name, ": row ", r + 1)));
    if (row[3] < -90.0 || row[3] > 90.0) throw ConfigError(detail::cat(name, ": row ", r + 1, ": pitch outside [-90, 90]"));
    auto& views = tr.truth[n];
    if (with_pred && views.size() % static_cast<std::size_t>(gop) == 0) {
      if (row[6] < 0.0 || row[6] > 1.0) throw ConfigError(detail::cat(name, ": row ", r + 1, ": gamma outside [0, 1]"));
      preds[n].push_back({{row[4], row[5]}, row[6]});
    }
    views.push_back({row[2], row[3]});
  }
  for (std::size_t n = 1; n < tr.truth.size(); ++n)
    if (tr.truth[n].size() != tr.truth[0].size())
      throw ConfigError(detail::cat(name, ": user ", n, " has ", tr.truth[n].size(), " frames, user 0 has ", tr.truth[0].size()));
  if (with_pred) tr.predictions = std::move(preds);
  return tr;
}

inline NetworkTrace load_network_trace(const std::filesystem::path& path, int users = -1, int aps = -1) {
  return parse_network_trace(detail::read_file(path), users, aps, path.filename().string());
}

inline FovTrace load_fov_trace(const std::filesystem::path& path, int users, double fps, int gop) {
  return parse_fov_trace(detail::read_file(path), users, fps, gop, path.filename().string());
}

// ---------------------------------------------------------------------------
// Configuration

/// Raw configuration with defaults applied; files are loaded when parsed.
struct ConfigDocument {
  std::string id = "scenario";
  std::optional<std::uint64_t> seed;
  double duration = 30.0;
  Instance video;  // grid, ladder, QoE and loaded saliency maps
  FovExtent extent;
  double guarantee = 0.95;
  SynthSpec users;
  std::optional<Instance> instance;  // explicit single snapshot
  TraceSpec network;
  std::optional<NetworkTrace> network_file;
  HeadMotionSpec head_motion;
  std::optional<FovTrace> fov_file;
  double error_deg_per_s = 15.0;
  double accuracy_near = 0.95;
  double accuracy_far = 0.6;
  BufferParams buffer;
  AllocationParams allocation;
  std::vector<Strategy> strategies{Strategy::penalty};
  FovMode fov_mode = FovMode::predicted;
  SweepSpec sweep;
  std::vector<std::string> warnings;
};

namespace detail {

/// Typed access to one JSON object; remembers which keys were read so that
/// finish() can reject the rest.
class ConfigReader {
 public:
  ConfigReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(cat(where(), ": expected an object"));
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(cat(key_path(key), ": expected a number"));
    return v.get<double>();
  }
  double positive(const std::string& key, double fallback) {
    double v = number(key, fallback);
    if (!(v > 0.0)) throw ConfigError(cat(key_path(key), ": must be positive"));
    return v;
  }
  double non_negative(const std::string& key, double fallback) {
    double v = number(key, fallback);
    if (!(v >= 0.0)) throw ConfigError(cat(key_path(key), ": must be non-negative"));
    return v;
  }
  double fraction(const std::string& key, double fallback) {
    double v = number(key, fallback);
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(cat(key_path(key), ": must lie in [0, 1]"));
    return v;
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(cat(key_path(key), ": expected an integer"));
    return v.get<std::int64_t>();
  }
  int count(const std::string& key, int fallback, int min = 0) {
    auto v = integer(key, fallback);
    if (v < min || v > 1000000) throw ConfigError(cat(key_path(key), ": must be at least ", min));
    return static_cast<int>(v);
  }
  std::optional<std::uint64_t> seed(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw ConfigError(cat(key_path(key), ": expected a non-negative integer"));
    return v.get<std::uint64_t>();
  }
  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(cat(key_path(key), ": expected true or false"));
    return v.get<bool>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(cat(key_path(key), ": expected a string"));
    return v.get<std::string>();
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(cat(key_path(key), ": expected an array of numbers"));
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(cat(key_path(key), "[", i, "]: expected a number"));
      out.push_back(v[i].get<double>());
    }
    return out;
  }
  std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (v.is_string()) return {v.get<std::string>()};
    if (!v.is_array()) throw ConfigError(cat(key_path(key), ": expected an array of strings"));
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) throw ConfigError(cat(key_path(key), "[", i, "]: expected a string"));
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }
  /// Nested object; an absent key yields an empty object.
  ConfigReader object(const std::string& key) {
    static const Json empty = Json::object();
    if (!has(key)) return ConfigReader(empty, key_path(key));
    return ConfigReader(j_.at(key), key_path(key));
  }
  const Json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(cat("unknown key '", key_path(it.key()), "'"));
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& file) {
  std::filesystem::path p(file);
  return p.is_absolute() ? p : base / p;
}

inline void read_link(ConfigReader r, LinkModel& m) {
  m.bandwidth_mhz = r.positive("bandwidth_mhz", m.bandwidth_mhz);
  m.snr_at_1m_db = r.number("snr_at_1m_db", m.snr_at_1m_db);
  m.exponent = r.positive("exponent", m.exponent);
  m.efficiency = r.positive("efficiency", m.efficiency);
  m.cap = r.positive("cap", m.cap);
  r.finish();
}

inline Instance read_instance(ConfigReader r, const ConfigDocument& doc) {
  Instance inst;
  inst.grid = doc.video.grid;
  inst.ladder = doc.video.ladder;
  inst.qoe = doc.video.qoe;
  inst.saliency = doc.video.saliency;
  inst.ap_count = r.count("aps", 0);
  if (!r.has("users")) throw ConfigError(cat(r.key_path("users"), ": required"));
  const Json& users = r.raw("users");
  if (!users.is_array()) throw ConfigError(cat(r.key_path("users"), ": expected an array"));
  for (std::size_t n = 0; n < users.size(); ++n) {
    ConfigReader u(users[n], cat(r.key_path("users"), "[", n, "]"));
    UserState s;
    s.id = static_cast<int>(n);
    s.video = u.count("video", 0);
    s.r_lte = u.non_negative("r_lte", 0.0);
    s.r_wifi = u.numbers("r_wifi", std::vector<double>(static_cast<std::size_t>(inst.ap_count), 0.0));
    if (static_cast<int>(s.r_wifi.size()) != inst.ap_count)
      throw ConfigError(cat(u.key_path("r_wifi"), ": expected ", inst.ap_count, " entries"));
    for (double x : s.r_wifi)
      if (x < 0.0) throw ConfigError(cat(u.key_path("r_wifi"), ": rate < 0"));
    if (u.has("prediction")) {
      ConfigReader p = u.object("prediction");
      FovPrediction pred;
      pred.center.yaw = p.number("yaw", 0.0);
      pred.center.pitch = p.number("pitch", 0.0);
      pred.accuracy = p.fraction("gamma", 1.0);
      p.finish();
      s.prediction = pred;
    }
    u.finish();
    inst.users.push_back(std::move(s));
  }
  r.finish();
  return inst;
}

}  // namespace detail

/// Parses a JSON configuration. Relative file paths resolve against
/// `base_dir`. Syntax errors carry the line number and semantic errors the
/// key path.
inline ConfigDocument parse_config_document(const std::string& text, const std::filesystem::path& base_dir = ".") {
  using detail::cat;
  Json root;
  if (detail::trim(text).empty()) {
    root = Json::object();
  } else {
    try {
      root = Json::parse(text);
    } catch (const Json::parse_error& e) {
      std::size_t upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
      int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
      std::string msg = e.what();
      auto colon = msg.find(": ", msg.find("parse error"));
      throw ConfigError(cat("syntax error at line ", line, colon == std::string::npos ? "" : msg.substr(colon)));
    }
  }
  ConfigDocument doc;
  detail::ConfigReader r(root, "");
  doc.id = r.string("id", doc.id);
  doc.seed = r.seed("seed");
  doc.duration = r.positive("duration", doc.duration);

  {
    auto v = r.object("video");
    {
      auto g = v.object("grid");
      doc.video.grid.rows = g.count("rows", 4, 1);
      doc.video.grid.cols = g.count("cols", 8, 1);
      g.finish();
    }
    auto ladder = v.numbers("ladder", doc.video.ladder.rates);
    doc.video.ladder.rates = ladder;
    doc.buffer.fps = v.positive("fps", doc.buffer.fps);
    doc.buffer.gop = v.count("gop", doc.buffer.gop, 1);
    {
      auto f = v.object("fov");
      doc.extent.horizontal = f.positive("horizontal", doc.extent.horizontal);
      doc.extent.vertical = f.positive("vertical", doc.extent.vertical);
      f.finish();
    }
    doc.guarantee = v.number("guarantee", doc.guarantee);
    if (!(doc.guarantee > 0.0 && doc.guarantee <= 1.0)) throw ConfigError("video.guarantee: must lie in (0, 1]");
    doc.users.videos = v.count("videos", doc.users.videos, 1);
    for (const auto& file : v.strings("saliency", {})) {
      auto load = load_saliency(detail::resolve(base_dir, file), doc.video.grid.tile_count());
      for (auto& w : load.warnings) doc.warnings.push_back(w);
      doc.video.saliency.push_back(std::move(load.weights));
    }
    v.finish();
  }
  {
    auto q = r.object("qoe");
    doc.video.qoe.a = q.positive("a", doc.video.qoe.a);
    if (q.has("b")) doc.video.qoe.b = q.positive("b", 1.0);
    doc.video.qoe.mu = q.non_negative("mu", doc.video.qoe.mu);
    q.finish();
  }
  {
    // Validate ladder and QoE once the grid is known.
    Instance probe = doc.video;
    probe.saliency.clear();
    auto errs = validate_instance(probe);
    if (!errs.empty()) throw ConfigError("video: " + errs.front());
  }
  {
    auto u = r.object("users");
    auto& s = doc.users;
    s.users = u.count("count", s.users);
    s.aps = u.count("aps", s.aps);
    s.radius = u.positive("radius", s.radius);
    s.ap_ring = u.non_negative("ap_ring", s.ap_ring);
    s.user_spread = u.non_negative("user_spread", s.user_spread);
    s.congestion = u.boolean("congestion", s.congestion);
    s.congestion_from = u.count("congestion_from", s.congestion_from, 1);
    s.congestion_spread = u.non_negative("congestion_spread", s.congestion_spread);
    s.bandwidth_scale = u.positive("bandwidth_scale", s.bandwidth_scale);
    s.accuracy_low = u.fraction("accuracy_low", s.accuracy_low);
    s.accuracy_high = u.fraction("accuracy_high", s.accuracy_high);
    if (!(s.accuracy_low > 0.0 && s.accuracy_low <= s.accuracy_high))
      throw ConfigError("users.accuracy_low: must be positive and at most users.accuracy_high");
    detail::read_link(u.object("lte"), s.lte);
    detail::read_link(u.object("wifi"), s.wifi);
    u.finish();
  }
  if (r.has("instance")) doc.instance = detail::read_instance(r.object("instance"), doc);
  {
    auto n = r.object("network");
    auto& t = doc.network;
    t.pattern = parse_trace_pattern(n.string("pattern", std::string(trace_pattern_name(t.pattern))));
    t.t0 = n.non_negative("t0", t.t0);
    t.t1 = n.non_negative("t1", t.t1);
    if (t.t1 < t.t0) throw ConfigError("network.t1: must not precede network.t0");
    t.low = n.non_negative("low", t.low);
    t.period = n.positive("period", t.period);
    t.amplitude = n.non_negative("amplitude", t.amplitude);
    t.step = n.non_negative("step", t.step);
    if (n.has("file")) doc.network_file = load_network_trace(detail::resolve(base_dir, n.string("file", "")));
    n.finish();
  }
  {
    auto h = r.object("head_motion");
    doc.head_motion.yaw_speed = h.non_negative("yaw_speed", doc.head_motion.yaw_speed);
    doc.head_motion.pitch_limit = h.non_negative("pitch_limit", doc.head_motion.pitch_limit);
    doc.error_deg_per_s = h.non_negative("error_deg_per_s", doc.error_deg_per_s);
    doc.accuracy_near = h.fraction("accuracy_near", doc.accuracy_near);
    doc.accuracy_far = h.fraction("accuracy_far", doc.accuracy_far);
    if (h.has("file"))
      doc.fov_file = load_fov_trace(detail::resolve(base_dir, h.string("file", "")), -1, doc.buffer.fps, doc.buffer.gop);
    h.finish();
  }
  {
    auto b = r.object("buffer");
    auto& p = doc.buffer;
    p.policy = parse_buffer_policy(b.string("policy", std::string(buffer_policy_name(p.policy))));
    p.b1 = b.number("b1", p.b1);
    p.b2 = b.number("b2", p.b2);
    p.l = b.number("l", p.l);
    p.resume = b.number("resume", p.resume);
    p.prediction_horizon = b.non_negative("prediction_horizon", p.prediction_horizon);
    b.finish();
    auto errs = p.validate();
    if (!errs.empty()) throw ConfigError("buffer: " + errs.front());
  }
  {
    auto s = r.object("solver");
    auto& p = doc.allocation.solver;
    p.sigma = s.non_negative("sigma", p.sigma);
    p.max_iterations = s.count("max_iterations", p.max_iterations, 1);
    p.objective_tolerance = s.positive("objective_tolerance", p.objective_tolerance);
    p.feasibility_tolerance = s.positive("feasibility_tolerance", p.feasibility_tolerance);
    auto form = s.string("opt3_utility", "average_tile");
    if (form == "average_tile")
      p.opt3_utility = Opt3Utility::average_tile;
    else if (form == "aggregate")
      p.opt3_utility = Opt3Utility::aggregate;
    else
      throw ConfigError(cat("solver.opt3_utility: unknown form '", form, "'"));
    s.finish();
  }
  {
    auto a = r.object("allocation");
    doc.strategies.clear();
    for (const auto& name : a.strings("strategies", {"penalty"})) doc.strategies.push_back(parse_strategy(name));
    if (doc.strategies.empty()) throw ConfigError("allocation.strategies: must not be empty");
    doc.fov_mode = parse_fov_mode(a.string("fov_mode", "predicted"));
    doc.allocation.multi_ap_threshold = a.non_negative("multi_ap_threshold", doc.allocation.multi_ap_threshold);
    doc.allocation.oracle_cap = a.integer("oracle_cap", doc.allocation.oracle_cap);
    doc.allocation.oracle_level_cap = a.integer("oracle_level_cap", doc.allocation.oracle_level_cap);
    if (doc.allocation.oracle_cap < 1) throw ConfigError("allocation.oracle_cap: must be at least 1");
    a.finish();
  }
  {
    auto s = r.object("sweep");
    doc.sweep.bandwidth_scales = s.numbers("bandwidth_scales", {});
    for (double x : doc.sweep.bandwidth_scales)
      if (!(x > 0.0)) throw ConfigError("sweep.bandwidth_scales: entries must be positive");
    for (double x : s.numbers("user_counts", {})) {
      if (x != std::floor(x) || x < 1) throw ConfigError("sweep.user_counts: entries must be positive integers");
      doc.sweep.user_counts.push_back(static_cast<int>(x));
    }
    doc.sweep.seeds = s.count("seeds", doc.sweep.seeds, 1);
    s.finish();
  }
  r.finish();
  return doc;
}

/// Scenario from a document. Synthesis draws from the seed (0 when absent;
/// callers that need reproducibility check for it).
inline Scenario build_scenario(const ConfigDocument& doc) {
  using detail::cat;
  const std::uint64_t seed = doc.seed.value_or(0);
  Scenario sc;
  sc.id = doc.id;
  sc.seed = doc.seed;
  sc.extent = doc.extent;
  sc.guarantee = doc.guarantee;
  sc.buffer = doc.buffer;
  sc.allocation = doc.allocation;
  sc.strategies = doc.strategies;
  sc.fov_mode = doc.fov_mode;
  sc.duration = doc.duration;

  SynthSpec spec = doc.users;
  spec.extent = doc.extent;
  spec.guarantee = doc.guarantee;
  if (doc.network_file) {
    spec.users = doc.network_file->users;
    spec.aps = doc.network_file->aps;
  }
  if (doc.instance) {
    sc.base = *doc.instance;
    if (sc.base.saliency.empty()) {
      Rng rng(seed);
      int videos = 1;
      for (const auto& u : sc.base.users) videos = std::max(videos, u.video + 1);
      for (int v = 0; v < videos; ++v) sc.base.saliency.push_back(detail::synth_saliency(sc.base.grid, rng));
    }
    for (std::size_t n = 0; n < sc.base.users.size(); ++n) {
      const auto& u = sc.base.users[n];
      if (u.prediction)
        sc.base.fovs.push_back(enumerate_probable_fovs(*u.prediction, sc.extent, sc.base.grid, sc.guarantee));
      else
        sc.base.fovs.push_back(ProbableFovSet::whole_frame(sc.base.tile_count()));
    }
  } else {
    sc.base = synth_instance(spec, seed, doc.video);
  }
  auto errs = validate_instance(sc.base);
  if (!errs.empty()) throw ConfigError("instance: " + errs.front());

  TraceSpec ts = doc.network;
  ts.duration = doc.duration;
  ts.epoch = doc.buffer.segment_seconds();
  if (doc.network_file) {
    if (doc.instance && (doc.network_file->users != sc.base.user_count() || doc.network_file->aps != sc.base.ap_count))
      throw ConfigError(cat("network.file: trace has ", doc.network_file->users, " users and ", doc.network_file->aps,
                            " APs, instance has ", sc.base.user_count(), " and ", sc.base.ap_count));
    sc.network = *doc.network_file;
  } else {
    sc.network = synth_trace(ts, sc.base, seed + 1);
  }
  if (doc.fov_file) {
    if (doc.fov_file->users() != sc.base.user_count())
      throw ConfigError(cat("head_motion.file: trace has ", doc.fov_file->users(), " users, scenario has ",
                            sc.base.user_count()));
    sc.fov = *doc.fov_file;
  } else {
    HeadMotionSpec hm = doc.head_motion;
    hm.duration = doc.duration;
    hm.fps = doc.buffer.fps;
    hm.gop = doc.buffer.gop;
    sc.fov = synth_fov_trace(hm, sc.base.user_count(), seed + 2);
  }
  sc.fov.error_deg_per_s = doc.error_deg_per_s;
  sc.fov.accuracy_near = doc.accuracy_near;
  sc.fov.accuracy_far = doc.accuracy_far;
  sc.fov.horizon = doc.buffer.prediction_horizon;
  sc.fov.seed = seed + 3;

  sc.sweep = doc.sweep;
  sc.sweep.synth = spec;
  return sc;
}

inline Scenario parse_config(const std::string& text, const std::filesystem::path& base_dir = ".") {
  return build_scenario(parse_config_document(text, base_dir));
}

// ---------------------------------------------------------------------------
// Result tables

struct ResultRow {
  std::string scenario;
  std::string strategy;
  std::string point;
  std::string metric;
  double value = 0.0;

  bool operator==(const ResultRow&) const = default;
};

struct ResultTable {
  std::vector<ResultRow> rows;

  void add(std::string scenario, std::string strategy, std::string point, std::string metric, double value) {
    rows.push_back({std::move(scenario), std::move(strategy), std::move(point), std::move(metric), value});
  }
  bool operator==(const ResultTable&) const = default;

  /// Copy with every value rounded to the emitted precision.
  ResultTable rounded() const {
    ResultTable out = *this;
    for (auto& r : out.rows) r.value = std::strtod(detail::format_number(r.value).c_str(), nullptr);
    return out;
  }
};

inline constexpr int kSchemaVersion = 1;
inline const std::vector<std::string> kResultColumns{"scenario", "strategy", "point", "metric", "value"};

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

inline std::string format_csv(const ResultTable& t) {
  std::string out;
  for (std::size_t c = 0; c < kResultColumns.size(); ++c) out += (c ? "," : "") + kResultColumns[c];
  out += "\n";
  for (const auto& r : t.rows) {
    out += detail::csv_field(r.scenario) + "," + detail::csv_field(r.strategy) + "," + detail::csv_field(r.point) + "," +
           detail::csv_field(r.metric) + "," + detail::format_number(r.value) + "\n";
  }
  return out;
}

inline std::string format_json(const ResultTable& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    Json value;
    if (std::isfinite(r.value))
      value = std::strtod(detail::format_number(r.value).c_str(), nullptr);
    else
      value = nullptr;
    rows.push_back(Json::array({r.scenario, r.strategy, r.point, r.metric, value}));
  }
  Json doc = Json::object();
  doc["schema_version"] = kSchemaVersion;
  doc["columns"] = kResultColumns;
  doc["rows"] = std::move(rows);
  return doc.dump(1) + "\n";
}

inline ResultTable parse_report_json(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("report: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("schema_version") || doc["schema_version"] != kSchemaVersion)
    throw ConfigError(detail::cat("report: unsupported schema version (expected ", kSchemaVersion, ")"));
  ResultTable t;
  for (const auto& row : doc.at("rows")) {
    if (!row.is_array() || row.size() != kResultColumns.size()) throw ConfigError("report: malformed row");
    double v = row[4].is_null() ? std::nan("") : row[4].get<double>();
    t.add(row[0].get<std::string>(), row[1].get<std::string>(), row[2].get<std::string>(), row[3].get<std::string>(), v);
  }
  return t;
}

enum class ReportFormat { csv, json };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  throw ConfigError(detail::cat("unknown format '", s, "' (expected csv or json)"));
}

inline void emit_report(const ResultTable& t, ReportFormat format, const std::filesystem::path& path) {
  detail::write_file(path, format == ReportFormat::csv ? format_csv(t) : format_json(t));
}

inline ResultTable load_report_json(const std::filesystem::path& path) { return parse_report_json(detail::read_file(path)); }

// ---------------------------------------------------------------------------
// Reports as tables

inline void append_allocation(ResultTable& t, const std::string& scenario, const std::string& strategy,
                              const Allocation& alloc, const Instance& inst) {
  t.add(scenario, strategy, "system", "system_qoe", system_qoe(alloc, inst));
  for (int n = 0; n < inst.user_count(); ++n) {
    const auto& ua = alloc.users[static_cast<std::size_t>(n)];
    std::string point = detail::cat("user=", n);
    t.add(scenario, strategy, point, "per_user_qoe", user_qoe(inst, n, ua.tile_rates));
    t.add(scenario, strategy, point, "ap", ua.ap == kNoAp ? 0 : ua.ap + 1);
    t.add(scenario, strategy, point, "d_lte", ua.d_lte);
    t.add(scenario, strategy, point, "d_wifi", ua.wifi_total());
    for (std::size_t j = 0; j < ua.levels.size(); ++j)
      t.add(scenario, strategy, point, detail::cat("level_", j), ua.levels[j]);
  }
}

inline void append_session(ResultTable& t, const std::string& scenario, const SessionReport& rep, bool per_epoch = true) {
  const std::string who = rep.strategy + "/" + rep.policy;
  t.add(scenario, who, "session", "avg_viewed_qoe", rep.avg_viewed_qoe());
  t.add(scenario, who, "session", "mean_system_qoe", rep.mean_system_qoe());
  t.add(scenario, who, "session", "stall_count", rep.stall_count());
  t.add(scenario, who, "session", "stall_time", rep.stall_time);
  t.add(scenario, who, "session", "play_time", rep.play_time);
  t.add(scenario, who, "session", "startup_time", rep.startup_time);
  for (std::size_t n = 0; n < rep.samples.size(); ++n)
    t.add(scenario, who, detail::cat("user=", n), "avg_viewed_qoe", rep.user_viewed_qoe(static_cast<int>(n)));
  for (std::size_t k = 0; k < rep.stalls.size(); ++k) {
    std::string point = detail::cat("stall=", k);
    t.add(scenario, who, point, "user", rep.stalls[k].user);
    t.add(scenario, who, point, "start", rep.stalls[k].start);
    t.add(scenario, who, point, "duration", rep.stalls[k].duration);
  }
  if (!per_epoch) return;
  for (std::size_t e = 0; e < rep.system_qoe.size(); ++e) {
    std::string point = detail::cat("epoch=", e);
    t.add(scenario, who, point, "system_qoe", rep.system_qoe[e]);
    t.add(scenario, who, point, "buffer", rep.buffer_level[e]);
    for (std::size_t n = 0; n < rep.user_qoe[e].size(); ++n)
      t.add(scenario, who, detail::cat(point, ";user=", n), "per_user_qoe", rep.user_qoe[e][n]);
  }
}

inline void append_comparison(ResultTable& t, const std::string& scenario, const ComparisonReport& rep) {
  for (const auto& s : rep.sessions) append_session(t, scenario, s, false);
  for (const auto& p : rep.sweep) {
    std::string point = detail::cat(p.axis, "=", detail::format_number(p.x));
    t.add(scenario, p.strategy, point, "system_qoe", p.system_qoe);
    t.add(scenario, p.strategy, point, "infeasible", p.infeasible);
  }
}

}  // namespace tilevr
