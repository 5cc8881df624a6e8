#include "msense/config.hpp"

#include "msense/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace msense {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) items.push_back(trim(item));
  return items;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ConfigError("invalid value '" + text + "' for key '" + key + "'");
  return value;
}

std::size_t parse_count(const std::string& key, const std::string& text) {
  return parse_number<std::size_t>(key, text);
}

double parse_real(const std::string& key, const std::string& text) {
  const double v = parse_number<double>(key, text);
  if (!std::isfinite(v)) throw ConfigError("non-finite value for key '" + key + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("invalid boolean '" + text + "' for key '" + key + "'");
}

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& format) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += format(items[i]);
  }
  return out;
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <std::size_t ExperimentConfig::*Member>
Field count_field() {
  return {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.*Member = parse_count(k, v);
          },
          [](const ExperimentConfig& c) { return std::to_string(c.*Member); }};
}

template <double ExperimentConfig::*Member>
Field real_field() {
  return {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.*Member = parse_real(k, v);
          },
          [](const ExperimentConfig& c) { return format_real(c.*Member); }};
}

template <bool ExperimentConfig::*Member>
Field bool_field() {
  return {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.*Member = parse_bool(k, v);
          },
          [](const ExperimentConfig& c) { return std::string(c.*Member ? "true" : "false"); }};
}

template <std::uint64_t ExperimentConfig::*Member>
Field seed_field() {
  return {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.*Member = parse_number<std::uint64_t>(k, v);
          },
          [](const ExperimentConfig& c) { return std::to_string(c.*Member); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"kind",
       {[](ExperimentConfig& c, const std::string&, const std::string& v) {
          c.kind = experiment_kind_from_string(v);
        },
        [](const ExperimentConfig& c) { return c.kind ? to_string(*c.kind) : std::string(); }}},
      {"d", count_field<&ExperimentConfig::d>()},
      {"r", count_field<&ExperimentConfig::r>()},
      {"r_list",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
          c.r_list.clear();
          for (const auto& item : split_list(v)) c.r_list.push_back(parse_count(k, item));
        },
        [](const ExperimentConfig& c) {
          return join(c.r_list, [](std::size_t x) { return std::to_string(x); });
        }}},
      {"kappa", real_field<&ExperimentConfig::kappa>()},
      {"sigma0", real_field<&ExperimentConfig::sigma0>()},
      {"spectrum",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
          if (v == "log") c.spectrum = SpectrumPolicy::kLogSpaced;
          else if (v == "linear") c.spectrum = SpectrumPolicy::kLinear;
          else throw ConfigError("invalid value '" + v + "' for key '" + k + "'");
        },
        [](const ExperimentConfig& c) {
          return std::string(c.spectrum == SpectrumPolicy::kLogSpaced ? "log" : "linear");
        }}},
      {"sigma", real_field<&ExperimentConfig::sigma>()},
      {"sigma_list",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
          c.sigma_list.clear();
          for (const auto& item : split_list(v)) c.sigma_list.push_back(parse_real(k, item));
        },
        [](const ExperimentConfig& c) { return join(c.sigma_list, format_real); }}},
      {"m",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
          c.m = parse_count(k, v);
        },
        [](const ExperimentConfig& c) { return c.m ? std::to_string(*c.m) : std::string(); }}},
      {"m_factor", real_field<&ExperimentConfig::m_factor>()},
      {"m_list",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
          c.m_list.clear();
          for (const auto& item : split_list(v)) c.m_list.push_back(parse_count(k, item));
        },
        [](const ExperimentConfig& c) {
          return join(c.m_list, [](std::size_t x) { return std::to_string(x); });
        }}},
      {"m_grid_points", count_field<&ExperimentConfig::m_grid_points>()},
      {"m_grid_low", real_field<&ExperimentConfig::m_grid_low>()},
      {"m_grid_high", real_field<&ExperimentConfig::m_grid_high>()},
      {"bisection_steps", count_field<&ExperimentConfig::bisection_steps>()},
      {"storage",
       {[](ExperimentConfig& c, const std::string&, const std::string& v) {
          c.storage = storage_mode_from_string(v);
        },
        [](const ExperimentConfig& c) { return to_string(c.storage); }}},
      {"trials", count_field<&ExperimentConfig::trials>()},
      {"seed", seed_field<&ExperimentConfig::seed>()},
      {"net_seed", seed_field<&ExperimentConfig::net_seed>()},
      {"threads", count_field<&ExperimentConfig::threads>()},
      {"step_size",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
          if (v == "auto") c.step_size.reset();
          else c.step_size = parse_real(k, v);
        },
        [](const ExperimentConfig& c) {
          return c.step_size ? format_real(*c.step_size) : std::string("auto");
        }}},
      {"step_constant", real_field<&ExperimentConfig::step_constant>()},
      {"max_iters", count_field<&ExperimentConfig::max_iters>()},
      {"tol", real_field<&ExperimentConfig::tol>()},
      {"log_every", count_field<&ExperimentConfig::log_every>()},
      {"blind", bool_field<&ExperimentConfig::blind>()},
      {"stall_window", count_field<&ExperimentConfig::stall_window>()},
      {"success_tol", real_field<&ExperimentConfig::success_tol>()},
      {"success_rate", real_field<&ExperimentConfig::success_rate>()},
      {"plateau_low", real_field<&ExperimentConfig::plateau_low>()},
      {"plateau_high", real_field<&ExperimentConfig::plateau_high>()},
      {"plateau_window", count_field<&ExperimentConfig::plateau_window>()},
      {"timing", bool_field<&ExperimentConfig::timing>()},
      {"iterations", count_field<&ExperimentConfig::iterations>()},
      {"identity_checks", count_field<&ExperimentConfig::identity_checks>()},
      {"rip_probes", count_field<&ExperimentConfig::rip_probes>()},
      {"rip_refine", bool_field<&ExperimentConfig::rip_refine>()},
      {"audit_rows",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
          if (v != "first" && v != "all" && v != "none")
            throw ConfigError("invalid value '" + v + "' for key '" + k + "'");
          c.audit_rows = v;
        },
        [](const ExperimentConfig& c) { return c.audit_rows; }}},
      {"consequence_trials", count_field<&ExperimentConfig::consequence_trials>()},
      {"out",
       {[](ExperimentConfig& c, const std::string&, const std::string& v) { c.out = v; },
        [](const ExperimentConfig& c) { return c.out; }}},
  };
  return table;
}

void validate(const ExperimentConfig& c) {
  if (c.d < 1) throw ConfigError("d must be at least 1");
  for (std::size_t rank : c.ranks())
    if (rank < 1 || rank > c.d) throw ConfigError("every rank must satisfy 1 <= r <= d");
  if (!(c.kappa >= 1.0)) throw ConfigError("kappa must be at least 1");
  if (!(c.sigma0 > 0.0)) throw ConfigError("sigma0 must be positive");
  if (!(c.sigma >= 0.0)) throw ConfigError("sigma must be nonnegative");
  for (double s : c.sigma_list)
    if (!(s >= 0.0)) throw ConfigError("sigma_list entries must be nonnegative");
  if (c.m && *c.m < 1) throw ConfigError("m must be at least 1");
  if (!(c.m_factor > 0.0)) throw ConfigError("m_factor must be positive");
  for (std::size_t m : c.m_list)
    if (m < 1) throw ConfigError("m_list entries must be at least 1");
  if (c.m_grid_points < 2) throw ConfigError("m_grid_points must be at least 2");
  if (!(c.m_grid_low > 0.0 && c.m_grid_high > c.m_grid_low))
    throw ConfigError("need 0 < m_grid_low < m_grid_high");
  if (c.trials < 1) throw ConfigError("trials must be at least 1");
  if (c.threads < 1) throw ConfigError("threads must be at least 1");
  if (c.step_size && !(*c.step_size >= 0.0)) throw ConfigError("step_size must be nonnegative");
  if (!(c.step_constant > 0.0)) throw ConfigError("step_constant must be positive");
  if (c.max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (!(c.tol > 0.0)) throw ConfigError("tol must be positive");
  if (c.log_every < 1) throw ConfigError("log_every must be at least 1");
  if (!(c.success_tol > 0.0)) throw ConfigError("success_tol must be positive");
  if (!(c.success_rate > 0.0 && c.success_rate <= 1.0))
    throw ConfigError("success_rate must lie in (0, 1]");
  if (!(c.plateau_low < 1.0 && c.plateau_high > 1.0))
    throw ConfigError("need plateau_low < 1 < plateau_high");
  if (c.plateau_window < 1) throw ConfigError("plateau_window must be at least 1");
  if (c.iterations < 1) throw ConfigError("iterations must be at least 1");
  if (c.out.empty()) throw ConfigError("out must not be empty");
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kRecover: return "recover";
    case ExperimentKind::kPhase: return "phase";
    case ExperimentKind::kNoiseFloor: return "noise-floor";
    case ExperimentKind::kDiagnostics: return "diagnostics";
    case ExperimentKind::kLowerBound: return "lower-bound";
    case ExperimentKind::kRip: return "rip";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (auto kind : {ExperimentKind::kRecover, ExperimentKind::kPhase, ExperimentKind::kNoiseFloor,
                    ExperimentKind::kDiagnostics, ExperimentKind::kLowerBound, ExperimentKind::kRip})
    if (to_string(kind) == name) return kind;
  throw ConfigError("unknown experiment kind '" + name + "'");
}

std::size_t ExperimentConfig::samples_for(std::size_t rank) const {
  if (m) return *m;
  const double value = m_factor * static_cast<double>(rank * d) * kappa * kappa;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(value)));
}

std::vector<std::size_t> ExperimentConfig::ranks() const {
  return r_list.empty() ? std::vector<std::size_t>{r} : r_list;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = fields().find(key);
    if (it == fields().end())
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second)
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    // Empty values leave optional fields unset.
    if (value.empty()) continue;
    it->second.set(config, key, value);
  }
  validate(config);
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::map<std::string, std::string> config_entries(const ExperimentConfig& config) {
  std::map<std::string, std::string> out;
  for (const auto& [key, field] : fields()) out[key] = field.get(config);
  return out;
}

std::string render_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& [key, value] : config_entries(config)) out += key + " = " + value + "\n";
  return out;
}

}  // namespace msense
