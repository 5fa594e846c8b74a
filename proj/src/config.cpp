#include "scm/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace scm {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Malformed values surface as invalid_argument and get line/key context added
// by the parser.
[[noreturn]] void bad_value(std::string_view what, std::string_view value) {
  throw std::invalid_argument("expected " + std::string(what) + ", got '" + std::string(value) + "'");
}

std::vector<std::string_view> split_list(std::string_view value) {
  std::vector<std::string_view> items;
  while (true) {
    const auto comma = value.find(',');
    const auto item = trim(value.substr(0, comma));
    if (item.empty()) bad_value("a comma separated list without empty items", value);
    items.push_back(item);
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return items;
}

double to_double(std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) bad_value("a finite number", v);
  return out;
}

template <class Int>
Int to_integer(std::string_view v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value("an integer", v);
  return out;
}

bool to_bool(std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad_value("true or false", v);
}

std::optional<std::uint64_t> to_seed(std::string_view v) {
  if (v == "auto") return std::nullopt;
  return to_integer<std::uint64_t>(v);
}

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

std::string format_seed(const std::optional<std::uint64_t>& s) { return s ? std::to_string(*s) : "auto"; }

template <class T, class F>
std::string join(const std::vector<T>& items, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += fmt(items[i]);
  }
  return out;
}

std::vector<AggregatorKind> to_aggregators(std::string_view v) {
  std::vector<AggregatorKind> out;
  for (auto item : split_list(v)) out.push_back(parse_aggregator_kind(item));
  return out;
}

std::string format_aggregators(const std::vector<AggregatorKind>& kinds) {
  return join(kinds, [](AggregatorKind k) { return std::string(aggregator_name(k)); });
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, std::string_view)> parse;
  std::function<std::string(const ExperimentConfig&)> format;
};

#define SCM_DOUBLE(sec, name, member)                                                   \
  Field {                                                                               \
    sec, name, [](ExperimentConfig& c, std::string_view v) { c.member = to_double(v); }, \
        [](const ExperimentConfig& c) { return format_double(c.member); }               \
  }
#define SCM_INT(sec, name, member)                                                          \
  Field {                                                                                   \
    sec, name, [](ExperimentConfig& c, std::string_view v) { c.member = to_integer<int>(v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }                  \
  }
#define SCM_SEED(sec, name, member)                                                   \
  Field {                                                                             \
    sec, name, [](ExperimentConfig& c, std::string_view v) { c.member = to_seed(v); }, \
        [](const ExperimentConfig& c) { return format_seed(c.member); }               \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"run", "seed", [](ExperimentConfig& c, std::string_view v) { c.seed = to_integer<std::uint64_t>(v); },
       [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      SCM_INT("run", "repeats", repeats),
      SCM_INT("run", "threads", threads),

      SCM_INT("topology", "agents", agents),
      SCM_DOUBLE("topology", "edge_probability", edge_probability),
      {"topology", "malicious",
       [](ExperimentConfig& c, std::string_view v) {
         c.malicious.clear();
         for (auto item : split_list(v)) c.malicious.push_back(to_integer<int>(item));
       },
       [](const ExperimentConfig& c) { return join(c.malicious, [](int b) { return std::to_string(b); }); }},
      SCM_SEED("topology", "seed", topology_seed),

      SCM_INT("model", "dim", dim),
      SCM_DOUBLE("model", "noise_var", noise_var),
      SCM_SEED("model", "w_seed", w_seed),

      SCM_DOUBLE("learning", "step_size", step_size),
      SCM_INT("learning", "iterations", iterations),
      SCM_DOUBLE("learning", "huber_delta", huber_delta),
      SCM_INT("learning", "batch_size", batch_size),

      {"aggregators", "list", [](ExperimentConfig& c, std::string_view v) { c.aggregators = to_aggregators(v); },
       [](const ExperimentConfig& c) { return format_aggregators(c.aggregators); }},
      SCM_DOUBLE("aggregators", "alpha", alpha),
      SCM_DOUBLE("aggregators", "talwar_c", talwar_c),
      SCM_DOUBLE("aggregators", "tukey_c", tukey_c),
      SCM_DOUBLE("aggregators", "tol", tol),
      SCM_INT("aggregators", "max_iter", max_iter),

      {"attack", "kinds",
       [](ExperimentConfig& c, std::string_view v) {
         c.attacks.clear();
         for (auto item : split_list(v)) {
           c.attacks.push_back(item == "none" ? std::nullopt : std::optional(parse_attack_kind(item)));
         }
       },
       [](const ExperimentConfig& c) {
         return join(c.attacks, [](const std::optional<AttackKind>& a) {
           return a ? std::string(attack_name(*a)) : std::string("none");
         });
       }},
      SCM_DOUBLE("attack", "lv_magnitude", lv_magnitude),
      {"attack", "epsilon",
       [](ExperimentConfig& c, std::string_view v) {
         c.epsilon = v == "auto" ? std::nullopt : std::optional(to_double(v));
       },
       [](const ExperimentConfig& c) { return c.epsilon ? format_double(*c.epsilon) : std::string("auto"); }},

      {"output", "dir",
       [](ExperimentConfig& c, std::string_view v) {
         if (v.empty()) bad_value("a directory path", v);
         c.dir = std::string(v);
       },
       [](const ExperimentConfig& c) { return c.dir; }},
      {"output", "metrics",
       [](ExperimentConfig& c, std::string_view v) {
         c.metrics.clear();
         for (auto item : split_list(v)) {
           if (item == "loss") {
             c.metrics.push_back(Metric::kLoss);
           } else if (item == "msd") {
             c.metrics.push_back(Metric::kMsd);
           } else {
             bad_value("loss or msd", item);
           }
         }
       },
       [](const ExperimentConfig& c) { return join(c.metrics, [](Metric m) { return std::string(metric_name(m)); }); }},

      {"sweep", "aggregators", [](ExperimentConfig& c, std::string_view v) { c.sweep_aggregators = to_aggregators(v); },
       [](const ExperimentConfig& c) { return format_aggregators(c.sweep_aggregators); }},
      SCM_INT("sweep", "base_size", base_size),
      SCM_SEED("sweep", "base_seed", base_seed),
      SCM_DOUBLE("sweep", "z_min", z_min),
      SCM_DOUBLE("sweep", "z_max", z_max),
      SCM_INT("sweep", "grid_points", grid_points),
      SCM_INT("sweep", "count", outlier_count),
      {"sweep", "markers", [](ExperimentConfig& c, std::string_view v) { c.markers = to_bool(v); },
       [](const ExperimentConfig& c) { return std::string(c.markers ? "true" : "false"); }},

      {"efficiency", "estimators",
       [](ExperimentConfig& c, std::string_view v) { c.efficiency_estimators = to_aggregators(v); },
       [](const ExperimentConfig& c) { return format_aggregators(c.efficiency_estimators); }},
      SCM_INT("efficiency", "trials", trials),
      SCM_INT("efficiency", "sample_size", sample_size),
  };
  return table;
}

#undef SCM_DOUBLE
#undef SCM_INT
#undef SCM_SEED

void fail(const std::string& key, const std::string& message) { throw ConfigError(0, key, message); }

template <class T>
bool has_duplicates(std::vector<T> items) {
  std::sort(items.begin(), items.end());
  return std::adjacent_find(items.begin(), items.end()) != items.end();
}

}  // namespace

std::string_view metric_name(Metric metric) { return metric == Metric::kLoss ? "loss" : "msd"; }

ConfigError::ConfigError(int line, std::string key, const std::string& message)
    : std::runtime_error((line > 0 ? "line " + std::to_string(line) + ": " : std::string()) +
                         (key.empty() ? std::string() : key + ": ") + message),
      line_(line),
      key_(std::move(key)) {}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::string section;
  std::set<std::string> seen;
  int line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "", "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      const bool known = std::any_of(fields().begin(), fields().end(), [&](const Field& f) { return f.section == section; });
      if (!known) throw ConfigError(line_no, section, "unknown section");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(line_no, "", "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError(line_no, key, "key outside of any section");
    const std::string full = section + "." + key;
    const auto it = std::find_if(fields().begin(), fields().end(),
                                 [&](const Field& f) { return f.section == section && f.key == key; });
    if (it == fields().end()) throw ConfigError(line_no, full, "unknown key");
    if (!seen.insert(full).second) throw ConfigError(line_no, full, "duplicate key");
    try {
      it->parse(cfg, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(line_no, full, e.what());
    }
  }
  validate(cfg);
  return cfg;
}

void validate(const ExperimentConfig& c) {
  if (c.repeats < 1) fail("run.repeats", "must be >= 1");
  if (c.threads < 1) fail("run.threads", "must be >= 1");
  if (c.agents < 2) fail("topology.agents", "must be >= 2");
  if (!(c.edge_probability > 0.0 && c.edge_probability <= 1.0)) fail("topology.edge_probability", "must lie in (0, 1]");
  if (c.malicious.empty()) fail("topology.malicious", "must list at least one count");
  for (int b : c.malicious) {
    if (b < 0 || 2 * b >= c.agents) {
      fail("topology.malicious", "count " + std::to_string(b) + " violates 0 <= malicious < agents/2");
    }
  }
  if (has_duplicates(c.malicious)) fail("topology.malicious", "duplicate count");
  if (c.dim < 1) fail("model.dim", "must be >= 1");
  if (!(c.noise_var > 0.0)) fail("model.noise_var", "must be positive");
  if (!(c.step_size > 0.0)) fail("learning.step_size", "must be positive");
  if (c.iterations < 1) fail("learning.iterations", "must be >= 1");
  if (!(c.huber_delta > 0.0)) fail("learning.huber_delta", "must be positive");
  if (c.batch_size < 1) fail("learning.batch_size", "must be >= 1");
  if (c.aggregators.empty()) fail("aggregators.list", "must name at least one aggregator");
  if (has_duplicates(c.aggregators)) fail("aggregators.list", "duplicate aggregator");
  if (!(c.alpha >= 0.0 && c.alpha < 0.5)) fail("aggregators.alpha", "must lie in [0, 0.5)");
  if (!(c.talwar_c > 0.0)) fail("aggregators.talwar_c", "must be positive");
  if (!(c.tukey_c > 0.0)) fail("aggregators.tukey_c", "must be positive");
  if (!(c.tol > 0.0)) fail("aggregators.tol", "must be positive");
  if (c.max_iter < 1) fail("aggregators.max_iter", "must be >= 1");
  if (c.attacks.empty()) fail("attack.kinds", "must list at least one entry (use 'none' for no attack)");
  if (has_duplicates(c.attacks)) fail("attack.kinds", "duplicate attack");
  if (c.epsilon && !(*c.epsilon > 0.0)) fail("attack.epsilon", "must be positive");
  const bool any_attack = std::any_of(c.attacks.begin(), c.attacks.end(), [](const auto& a) { return a.has_value(); });
  const bool any_malicious = std::any_of(c.malicious.begin(), c.malicious.end(), [](int b) { return b > 0; });
  if (any_attack && !any_malicious) fail("topology.malicious", "attacks are configured but every malicious count is 0");
  if (c.dir.empty() || c.dir.find_first_of("#\n\r") != std::string::npos || c.dir != trim(c.dir)) {
    fail("output.dir", "must be a non-empty path without '#', line breaks or surrounding blanks");
  }
  if (c.metrics.empty()) fail("output.metrics", "must name at least one metric");
  if (has_duplicates(c.metrics)) fail("output.metrics", "duplicate metric");
  if (c.sweep_aggregators.empty()) fail("sweep.aggregators", "must name at least one aggregator");
  if (has_duplicates(c.sweep_aggregators)) fail("sweep.aggregators", "duplicate aggregator");
  if (c.base_size < 1) fail("sweep.base_size", "must be >= 1");
  if (!(c.z_max >= c.z_min)) fail("sweep.z_max", "must be >= z_min");
  if (c.grid_points < 1) fail("sweep.grid_points", "must be >= 1");
  if (c.grid_points > 1 && !(c.z_max > c.z_min)) fail("sweep.z_max", "must exceed z_min for more than one point");
  if (c.outlier_count < 1) fail("sweep.count", "must be >= 1");
  if (c.efficiency_estimators.empty()) fail("efficiency.estimators", "must name at least one estimator");
  if (has_duplicates(c.efficiency_estimators)) fail("efficiency.estimators", "duplicate estimator");
  if (c.trials < 1000) fail("efficiency.trials", "must be >= 1000");
  if (c.sample_size < 1) fail("efficiency.sample_size", "must be >= 1");
}

std::string to_text(const ExperimentConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.format(cfg) << '\n';
  }
  return out.str();
}

AggregatorSpec make_aggregator(const ExperimentConfig& cfg, AggregatorKind kind) {
  AggregatorSpec spec{kind};
  spec.alpha = cfg.alpha;
  spec.c = kind == AggregatorKind::kTalwar ? cfg.talwar_c : cfg.tukey_c;
  spec.fixed_point_tol = cfg.tol;
  spec.fixed_point_max_iter = cfg.max_iter;
  return spec;
}

AttackSpec make_attack(const ExperimentConfig& cfg, AttackKind kind) {
  AttackSpec spec{kind};
  spec.lv_magnitude = cfg.lv_magnitude;
  spec.target_alpha = cfg.alpha;
  spec.target_c = kind == AttackKind::kTalwarScm ? cfg.talwar_c : cfg.tukey_c;
  spec.epsilon = cfg.epsilon;
  return spec;
}

}  // namespace scm
