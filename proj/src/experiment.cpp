#include "divlab/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "divlab/error.hpp"
#include "divlab/parallel.hpp"
#include "divlab/ssl.hpp"
#include "divlab/trainer.hpp"
#include "divlab/variance_lab.hpp"
#include "divlab/version.hpp"

namespace divlab {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Command c) {
  switch (c) {
    case Command::MiBench:
      return "mi-bench";
    case Command::VarianceLab:
      return "variance-lab";
    case Command::SslDemo:
      return "ssl-demo";
    case Command::Selftest:
      return "selftest";
  }
  return "?";
}

Command parse_command(std::string_view name) {
  for (Command c : {Command::MiBench, Command::VarianceLab, Command::SslDemo, Command::Selftest}) {
    if (name == to_string(c)) {
      return c;
    }
  }
  throw ConfigError("unknown command '" + std::string(name) +
                    "' (expected mi-bench, variance-lab, ssl-demo or selftest)");
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) {
      out += ",";
    }
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
    ++b;
  }
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
    --e;
  }
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  if (out.size() == 1 && out[0].empty()) {
    out.clear();
  }
  return out;
}

double parse_real(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size()) {
    throw ConfigError(std::string(key) + ": '" + t + "' is not a number");
  }
  return v;
}

std::uint64_t parse_count(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    throw ConfigError(std::string(key) + ": '" + t + "' is not a non-negative integer");
  }
  try {
    return std::stoull(t);
  } catch (const std::exception&) {
    throw ConfigError(std::string(key) + ": '" + t + "' is out of range");
  }
}

bool parse_bool(std::string_view key, std::string_view text) {
  std::string t = trim(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "1" || t == "true" || t == "yes" || t == "on") {
    return true;
  }
  if (t == "0" || t == "false" || t == "no" || t == "off") {
    return false;
  }
  throw ConfigError(std::string(key) + ": '" + t + "' is not a boolean");
}

std::string normalize_key(std::string_view key) {
  std::string k = trim(key);
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

ExperimentConfig defaults_for(Command c) {
  ExperimentConfig cfg;
  cfg.command = c;
  switch (c) {
    case Command::MiBench:
      cfg.objective = ObjectiveKind::MLCPC;
      cfg.alphas = {0.0, 1.0 / 1024.0, 1.0 / 128.0, 1.0 / 16.0};
      break;
    case Command::VarianceLab:
      cfg.objective = ObjectiveKind::RMLCPC;
      cfg.alphas = {0.0, 1.0 / 128.0};
      break;
    case Command::SslDemo:
      cfg.objective = ObjectiveKind::RMLCPC;
      cfg.alphas = {1.0 / 128.0};
      cfg.tau = 0.5;
      break;
    case Command::Selftest:
      cfg.alphas = {0.0};
      break;
  }
  return cfg;
}

const char* const kKeys[] = {"command", "objective",       "alpha",      "gamma",  "tau",
                             "dim",     "batch",           "hidden",     "lr",     "seeds",
                             "levels",  "steps_per_level", "initial_mi", "reps",   "kl",
                             "epochs",  "hard",            "local_views", "out"};

bool known_key(const std::string& k) {
  return std::find(std::begin(kKeys), std::end(kKeys), k) != std::end(kKeys);
}

}  // namespace

double parse_alpha(std::string_view text) {
  const std::string t = trim(text);
  const auto slash = t.find('/');
  if (slash == std::string::npos) {
    return parse_real("alpha", t);
  }
  const double num = parse_real("alpha", t.substr(0, slash));
  const double den = parse_real("alpha", t.substr(slash + 1));
  if (den == 0.0) {
    throw ConfigError("alpha: zero denominator in '" + t + "'");
  }
  return num / den;
}

ObjectiveSpec ExperimentConfig::objective_spec(double alpha) const {
  ObjectiveSpec s;
  s.kind = objective;
  s.alpha = alpha;
  s.gamma = gamma;
  s.tau = tau;
  return s;
}

void ExperimentConfig::validate() const {
  if (command == Command::Selftest) {
    return;
  }
  if (alphas.empty()) {
    throw ConfigError("at least one alpha is required");
  }
  for (double a : alphas) {
    objective_spec(a).validate();
  }
  if (seeds.empty()) {
    throw ConfigError("at least one seed is required");
  }
  if (dim == 0 || batch < 2 || hidden == 0 || levels == 0 || steps_per_level == 0 || epochs == 0) {
    throw ConfigError("dim, hidden, levels, steps_per_level and epochs must be positive; batch >= 2");
  }
  if (!(lr > 0.0)) {
    throw ConfigError("lr must be positive");
  }
  if (!(initial_mi >= 0.0)) {
    throw ConfigError("initial_mi must be non-negative");
  }
  if (command == Command::VarianceLab) {
    if (reps < 100) {
      throw ConfigError("reps must be at least 100");
    }
    if (kl.empty()) {
      throw ConfigError("at least one kl value is required");
    }
    for (double v : kl) {
      if (!(v >= 0.0)) {
        throw ConfigError("kl values must be non-negative");
      }
    }
  }
  if (out.empty()) {
    throw ConfigError(std::string(to_string(command)) + " needs an output directory (--out)");
  }
}

std::vector<std::pair<std::string, std::string>> serialize(const ExperimentConfig& c) {
  return {{"command", std::string(to_string(c.command))},
          {"objective", std::string(to_string(c.objective))},
          {"alpha", join(c.alphas)},
          {"gamma", format_double(c.gamma)},
          {"tau", format_double(c.tau)},
          {"dim", std::to_string(c.dim)},
          {"batch", std::to_string(c.batch)},
          {"hidden", std::to_string(c.hidden)},
          {"lr", format_double(c.lr)},
          {"seeds", join(c.seeds)},
          {"levels", std::to_string(c.levels)},
          {"steps_per_level", std::to_string(c.steps_per_level)},
          {"initial_mi", format_double(c.initial_mi)},
          {"reps", std::to_string(c.reps)},
          {"kl", join(c.kl)},
          {"epochs", std::to_string(c.epochs)},
          {"hard", c.hard ? "true" : "false"},
          {"local_views", std::to_string(c.local_views)},
          {"out", c.out}};
}

ExperimentConfig config_from_map(const std::map<std::string, std::string>& raw) {
  std::map<std::string, std::string> values;
  for (const auto& [k, v] : raw) {
    const std::string key = normalize_key(k);
    if (!known_key(key)) {
      throw ConfigError("unknown configuration key '" + k + "'");
    }
    values[key] = v;
  }
  const auto cmd = values.find("command");
  ExperimentConfig c = defaults_for(cmd == values.end() ? Command::MiBench : parse_command(trim(cmd->second)));
  for (const auto& [key, v] : values) {
    if (key == "command") {
      continue;
    } else if (key == "objective") {
      c.objective = parse_objective_kind(trim(v));
    } else if (key == "alpha") {
      c.alphas.clear();
      for (const std::string& item : split_list(v)) {
        c.alphas.push_back(parse_alpha(item));
      }
    } else if (key == "gamma") {
      c.gamma = parse_real(key, v);
    } else if (key == "tau") {
      c.tau = parse_real(key, v);
    } else if (key == "dim") {
      c.dim = parse_count(key, v);
    } else if (key == "batch") {
      c.batch = parse_count(key, v);
    } else if (key == "hidden") {
      c.hidden = parse_count(key, v);
    } else if (key == "lr") {
      c.lr = parse_real(key, v);
    } else if (key == "seeds") {
      c.seeds.clear();
      for (const std::string& item : split_list(v)) {
        c.seeds.push_back(parse_count(key, item));
      }
    } else if (key == "levels") {
      c.levels = parse_count(key, v);
    } else if (key == "steps_per_level") {
      c.steps_per_level = parse_count(key, v);
    } else if (key == "initial_mi") {
      c.initial_mi = parse_real(key, v);
    } else if (key == "reps") {
      c.reps = parse_count(key, v);
    } else if (key == "kl") {
      c.kl.clear();
      for (const std::string& item : split_list(v)) {
        c.kl.push_back(parse_real(key, item));
      }
    } else if (key == "epochs") {
      c.epochs = parse_count(key, v);
    } else if (key == "hard") {
      c.hard = parse_bool(key, v);
    } else if (key == "local_views") {
      c.local_views = parse_count(key, v);
    } else if (key == "out") {
      c.out = trim(v);
    }
  }
  return c;
}

std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') {
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = normalize_key(t.substr(0, eq));
    if (key.empty()) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    }
    if (!out.emplace(key, trim(t.substr(eq + 1))).second) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

ParseOutcome parse_config(int argc, const char* const* argv) {
  CLI::App app{"Skew divergence estimators, MI benchmarks and contrastive learning experiments",
               "divlab"};
  std::string command;
  app.add_option("command", command, "mi-bench | variance-lab | ssl-demo | selftest")->required();
  std::map<std::string, std::string> flags;
  std::vector<std::string> alpha_list;
  std::vector<std::string> seed_list;
  std::vector<std::string> kl_list;
  std::string config_path;
  struct Flag {
    const char* name;
    const char* help;
  };
  const Flag scalar_flags[] = {
      {"objective", "dv, mine, cpc, mlcpc, rmlcpc, nwj or skewnwj"},
      {"gamma", "Rényi order for rmlcpc"},
      {"tau", "temperature"},
      {"dim", "Gaussian dimension"},
      {"batch", "batch size (variance-lab: n)"},
      {"hidden", "critic hidden width"},
      {"lr", "Adam learning rate"},
      {"levels", "staircase levels"},
      {"steps-per-level", "steps per staircase level"},
      {"initial-mi", "MI of the first level (nats)"},
      {"reps", "variance-lab repetitions"},
      {"epochs", "ssl-demo epochs"},
      {"local-views", "ssl-demo extra local views"},
      {"out", "output directory"},
  };
  std::map<std::string, std::string> scalar_values;
  for (const Flag& f : scalar_flags) {
    app.add_option(std::string("--") + f.name, scalar_values[f.name], f.help);
  }
  app.add_option("--alpha", alpha_list, "skew values, e.g. 0,1/128 (repeatable)")->delimiter(',');
  app.add_option("--seeds", seed_list, "seed list, e.g. 1,2,3")->delimiter(',');
  app.add_option("--kl", kl_list, "variance-lab KL values (nats)")->delimiter(',');
  bool hard_flag = false;
  app.add_flag("--hard", hard_flag, "ssl-demo: use the hard augmentation");
  app.add_option("--config", config_path, "key = value configuration file");

  ParseOutcome outcome;
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    outcome.help = true;
    outcome.help_text = app.help();
    return outcome;
  } catch (const CLI::ParseError& e) {
    throw ConfigError(std::string(e.what()) + "\n" + app.help());
  }

  std::map<std::string, std::string> merged;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      throw IoError("cannot read config file '" + config_path + "'");
    }
    merged = parse_key_values(in, config_path);
  }
  if (merged.count("command") != 0 && trim(merged["command"]) != command) {
    throw ConfigError("config file is for '" + merged["command"] + "', not '" + command + "'");
  }
  merged["command"] = command;
  for (const Flag& f : scalar_flags) {
    if (app.count(std::string("--") + f.name) > 0) {
      merged[normalize_key(f.name)] = scalar_values[f.name];
    }
  }
  if (app.count("--hard") > 0) {
    merged["hard"] = hard_flag ? "true" : "false";
  }
  auto list_flag = [&](const char* name, const std::vector<std::string>& items) {
    if (app.count(std::string("--") + name) > 0) {
      std::string joined;
      for (std::size_t i = 0; i < items.size(); ++i) {
        joined += (i ? "," : "") + items[i];
      }
      merged[name] = joined;
    }
  };
  list_flag("alpha", alpha_list);
  list_flag("seeds", seed_list);
  list_flag("kl", kl_list);
  outcome.config = config_from_map(merged);
  outcome.config.validate();
  return outcome;
}

ExperimentConfig config_from_csv_header(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) {
    throw IoError("cannot read '" + csv.string() + "'");
  }
  std::stringstream body;
  std::string line;
  const std::string prefix = "# config: ";
  while (std::getline(in, line) && !line.empty() && line[0] == '#') {
    if (line.rfind(prefix, 0) == 0) {
      body << line.substr(prefix.size()) << "\n";
    }
  }
  return config_from_map(parse_key_values(body, csv.string()));
}

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string alpha_tag(double a) {
  std::string s = format_double(a);
  std::replace(s.begin(), s.end(), '.', 'p');
  std::replace(s.begin(), s.end(), '-', 'm');
  return s;
}

/// The config of one cell: a single alpha and a single seed.
ExperimentConfig cell_config(const ExperimentConfig& c, double alpha, std::uint64_t seed) {
  ExperimentConfig cell = c;
  cell.alphas = {alpha};
  cell.seeds = {seed};
  return cell;
}

void write_header(std::ostream& out, const ExperimentConfig& cell) {
  out << "# divlab " << kVersion << "\n";
  out << "# meta: schema = " << kCsvSchema << "\n";
  out << "# meta: version = " << kVersion << "\n";
  out << "# meta: seed = " << cell.seeds.front() << "\n";
  out << "# meta: timestamp = " << utc_timestamp() << "\n";
  for (const auto& [k, v] : serialize(cell)) {
    out << "# config: " << k << " = " << v << "\n";
  }
}

json config_json(const ExperimentConfig& cell) {
  json j = json::object();
  for (const auto& [k, v] : serialize(cell)) {
    j[k] = v;
  }
  return j;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write '" + path.string() + "'");
  }
  return out;
}

void finish_output(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) {
    throw IoError("write to '" + path.string() + "' failed");
  }
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct Cell {
  double alpha;
  std::uint64_t seed;
};

std::vector<Cell> cells_of(const ExperimentConfig& c) {
  std::vector<double> alphas;
  for (double a : c.alphas) {
    const double eff = c.objective_spec(a).effective_alpha();
    if (std::find(alphas.begin(), alphas.end(), eff) == alphas.end()) {
      alphas.push_back(eff);
    }
  }
  std::vector<Cell> cells;
  for (double a : alphas) {
    for (std::uint64_t s : c.seeds) {
      cells.push_back({a, s});
    }
  }
  return cells;
}

std::string stem(const ExperimentConfig& c, const std::string& prefix, const Cell& cell) {
  return prefix + "_" + std::string(to_string(c.objective)) + "_a" + alpha_tag(cell.alpha) + "_s" +
         std::to_string(cell.seed);
}

bool run_mi_bench_cell(const ExperimentConfig& c, const Cell& cell, const fs::path& dir,
                       std::vector<fs::path>& files) {
  const ExperimentConfig cc = cell_config(c, cell.alpha, cell.seed);
  TrainConfig tc;
  tc.objective = c.objective_spec(cell.alpha);
  tc.hidden = c.hidden;
  tc.batch = c.batch;
  tc.adam.lr = c.lr;
  tc.schedule.initial_mi = c.initial_mi;
  tc.schedule.steps_per_level = c.steps_per_level;
  tc.schedule.num_levels = c.levels;
  tc.dim = c.dim;
  tc.seed = cell.seed;
  const auto start = std::chrono::steady_clock::now();
  const TrainResult result = train(tc);
  const double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  const std::string base = stem(c, "mi_bench", cell);
  const fs::path csv = dir / (base + ".csv");
  std::ofstream out = open_output(csv);
  write_header(out, cc);
  out << "step,level,level_true_mi,objective_value,mi_hat,mi_valid,mi_hat_per_anchor\n";
  for (const RunRecord& r : result.records) {
    out << r.step << ',' << r.level << ',' << format_double(r.level_true_mi) << ','
        << format_double(r.objective_value) << ',' << format_double(r.mi_hat) << ','
        << (r.mi_valid ? 1 : 0) << ',' << format_double(r.mi_hat_per_anchor) << '\n';
  }
  for (const AbortEvent& a : result.aborts) {
    out << "# abort: step = " << a.step << ", level = " << a.level << ", statistic = " << a.statistic
        << ", message = " << a.message << "\n";
  }
  finish_output(out, csv);

  json summary;
  summary["schema"] = kCsvSchema;
  summary["version"] = kVersion;
  summary["seed"] = cell.seed;
  summary["config"] = config_json(cc);
  summary["wallclock_ms"] = wall;
  summary["levels"] = json::array();
  for (std::size_t l = 0; l < c.levels; ++l) {
    const WindowStats w = level_window(result.records, tc.schedule, l, 500);
    summary["levels"].push_back({{"level", l},
                                 {"true_mi", tc.schedule.mi_at_level(l)},
                                 {"window", std::min<std::size_t>(500, c.steps_per_level)},
                                 {"records", w.records},
                                 {"valid_mi", w.valid_mi},
                                 {"mean_mi_hat", number_or_null(w.mean_mi_hat)},
                                 {"mean_mi_per_anchor", number_or_null(w.mean_mi_per_anchor)},
                                 {"mean_objective", number_or_null(w.mean_objective)},
                                 {"objective_variance", number_or_null(w.objective_variance)}});
  }
  summary["aborts"] = json::array();
  for (const AbortEvent& a : result.aborts) {
    summary["aborts"].push_back(
        {{"step", a.step}, {"level", a.level}, {"statistic", a.statistic}, {"message", a.message}});
  }
  const fs::path js = dir / (base + ".json");
  std::ofstream jo = open_output(js);
  jo << summary.dump(2) << "\n";
  finish_output(jo, js);
  files.push_back(csv);
  files.push_back(js);
  return result.aborts.empty();
}

void run_variance_cell(const ExperimentConfig& c, const Cell& cell, const fs::path& dir,
                       std::vector<fs::path>& files) {
  const ExperimentConfig cc = cell_config(c, cell.alpha, cell.seed);
  VarianceSweepOptions opts;
  opts.dim = c.dim;
  const auto reports = variance_sweep(c.objective_spec(cell.alpha), c.kl, c.batch, c.reps, cell.seed, opts);
  const std::string base = stem(c, "variance_lab", cell);
  const fs::path csv = dir / (base + ".csv");
  std::ofstream out = open_output(csv);
  write_header(out, cc);
  out << "objective,alpha,gamma,tau,dim,true_kl,n,repetitions,empirical_mean,empirical_variance,"
         "variance_infinite,n_times_variance,theorem_lower_bound\n";
  json rows = json::array();
  for (const VarianceReport& r : reports) {
    const double bound = r.theorem_lower_bound.value_or(std::nan(""));
    out << to_string(r.objective.kind) << ',' << format_double(r.objective.effective_alpha()) << ','
        << format_double(r.objective.gamma) << ',' << format_double(r.objective.tau) << ',' << r.dim
        << ',' << format_double(r.true_kl) << ',' << r.n << ',' << r.repetitions << ','
        << format_double(r.empirical_mean) << ',' << format_double(r.empirical_variance) << ','
        << (r.variance_infinite ? 1 : 0) << ',' << format_double(r.scaled_variance()) << ','
        << (r.theorem_lower_bound ? format_double(bound) : std::string()) << '\n';
    rows.push_back({{"true_kl", r.true_kl},
                    {"empirical_mean", number_or_null(r.empirical_mean)},
                    {"empirical_variance", number_or_null(r.empirical_variance)},
                    {"variance_infinite", r.variance_infinite},
                    {"n_times_variance", number_or_null(r.scaled_variance())},
                    {"theorem_lower_bound", r.theorem_lower_bound ? json(bound) : json(nullptr)}});
  }
  finish_output(out, csv);
  json summary{{"schema", kCsvSchema}, {"version", kVersion}, {"seed", cell.seed},
               {"config", config_json(cc)}, {"reports", rows}};
  const fs::path js = dir / (base + ".json");
  std::ofstream jo = open_output(js);
  jo << summary.dump(2) << "\n";
  finish_output(jo, js);
  files.push_back(csv);
  files.push_back(js);
}

void run_ssl_cell(const ExperimentConfig& c, const Cell& cell, const fs::path& dir,
                  std::vector<fs::path>& files) {
  const ExperimentConfig cc = cell_config(c, cell.alpha, cell.seed);
  SyntheticClusterSpec spec;
  spec.hard = c.hard;
  SslTrainConfig tc;
  tc.epochs = c.epochs;
  tc.batch = c.batch;
  tc.local_views = c.local_views;
  tc.adam.lr = c.lr;
  const SslReport report = ssl_train(spec, c.objective_spec(cell.alpha), tc, cell.seed);
  const std::string base = stem(c, c.hard ? "ssl_demo_hard" : "ssl_demo", cell);
  const fs::path csv = dir / (base + ".csv");
  std::ofstream out = open_output(csv);
  write_header(out, cc);
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
    out << e << ',' << format_double(report.epoch_loss[e]) << '\n';
  }
  finish_output(out, csv);
  json summary{{"schema", kCsvSchema},
               {"version", kVersion},
               {"seed", cell.seed},
               {"config", config_json(cc)},
               {"initial_probe_accuracy", report.initial_probe.test_accuracy},
               {"probe_train_accuracy", report.probe.train_accuracy},
               {"probe_test_accuracy", report.probe.test_accuracy}};
  const fs::path js = dir / (base + ".json");
  std::ofstream jo = open_output(js);
  jo << summary.dump(2) << "\n";
  finish_output(jo, js);
  files.push_back(csv);
  files.push_back(js);
}

}  // namespace

RunOutcome run(const ExperimentConfig& config, std::ostream& log) {
  RunOutcome outcome;
  if (config.command == Command::Selftest) {
    const auto results = run_selftest();
    std::size_t failed = 0;
    for (const SelftestResult& r : results) {
      log << (r.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(15) << r.module << r.name;
      if (!r.detail.empty()) {
        log << "  (" << r.detail << ")";
      }
      log << "\n";
      failed += r.passed ? 0 : 1;
    }
    log << results.size() - failed << "/" << results.size() << " checks passed\n";
    outcome.exit_code = failed == 0 ? kExitOk : kExitSelftestFailed;
    return outcome;
  }
  config.validate();
  const fs::path dir(config.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  }
  const std::vector<Cell> cells = cells_of(config);
  std::vector<std::vector<fs::path>> files(cells.size());
  std::vector<char> clean(cells.size(), 1);
  std::mutex log_mutex;
  parallel_for(cells.size(), threads_from_env(), [&](std::size_t i) {
    const Cell& cell = cells[i];
    switch (config.command) {
      case Command::MiBench:
        clean[i] = run_mi_bench_cell(config, cell, dir, files[i]) ? 1 : 0;
        break;
      case Command::VarianceLab:
        run_variance_cell(config, cell, dir, files[i]);
        break;
      case Command::SslDemo:
        run_ssl_cell(config, cell, dir, files[i]);
        break;
      case Command::Selftest:
        break;
    }
    std::lock_guard<std::mutex> lock(log_mutex);
    log << to_string(config.command) << ": alpha " << format_double(cell.alpha) << ", seed "
        << cell.seed << (clean[i] ? "" : " (numeric abort recorded)") << " -> "
        << files[i].front().string() << "\n";
  });
  for (std::size_t i = 0; i < cells.size(); ++i) {
    outcome.files.insert(outcome.files.end(), files[i].begin(), files[i].end());
    if (!clean[i]) {
      outcome.exit_code = kExitNumeric;
    }
  }
  return outcome;
}

}  // namespace divlab
