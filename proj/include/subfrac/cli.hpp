#pragma once

// Command-line front end: argument parsing and command dispatch.

#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "subfrac/convergence.hpp"
#include "subfrac/errors.hpp"
#include "subfrac/hyperbolic_poisson.hpp"
#include "subfrac/kernels.hpp"
#include "subfrac/report.hpp"
#include "subfrac/stable.hpp"

namespace subfrac::cli {

enum ExitCode : int { kOk = 0, kVerificationFailed = 1, kInputError = 2, kAccuracyError = 3 };

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> names{"kernel",   "subordinator", "bounds",     "class-check",
                                              "converge", "rate",         "hyperbolic", "prescribe-rate"};
  return names;
}

inline const std::vector<std::string>& hyperbolic_tasks() {
  static const std::vector<std::string> names{"critical-region", "busemann", "quotient",
                                              "deficiency",      "transform", "trajectory"};
  return names;
}

struct RunConfig {
  std::string command;
  std::string task;  // hyperbolic sub-task
  std::string model = "euclid1";
  std::string family;
  std::map<std::string, double> params;
  std::vector<double> times;
  std::string phi = "inv-log";
  std::string input;
  std::string column = "l1";
  std::string output;  // empty: standard output
  std::string format;  // text, csv or json; empty picks the command default

  bool has(const std::string& key) const { return params.count(key) > 0; }
  double get(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }
};

struct ParseResult {
  std::optional<RunConfig> config;
  int exit_code = kOk;
  std::string message;  // usage text or the reason for rejection
};

namespace detail {

inline std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

inline bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

struct Option {
  const char* name;
  const char* help;
};

// numeric flags, stored in RunConfig::params under the name without dashes
inline const std::vector<Option>& numeric_options() {
  static const std::vector<Option> opts{
      {"alpha", "stable index in (0,2)"},
      {"sigma", "extension parameter in (0,1)"},
      {"t", "time"},
      {"r", "distance"},
      {"u", "subordination variable"},
      {"eps", "critical-region exponent in (0,2)"},
      {"y", "distance of the off-center mass"},
      {"lambda", "spectral parameter"},
      {"power", "exponent of phi(t) = t^-power"},
      {"k-max", "number of construction steps (1..8)"},
      {"directions", "number of boundary directions"},
  };
  return opts;
}

inline std::string validate(const RunConfig& c) {
  auto in_open = [&](const char* key, double lo, double hi) { return !c.has(key) || (c.get(key, 0) > lo && c.get(key, 0) < hi); };
  if (!in_open("alpha", 0.0, 2.0)) return "alpha must lie in (0,2)";
  if (!in_open("sigma", 0.0, 1.0)) return "sigma must lie in (0,1)";
  if (!in_open("eps", 0.0, 2.0)) return "eps must lie in (0,2)";
  if (!in_open("t", 0.0, INFINITY)) return "t must be positive";
  if (!in_open("u", 0.0, INFINITY)) return "u must be positive";
  if (!in_open("power", 0.0, INFINITY)) return "power must be positive";
  if (c.has("r") && !(c.get("r", 0) >= 0.0 && std::isfinite(c.get("r", 0)))) return "r must be nonnegative";
  if (c.has("y") && !(c.get("y", 0) >= 0.0 && std::isfinite(c.get("y", 0)))) return "y must be nonnegative";
  if (c.has("lambda") && !std::isfinite(c.get("lambda", 0))) return "lambda must be finite";
  if (c.has("k-max")) {
    const double k = c.get("k-max", 0);
    if (k != std::floor(k) || k < 1 || k > 8) return "k-max must be an integer in 1..8";
  }
  if (c.has("directions")) {
    const double k = c.get("directions", 0);
    if (k != std::floor(k) || k < 1 || k > 4096) return "directions must be an integer in 1..4096";
  }
  for (size_t i = 0; i < c.times.size(); ++i) {
    if (!(c.times[i] > 0.0) || !std::isfinite(c.times[i])) return "times must be positive";
    if (i > 0 && !(c.times[i] > c.times[i - 1])) return "times must be increasing";
  }
  static const std::vector<std::string> models{"euclid1", "euclid2", "euclid3", "h3"};
  if (!contains(models, c.model)) return "model must be one of " + join(models, ", ");
  static const std::vector<std::string> families{"heat", "extension", "frac-heat", "hyp-poisson"};
  if (!c.family.empty() && !contains(families, c.family)) return "family must be one of " + join(families, ", ");
  if (!c.format.empty() && c.format != "text" && c.format != "csv" && c.format != "json") {
    return "format must be text, csv or json";
  }
  if (c.phi != "inv-log" && c.phi != "power") return "phi must be inv-log or power";

  // command-specific required keys
  auto need = [&](const char* key) -> std::string {
    return c.has(key) ? "" : c.command + " requires --" + key;
  };
  auto need_family_param = [&]() -> std::string {
    if (c.family.empty()) return c.command + " requires --family";
    if (c.family == "extension") return need("sigma");
    if (c.family == "frac-heat") return need("alpha");
    return "";
  };
  std::string msg;
  if (c.command == "kernel") {
    if (!(msg = need_family_param()).empty()) return msg;
    if (!(msg = need("t")).empty()) return msg;
    if (!(msg = need("r")).empty()) return msg;
  } else if (c.command == "subordinator") {
    for (const char* k : {"alpha", "t", "u"}) {
      if (!(msg = need(k)).empty()) return msg;
    }
  } else if (c.command == "bounds" || c.command == "class-check" || c.command == "converge") {
    if (!(msg = need_family_param()).empty()) return msg;
  } else if (c.command == "rate") {
    if (c.input.empty()) return "rate requires --input";
  } else if (c.command == "hyperbolic") {
    if (c.task.empty()) return "hyperbolic requires a task: " + join(hyperbolic_tasks(), ", ");
    if (!contains(hyperbolic_tasks(), c.task)) return "unknown hyperbolic task '" + c.task + "'";
    if ((c.task == "critical-region" || c.task == "busemann" || c.task == "quotient") && !c.has("t")) {
      return "hyperbolic " + c.task + " requires --t";
    }
    if (c.task == "transform" && !c.has("lambda")) return "hyperbolic transform requires --lambda";
  }
  return "";
}

}  // namespace detail

inline std::string usage() {
  std::ostringstream out;
  out << "usage: subfrac <command> [task] [options]\n\ncommands: " << detail::join(commands(), ", ")
      << "\nhyperbolic tasks: " << detail::join(hyperbolic_tasks(), ", ")
      << "\n\noptions:\n  --model {euclid1|euclid2|euclid3|h3}\n  --family {heat|extension|frac-heat|hyp-poisson}\n";
  for (const auto& o : detail::numeric_options()) out << "  --" << o.name << "  " << o.help << '\n';
  out << "  --times t1,t2,...\n  --phi {inv-log|power}\n  --input FILE  --column NAME\n"
         "  --output FILE  --format {text|csv|json}\n";
  return out.str();
}

/// Parses argv (without the program name).
inline ParseResult parse_args(const std::vector<std::string>& argv) {
  if (argv.empty()) return {std::nullopt, kInputError, usage()};
  RunConfig cfg;
  CLI::App app{"subfrac"};
  app.set_help_flag();
  app.allow_extras(false);
  std::vector<std::string> positional;
  app.add_option("positional", positional)->expected(1, 2);
  app.add_option("--model", cfg.model);
  app.add_option("--family", cfg.family);
  app.add_option("--times", cfg.times)->delimiter(',');
  app.add_option("--phi", cfg.phi);
  app.add_option("--input", cfg.input);
  app.add_option("--column", cfg.column);
  app.add_option("--output", cfg.output);
  app.add_option("--format", cfg.format);
  bool help = false;
  app.add_flag("--help,-h", help);
  std::map<std::string, double> values;
  for (const auto& o : detail::numeric_options()) {
    app.add_option(std::string("--") + o.name, values[o.name]);
  }
  try {
    std::vector<std::string> rev(argv.rbegin(), argv.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return {std::nullopt, kInputError, e.what()};
  }
  if (help) return {std::nullopt, kInputError, usage()};
  if (positional.empty()) return {std::nullopt, kInputError, usage()};
  cfg.command = positional[0];
  if (!detail::contains(commands(), cfg.command)) {
    return {std::nullopt, kInputError, "unknown command '" + cfg.command + "'\n" + usage()};
  }
  if (positional.size() > 1) {
    if (cfg.command != "hyperbolic") return {std::nullopt, kInputError, "unexpected argument '" + positional[1] + "'"};
    cfg.task = positional[1];
  }
  if (cfg.command == "hyperbolic" && app.get_option("--model")->count() == 0) cfg.model = "h3";
  for (const auto& o : detail::numeric_options()) {
    if (app.get_option(std::string("--") + o.name)->count() > 0) cfg.params[o.name] = values[o.name];
  }
  const std::string err = detail::validate(cfg);
  if (!err.empty()) return {std::nullopt, kInputError, err};
  return {cfg, kOk, ""};
}

namespace detail {

inline ManifoldModel make_model(const std::string& name) {
  if (name == "h3") return ManifoldModel::hyperbolic_ball3();
  return ManifoldModel::euclidean(name.back() - '0');
}

inline KernelFamily make_family(const RunConfig& c, const ManifoldModel& m) {
  if (c.family == "heat") return KernelFamily::heat(m);
  if (c.family == "extension") return KernelFamily::extension(c.get("sigma", 0.5), m);
  if (c.family == "frac-heat") return KernelFamily::frac_heat(c.get("alpha", 1.0), m);
  return KernelFamily::hyp_poisson(m);
}

inline QuadratureSpec quadrature_from_env() {
  QuadratureSpec q;
  if (const char* env = std::getenv("SUBFRAC_MAX_PANELS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    require(end != env && *end == '\0' && v >= 1 && v <= (1L << 30), "SUBFRAC_MAX_PANELS must be a positive integer");
    q.max_panels = static_cast<int>(v);
  }
  return q;
}

inline std::map<std::string, double> family_params(const KernelFamily& fam) {
  if (fam.id() == FamilyId::extension) return {{"sigma", fam.param()}};
  if (fam.id() == FamilyId::frac_heat) return {{"alpha", fam.param()}};
  return {};
}

inline std::string csv_line(std::initializer_list<double> vs) {
  std::string out;
  bool first = true;
  for (double v : vs) {
    out += (first ? "" : ",") + format_double(v);
    first = false;
  }
  return out + '\n';
}

struct Output {
  std::string text;
  bool verified = true;
};

inline std::vector<double> log_grid(double lo, double hi, int per_decade) {
  std::vector<double> out;
  const int n = static_cast<int>(std::round(std::log10(hi / lo) * per_decade));
  for (int i = 0; i <= n; ++i) out.push_back(lo * std::pow(10.0, static_cast<double>(i) / per_decade));
  return out;
}

// Deterministic near-uniform points on the unit sphere.
inline std::vector<Point> fibonacci_directions(int n) {
  std::vector<Point> dirs;
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double rr = std::sqrt(std::max(0.0, 1.0 - z * z));
    dirs.emplace_back(rr * std::cos(golden * i), rr * std::sin(golden * i), z);
  }
  return dirs;
}

inline Output run_kernel(const RunConfig& c, const QuadratureSpec& q) {
  const ManifoldModel m = make_model(c.model);
  const KernelFamily fam = make_family(c, m);
  const double t = c.get("t", 1.0), r = c.get("r", 0.0);
  const double v = Kernel(fam, t, q)(r);
  if (c.format == "csv") return {"model,family,t,r,value\n" + c.model + ',' + fam.name() + ',' + csv_line({t, r, v})};
  if (c.format == "json") {
    nlohmann::json j{{"model", c.model}, {"family", fam.name()}, {"params", family_params(fam)},
                     {"t", t}, {"r", r}, {"value", v}};
    return {j.dump(2) + '\n'};
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.7g\n", v);
  return {buf};
}

inline Output run_subordinator(const RunConfig& c) {
  const StableParams p{c.get("alpha", 1.0), c.get("t", 1.0), c.get("u", 1.0)};
  const Flagged eta = stable_density_checked(p);
  const double env = eta_envelope(p).upper;
  if (c.format == "json") {
    nlohmann::json j{{"alpha", p.alpha}, {"t", p.t}, {"u", p.u}, {"density", eta.value},
                     {"envelope", env}, {"underflow", eta.underflow}};
    return {j.dump(2) + '\n'};
  }
  if (c.format == "text") {
    char buf[80];
    std::snprintf(buf, sizeof buf, "%.10g\n", eta.value);
    return {buf};
  }
  std::string row = csv_line({p.alpha, p.t, p.u, eta.value, env});
  row.back() = ',';
  return {"alpha,t,u,density,envelope,underflow\n" + row + (eta.underflow ? "1\n" : "0\n")};
}

inline Output run_bounds(const RunConfig& c, const QuadratureSpec& q) {
  const ManifoldModel m = make_model(c.model);
  const KernelFamily fam = make_family(c, m);
  nlohmann::json j{{"model", c.model}, {"family", fam.name()}, {"params", family_params(fam)}};
  bool ok = true;
  if (fam.id() == FamilyId::hyp_poisson) {
    std::vector<double> bound;
    for (double t : {5.0, 10.0, 20.0, 40.0}) {
      for (double lr = 0.0; lr <= 3.0 * std::log(t) + 1e-12; lr += std::log(t) / 8.0) {
        bound.push_back(poisson_bound_ratio(t, std::exp(lr)));
      }
    }
    const double t_asym = c.get("t", 40.0);
    std::vector<double> asym;
    const double lt = std::log(t_asym);
    for (double lr = (2.0 - 1.0) * lt; lr <= (2.0 + 1.0) * lt + 1e-12; lr += lt / 16.0) {
      asym.push_back(poisson_asymptotic_ratio(t_asym, std::exp(lr)));
    }
    const ConstantFit b = fit_constants(bound), a = fit_constants(asym);
    j["bound_lower"] = b.lower;
    j["bound_upper"] = b.upper;
    j["bound_spread"] = b.spread();
    j["asymptotic_t"] = t_asym;
    j["asymptotic_constant"] = std::sqrt(a.lower * a.upper);
    j["asymptotic_relative_spread"] = a.spread() - 1.0;
    ok = b.spread() <= 20.0 && a.spread() - 1.0 <= 0.05;
  } else {
    std::vector<double> zs{0.0};
    for (double z : log_grid(1e-2, 1e3, 6)) zs.push_back(z);
    const std::vector<double> times{0.1, 1.0, 10.0, 100.0, 1000.0};
    const ConstantFit f = envelope_fit(fam, times, zs, q);
    j["lower"] = f.lower;
    j["upper"] = f.upper;
    j["spread"] = f.spread();
    ok = f.spread() <= 100.0;
  }
  j["pass"] = ok;
  if (c.format == "csv") {
    std::string head, row;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!it.value().is_number() && !it.value().is_boolean()) continue;
      head += (head.empty() ? "" : ",") + it.key();
      row += (row.empty() ? "" : ",") +
             (it.value().is_boolean() ? std::string(it.value().get<bool>() ? "1" : "0") : format_double(it.value().get<double>()));
    }
    return {head + '\n' + row + '\n', ok};
  }
  return {j.dump(2) + '\n', ok};
}

inline Output run_class_check(const RunConfig& c) {
  const ManifoldModel m = make_model(c.model);
  const KernelFamily fam = make_family(c, m);
  const PClassReport rep = check_p_class(fam);
  if (c.format == "csv") {
    std::string out = "axiom,pass,constant\n";
    for (const auto& a : rep.axioms) out += a.name + ',' + (a.pass ? "1" : "0") + ',' + format_double(a.constant) + '\n';
    return {out, rep.all_pass()};
  }
  nlohmann::json axioms = nlohmann::json::array();
  for (const auto& a : rep.axioms) {
    axioms.push_back({{"name", a.name}, {"pass", a.pass}, {"constant", a.constant}, {"detail", a.detail}});
  }
  nlohmann::json j{{"model", c.model},          {"family", rep.family},         {"params", family_params(fam)},
                   {"gamma", rep.gamma},        {"theta_gamma", rep.theta_gamma}, {"axioms", axioms},
                   {"p4_slope", rep.p4_slope}, {"p4_stderr", rep.p4_stderr},   {"all_pass", rep.all_pass()}};
  return {j.dump(2) + '\n', rep.all_pass()};
}

inline std::string render_report(const ExperimentReport& rep, const std::string& format) {
  if (format == "json") return to_json(rep).dump(2) + '\n';
  return to_csv(rep);
}

inline Output run_converge(const RunConfig& c, const QuadratureSpec& q) {
  const ManifoldModel m = make_model(c.model);
  const KernelFamily fam = make_family(c, m);
  const std::vector<double> times = c.times.empty() ? std::vector<double>{100.0, 300.0, 1000.0, 3000.0, 10000.0} : c.times;
  const double y = c.get("y", 1.0);
  if (m.is_hyperbolic()) {
    require(fam.id() == FamilyId::hyp_poisson, "on h3 converge runs the hyp-poisson family");
    const InitialDatum f = InitialDatum::dirac(m, h3_point(y, Point(1.0)));
    ExperimentReport rep = l1_gap_trajectory(f, times, q);
    rep.params = {{"y", y}};
    return {render_report(rep, c.format), rep.all_flags_pass()};
  }
  const InitialDatum f = InitialDatum::dirac(m, Point(y));
  const Point x0;
  ExperimentReport rep;
  rep.family = fam.name();
  rep.params = family_params(fam);
  rep.params["y"] = y;
  rep.model = m.name();
  rep.times = times;
  for (double t : times) {
    const Kernel k(fam, t, q);
    rep.l1_values.push_back(l1_distance(k, f, x0, q));
    const std::vector<Point> grid = axis_grid(k, f, x0);
    rep.weighted_sup_values.push_back(weighted_sup_distance(k, f, x0, grid));
  }
  rep.fit_slope();
  if (rep.fitted_slope) {
    const double expected = -fam.theta_gamma();
    rep.params["expected_slope"] = expected;
    rep.flags["l1_slope"] = std::abs(*rep.fitted_slope - expected) <= 0.15;
    const RateFit sup = estimate_rate(rep.times, rep.weighted_sup_values);
    rep.params["weighted_sup_slope"] = sup.slope;
    rep.flags["weighted_sup_slope"] = std::abs(sup.slope - expected) <= 0.2;
  }
  return {render_report(rep, c.format), rep.all_flags_pass()};
}

inline Output run_rate(const RunConfig& c) {
  std::ifstream in(c.input);
  require(static_cast<bool>(in), "cannot open input file '" + c.input + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "input file is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const auto t_col = std::find(header.begin(), header.end(), "t") - header.begin();
  const auto v_col = std::find(header.begin(), header.end(), c.column) - header.begin();
  require(t_col < static_cast<long>(header.size()), "input has no 't' column");
  require(v_col < static_cast<long>(header.size()), "input has no '" + c.column + "' column");
  std::vector<double> ts, vs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    cells.resize(header.size());
    try {
      ts.push_back(std::stod(cells[t_col]));
      vs.push_back(cells[v_col].empty() ? NAN : std::stod(cells[v_col]));
    } catch (const std::exception&) {
      throw DomainError("malformed number in input line '" + line + "'");
    }
  }
  const RateFit fit = estimate_rate(ts, vs);
  if (c.format == "csv") return {"slope,stderr,used\n" + csv_line({fit.slope, fit.stderr_slope, static_cast<double>(fit.used)})};
  nlohmann::json j{{"column", c.column}, {"slope", fit.slope}, {"stderr", fit.stderr_slope},
                   {"used", fit.used},    {"note", fit.note}};
  return {j.dump(2) + '\n'};
}

inline Output run_hyperbolic(const RunConfig& c, const QuadratureSpec& q) {
  require(c.model == "h3", "hyperbolic tasks run on the h3 model");
  const ManifoldModel m = ManifoldModel::hyperbolic_ball3();
  const Point b(1.0);
  const double ydist = c.get("y", 1.0);
  const Point y = h3_point(ydist, b);
  if (c.task == "critical-region") {
    const double t = c.get("t", 10.0), eps = c.get("eps", 1.0);
    const RegionMass rm = critical_region_mass(t, eps, q);
    const bool ok = std::abs(rm.total() - 1.0) <= 1e-6;
    if (c.format == "json") {
      nlohmann::json j{{"t", t}, {"eps", eps}, {"inside_mass", rm.inside}, {"below", rm.below}, {"above", rm.above}};
      return {j.dump(2) + '\n', ok};
    }
    return {"t,inside_mass,below,above\n" + csv_line({t, rm.inside, rm.below, rm.above}), ok};
  }
  if (c.task == "busemann") {
    const double t = c.get("t", 4.0), eps = c.get("eps", 0.25);
    const double gap = busemann_gap(t, eps, y, b);
    if (c.format == "json") return {nlohmann::json{{"t", t}, {"y", ydist}, {"gap", gap}}.dump(2) + '\n'};
    return {"t,y,gap\n" + csv_line({t, ydist, gap})};
  }
  if (c.task == "quotient") {
    const double t = c.get("t", 32.0);
    const double r = c.has("r") ? c.get("r", 0.0) : t * t;
    const int n = static_cast<int>(c.get("directions", 64));
    std::string out = "direction_index,measured,predicted\n";
    nlohmann::json rows = nlohmann::json::array();
    int idx = 0;
    for (const Point& dir : fibonacci_directions(n)) {
      const QuotientSample s = kernel_quotient(t, r, y, dir);
      if (!s.underflow) {
        out += std::to_string(idx) + ',' + format_double(s.measured) + ',' + format_double(s.predicted) + '\n';
        rows.push_back({{"direction_index", idx}, {"measured", s.measured}, {"predicted", s.predicted}});
      }
      ++idx;
    }
    if (c.format == "json") return {nlohmann::json{{"t", t}, {"r", r}, {"samples", rows}}.dump(2) + '\n'};
    return {out};
  }
  if (c.task == "deficiency") {
    const double d = deficiency(y, q);
    if (c.format == "json") return {nlohmann::json{{"y", ydist}, {"deficiency", d}}.dump(2) + '\n'};
    return {"y,deficiency\n" + csv_line({ydist, d})};
  }
  if (c.task == "transform") {
    Bump bump;
    bump.radius = 1.0;
    bump.profile = BumpProfile::cosine_taper;
    const InitialDatum f = InitialDatum::bump_with_mass(m, bump, 1.0);
    const double lam = c.get("lambda", 1.0);
    // negative lambda selects the imaginary axis: lambda -> i |lambda|
    const std::complex<double> l = lam >= 0.0 ? std::complex<double>(lam, 0.0) : std::complex<double>(0.0, -lam);
    const double v = spherical_transform_h3(f, l, q);
    if (c.format == "json") return {nlohmann::json{{"lambda_re", l.real()}, {"lambda_im", l.imag()}, {"value", v}}.dump(2) + '\n'};
    return {"lambda_re,lambda_im,value\n" + csv_line({l.real(), l.imag(), v})};
  }
  // trajectory
  const std::vector<double> times = c.times.empty() ? std::vector<double>{10.0, 12.0, 14.0, 16.0, 18.0, 20.0} : c.times;
  std::optional<InitialDatum> f;
  if (ydist > 0.0) {
    f = InitialDatum::dirac(m, y);
  } else {
    Bump bump;
    bump.radius = 1.0;
    bump.profile = BumpProfile::cosine_taper;
    f = InitialDatum::bump_with_mass(m, bump, 1.0);
  }
  ExperimentReport rep = l1_gap_trajectory(*f, times, q);
  rep.params = {{"y", ydist}};
  if (ydist > 0.0) rep.params["deficiency"] = deficiency(y, q);
  if (c.format == "json") return {to_json(rep).dump(2) + '\n'};
  std::string out = "t,l1_gap\n";
  for (size_t i = 0; i < rep.times.size(); ++i) out += csv_line({rep.times[i], rep.l1_values[i]});
  return {out};
}

inline Output run_prescribe_rate(const RunConfig& c) {
  const ManifoldModel m = make_model(c.model);
  const KernelFamily fam = KernelFamily::frac_heat(c.get("alpha", 1.0), m);
  const int k_max = static_cast<int>(c.get("k-max", 5));
  RateFunction phi;
  if (c.phi == "power") {
    const double p = c.get("power", 10.0);
    phi = [p](double t) { return std::pow(t, -p); };
  } else {
    phi = [](double t) { return 1.0 / std::log(t); };
  }
  const PrescribedRateResult res = prescribed_rate_construct(phi, k_max, fam, Point());
  if (c.format == "csv") {
    std::string out = "k,log_t,weight,log_r,lhs,rhs,verified\n";
    for (const auto& s : res.steps) {
      out += std::to_string(s.k) + ',' + format_double(s.log_t) + ',' + format_double(s.weight) + ',' +
             format_double(s.log_r) + ',' + format_double(s.lhs) + ',' + format_double(s.rhs) + ',' +
             (s.verified ? "1" : "0") + '\n';
    }
    return {out, res.all_verified()};
  }
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : res.steps) {
    steps.push_back({{"k", s.k}, {"log_t", s.log_t}, {"weight", s.weight}, {"log_r", s.log_r},
                     {"lhs", s.lhs}, {"rhs", s.rhs}, {"verified", s.verified}});
  }
  nlohmann::json j{{"alpha", fam.param()}, {"phi", c.phi},     {"epsilon", res.epsilon},
                   {"weight_at_base", res.weight_at_base},  {"C", res.c_volume}, {"C2", res.c2},
                   {"c1", res.c1},          {"steps", steps}, {"all_verified", res.all_verified()}};
  return {j.dump(2) + '\n', res.all_verified()};
}

inline std::string default_format(const std::string& command) {
  if (command == "kernel" || command == "subordinator") return "text";
  if (command == "class-check" || command == "bounds" || command == "rate" || command == "prescribe-rate") return "json";
  return "csv";
}

}  // namespace detail

/// Executes a validated configuration; returns the process exit code.
inline int run(RunConfig config, std::ostream& out, std::ostream& err) {
  if (config.format.empty()) config.format = detail::default_format(config.command);
  detail::Output result;
  try {
    const QuadratureSpec q = detail::quadrature_from_env();
    const std::string& cmd = config.command;
    if (cmd == "kernel") {
      result = detail::run_kernel(config, q);
    } else if (cmd == "subordinator") {
      result = detail::run_subordinator(config);
    } else if (cmd == "bounds") {
      result = detail::run_bounds(config, q);
    } else if (cmd == "class-check") {
      result = detail::run_class_check(config);
    } else if (cmd == "converge") {
      result = detail::run_converge(config, q);
    } else if (cmd == "rate") {
      result = detail::run_rate(config);
    } else if (cmd == "hyperbolic") {
      result = detail::run_hyperbolic(config, q);
    } else if (cmd == "prescribe-rate") {
      result = detail::run_prescribe_rate(config);
    } else {
      err << "unknown command '" << cmd << "'\n";
      return kInputError;
    }
  } catch (const AccuracyError& e) {
    err << "accuracy error: " << e.what() << " (estimate " << format_double(e.estimate()) << ", error bound "
        << format_double(e.error_bound()) << ")\n";
    return kAccuracyError;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  if (config.output.empty()) {
    out << result.text;
  } else {
    std::ofstream file(config.output);
    if (!file) {
      err << "error: cannot open output file '" << config.output << "'\n";
      return kInputError;
    }
    file << result.text;
  }
  if (!result.verified) {
    err << "verification failed\n";
    return kVerificationFailed;
  }
  return kOk;
}

/// parse_args followed by run.
inline int main_entry(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  const ParseResult parsed = parse_args(argv);
  if (!parsed.config) {
    err << parsed.message;
    if (!parsed.message.empty() && parsed.message.back() != '\n') err << '\n';
    return parsed.exit_code;
  }
  return run(*parsed.config, out, err);
}

}  // namespace subfrac::cli
