#pragma once

// Experiment reports and their CSV / JSON forms.

#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "subfrac/errors.hpp"
#include "subfrac/fitting.hpp"

namespace subfrac {

struct ExperimentReport {
  std::string family;
  std::map<std::string, double> params;
  std::string model;
  std::vector<double> times;
  std::vector<double> l1_values;
  std::vector<double> weighted_sup_values;  // empty when not measured
  std::optional<double> fitted_slope;
  std::optional<double> slope_stderr;
  std::map<std::string, bool> flags;
  std::string oracle_notes;

  void validate() const {
    require(l1_values.size() == times.size(), "l1_values must match times in length");
    require(weighted_sup_values.empty() || weighted_sup_values.size() == times.size(),
            "weighted_sup_values must be empty or match times in length");
    require(!fitted_slope || times.size() >= 4, "a fitted slope needs at least four times");
  }

  /// Fits the L1 slope when at least four times are present.
  void fit_slope() {
    if (times.size() < 4) {
      fitted_slope.reset();
      slope_stderr.reset();
      return;
    }
    const RateFit fit = estimate_rate(times, l1_values);
    fitted_slope = fit.slope;
    slope_stderr = fit.stderr_slope;
    if (!fit.note.empty()) oracle_notes += (oracle_notes.empty() ? "" : "; ") + fit.note;
  }

  bool all_flags_pass() const {
    for (const auto& [name, ok] : flags) {
      if (!ok) return false;
    }
    return true;
  }
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline nlohmann::json to_json(const ExperimentReport& r) {
  r.validate();
  nlohmann::json j;
  j["family"] = r.family;
  j["params"] = r.params;
  j["model"] = r.model;
  j["times"] = r.times;
  j["l1_values"] = r.l1_values;
  j["weighted_sup_values"] = r.weighted_sup_values;
  j["fitted_slope"] = r.fitted_slope ? nlohmann::json(*r.fitted_slope) : nlohmann::json(nullptr);
  j["slope_stderr"] = r.slope_stderr ? nlohmann::json(*r.slope_stderr) : nlohmann::json(nullptr);
  j["flags"] = r.flags;
  j["oracle_notes"] = r.oracle_notes;
  return j;
}

inline ExperimentReport report_from_json(const nlohmann::json& j) {
  ExperimentReport r;
  r.family = j.at("family").get<std::string>();
  r.params = j.at("params").get<std::map<std::string, double>>();
  r.model = j.at("model").get<std::string>();
  r.times = j.at("times").get<std::vector<double>>();
  r.l1_values = j.at("l1_values").get<std::vector<double>>();
  r.weighted_sup_values = j.at("weighted_sup_values").get<std::vector<double>>();
  if (!j.at("fitted_slope").is_null()) r.fitted_slope = j.at("fitted_slope").get<double>();
  if (!j.at("slope_stderr").is_null()) r.slope_stderr = j.at("slope_stderr").get<double>();
  r.flags = j.at("flags").get<std::map<std::string, bool>>();
  r.oracle_notes = j.at("oracle_notes").get<std::string>();
  r.validate();
  return r;
}

/// Columns t,l1,weighted_sup; the last column is blank when not measured.
inline std::string to_csv(const ExperimentReport& r) {
  r.validate();
  std::ostringstream out;
  out << "t,l1,weighted_sup\n";
  for (size_t i = 0; i < r.times.size(); ++i) {
    out << format_double(r.times[i]) << ',' << format_double(r.l1_values[i]) << ',';
    if (!r.weighted_sup_values.empty()) out << format_double(r.weighted_sup_values[i]);
    out << '\n';
  }
  return out.str();
}

}  // namespace subfrac
