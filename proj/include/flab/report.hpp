#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "flab/error.hpp"

namespace flab {

inline constexpr const char* kVersion = "0.4.0";
inline constexpr const char* kReportSchema = "flab.report/1";

struct ResidualSummary {
  size_t count = 0;
  double max = 0, mean = 0, p50 = 0, p90 = 0, p99 = 0;
};

inline ResidualSummary summarize(std::vector<double> v) {
  ResidualSummary s;
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  double sum = 0;
  for (double x : v) sum += x;
  auto q = [&](double p) { return v[static_cast<size_t>(std::floor(p * static_cast<double>(v.size() - 1)))]; };
  s.max = v.back();
  s.mean = sum / static_cast<double>(v.size());
  s.p50 = q(0.5);
  s.p90 = q(0.9);
  s.p99 = q(0.99);
  return s;
}

/// One measured quantity. Asserted checks pass iff max < tolerance;
/// diagnostics are reported but never decide the report outcome.
struct Check {
  std::string name;
  ResidualSummary residual;
  double tolerance = 0;
  bool pass = false;
  bool diagnostic = false;
  std::string note;
};

inline Check make_check(std::string name, const std::vector<double>& residuals, double tol, bool diagnostic = false,
                        std::string note = {}) {
  Check c;
  c.name = std::move(name);
  c.residual = summarize(residuals);
  c.tolerance = tol;
  c.pass = !residuals.empty() && c.residual.max < tol;
  c.diagnostic = diagnostic;
  c.note = std::move(note);
  return c;
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct Series {
  std::string name;
  std::vector<double> x, y;
};

enum class Status { pass, fail, hypothesis_unverified, error };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::pass: return "pass";
    case Status::fail: return "fail";
    case Status::hypothesis_unverified: return "hypothesis_unverified";
    case Status::error: return "error";
  }
  return "error";
}

struct Report {
  std::string check_id;
  std::string metric;
  std::vector<double> params;
  int n = 0;
  std::uint64_t seed = 0;
  size_t samples = 0;
  size_t failed_samples = 0;
  std::vector<std::string> sample_errors;  // first few evaluation failures
  std::vector<Check> checks;
  std::vector<std::string> hypotheses;  // human-readable hypothesis verdicts
  bool hypotheses_ok = true;
  Table table;
  std::vector<Series> plot;
  std::vector<std::string> notes;
  double runtime_seconds = 0;  // not serialized: reports must be byte-stable

  /// More than 1% unevaluable samples fails the run.
  bool too_many_failures() const {
    return samples > 0 && static_cast<double>(failed_samples) > 0.01 * static_cast<double>(samples);
  }

  Status status() const {
    if (samples > 0 && failed_samples == samples) return Status::error;
    if (!hypotheses_ok) return Status::hypothesis_unverified;
    if (too_many_failures()) return Status::fail;
    for (const auto& c : checks)
      if (!c.diagnostic && !c.pass) return Status::fail;
    return Status::pass;
  }
  bool pass() const { return status() == Status::pass; }

  const Check* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }

  void record_failure(const std::string& what) {
    ++failed_samples;
    if (sample_errors.size() < 5) sample_errors.push_back(what);
  }
};

/// Exit code convention of the command-line tool.
inline int exit_code(Status s) {
  switch (s) {
    case Status::pass: return 0;
    case Status::fail: return 1;
    case Status::hypothesis_unverified: return 2;
    case Status::error: return 3;
  }
  return 3;
}

inline nlohmann::ordered_json to_json(const Report& r) {
  using nlohmann::ordered_json;
  auto num = [](double v) -> ordered_json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  ordered_json j;
  j["schema"] = kReportSchema;
  j["version"] = kVersion;
  j["check"] = r.check_id;
  j["metric"] = r.metric;
  j["params"] = r.params;
  j["n"] = r.n;
  j["seed"] = r.seed;
  j["samples"] = r.samples;
  j["failed_samples"] = r.failed_samples;
  j["status"] = to_string(r.status());
  j["pass"] = r.pass();
  ordered_json checks = ordered_json::array();
  for (const auto& c : r.checks) {
    ordered_json cj;
    cj["name"] = c.name;
    cj["kind"] = c.diagnostic ? "diagnostic" : "assert";
    cj["count"] = c.residual.count;
    cj["max"] = num(c.residual.max);
    cj["mean"] = num(c.residual.mean);
    cj["p50"] = num(c.residual.p50);
    cj["p90"] = num(c.residual.p90);
    cj["p99"] = num(c.residual.p99);
    cj["tolerance"] = num(c.tolerance);
    cj["pass"] = c.pass;
    if (!c.note.empty()) cj["note"] = c.note;
    checks.push_back(cj);
  }
  j["checks"] = checks;
  j["hypotheses"] = r.hypotheses;
  if (!r.table.columns.empty()) {
    ordered_json t;
    t["columns"] = r.table.columns;
    ordered_json rows = ordered_json::array();
    for (const auto& row : r.table.rows) {
      ordered_json rj = ordered_json::array();
      for (double v : row) rj.push_back(num(v));
      rows.push_back(rj);
    }
    t["rows"] = rows;
    j["table"] = t;
  }
  j["sample_errors"] = r.sample_errors;
  j["notes"] = r.notes;
  return j;
}

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// CSV: the table when present, otherwise one row per check.
inline std::string to_csv(const Report& r) {
  std::ostringstream os;
  if (!r.table.columns.empty()) {
    for (size_t i = 0; i < r.table.columns.size(); ++i) os << (i ? "," : "") << r.table.columns[i];
    os << "\n";
    for (const auto& row : r.table.rows) {
      for (size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_double(row[i]);
      os << "\n";
    }
    return os.str();
  }
  os << "check,kind,count,max,mean,tolerance,pass\n";
  for (const auto& c : r.checks)
    os << c.name << "," << (c.diagnostic ? "diagnostic" : "assert") << "," << c.residual.count << ","
       << format_double(c.residual.max) << "," << format_double(c.residual.mean) << "," << format_double(c.tolerance)
       << "," << (c.pass ? 1 : 0) << "\n";
  return os.str();
}

/// Plot data: one block per series, "# name" then "x y" pairs. Non-finite
/// y values (poles) are written as a "# pole at x" marker instead of a row.
inline std::string to_plotdata(const Report& r) {
  std::ostringstream os;
  for (const auto& s : r.plot) {
    os << "# " << s.name << "\n";
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) {
        os << "# pole at " << format_double(s.x[i]) << "\n";
        continue;
      }
      os << format_double(s.x[i]) << " " << format_double(s.y[i]) << "\n";
    }
    os << "\n";
  }
  return os.str();
}

enum class Format { json, csv, plotdata };

inline Format parse_format(const std::string& s) {
  if (s == "json") return Format::json;
  if (s == "csv") return Format::csv;
  if (s == "plotdata") return Format::plotdata;
  throw Error("unknown format '" + s + "' (expected json, csv or plotdata)");
}

inline std::string render(const Report& r, Format f) {
  switch (f) {
    case Format::json: return to_json(r).dump(2) + "\n";
    case Format::csv: return to_csv(r);
    case Format::plotdata: return to_plotdata(r);
  }
  return {};
}

inline void emit(const Report& r, Format f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << render(r, f);
  if (!out) throw Error("write to '" + path + "' failed");
}

}  // namespace flab
