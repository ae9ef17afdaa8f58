#pragma once

// Verification reports: one record per (identity, fixture), plus free-form
// numeric diagnostics. The json layout is described in docs/report_schema.md.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "metharm/errors.hpp"

namespace metharm {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kToolVersion = "1.0.0";

enum class Status { pass, fail, skipped };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::pass: return "pass";
    case Status::fail: return "fail";
    case Status::skipped: return "skipped";
  }
  return "?";
}

struct Record {
  std::string id;
  std::string statement;
  std::string suite;
  std::string fixture;
  int samples = 0;
  double residual = 0.0;
  double tol = 0.0;
  Status status = Status::pass;
  std::string reason;  // skipped records only
};

/// A value reported for inspection, never affecting the exit code.
struct Diagnostic {
  std::string id;
  std::string fixture;
  double value = 0.0;
  std::string note;
};

struct RunInfo {
  std::uint64_t seed = 0;
  int samples = 0;
  double tol = 0.0;
  std::vector<std::string> suites;
  std::vector<std::string> manifests;
  double wall_seconds = 0.0;
};

struct Report {
  RunInfo run;
  std::vector<Record> records;
  std::vector<Diagnostic> diagnostics;

  int count(Status s) const {
    int c = 0;
    for (const Record& r : records) c += r.status == s;
    return c;
  }
  bool failed() const { return count(Status::fail) > 0; }
  const Record* find(const std::string& id, const std::string& fixture) const {
    for (const Record& r : records)
      if (r.id == id && r.fixture == fixture) return &r;
    return nullptr;
  }
  void append(const Report& other) {
    records.insert(records.end(), other.records.begin(), other.records.end());
    diagnostics.insert(diagnostics.end(), other.diagnostics.begin(), other.diagnostics.end());
  }
};

/// Status is fail iff the residual exceeds the tolerance; non-finite residuals fail.
inline Record measured(std::string id, std::string statement, std::string suite, std::string fixture, int samples,
                       double residual, double tol) {
  Record r{std::move(id), std::move(statement), std::move(suite), std::move(fixture), samples, residual, tol,
           Status::pass, ""};
  r.status = std::isfinite(residual) && residual <= tol ? Status::pass : Status::fail;
  return r;
}

inline Record skipped(std::string id, std::string statement, std::string suite, std::string fixture, std::string reason) {
  return Record{std::move(id), std::move(statement), std::move(suite), std::move(fixture), 0, 0.0, 0.0,
                Status::skipped, std::move(reason)};
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

inline void write_text(const Report& r, std::ostream& os) {
  os << std::left << std::setw(8) << "status" << std::setw(36) << "identity" << std::setw(20) << "fixture"
     << std::right << std::setw(8) << "samples" << std::setw(12) << "residual" << std::setw(11) << "tol" << "  note\n";
  os << std::string(97, '-') << "\n";
  for (const Record& rec : r.records) {
    os << std::left << std::setw(8) << to_string(rec.status) << std::setw(36) << rec.id << std::setw(20) << rec.fixture
       << std::right << std::setw(8) << rec.samples;
    if (rec.status == Status::skipped)
      os << std::setw(12) << "-" << std::setw(11) << "-" << "  " << rec.reason;
    else
      os << std::setw(12) << format_double(rec.residual) << std::setw(11) << format_double(rec.tol);
    if (rec.status == Status::fail) os << "  violated: " << rec.statement;
    os << "\n";
  }
  if (!r.diagnostics.empty()) {
    os << "\ndiagnostics\n";
    for (const Diagnostic& d : r.diagnostics)
      os << "  " << std::left << std::setw(34) << d.id << std::setw(20) << d.fixture << std::right << std::setw(12)
         << format_double(d.value) << "  " << d.note << "\n";
  }
  os << "\n" << r.count(Status::pass) << " passed, " << r.count(Status::fail) << " failed, "
     << r.count(Status::skipped) << " skipped\n";
}

/// `wall_time` false drops the timing field, giving byte-stable output for a fixed seed.
inline nlohmann::ordered_json to_json(const Report& r, bool wall_time = true) {
  nlohmann::ordered_json j;
  j["schemaVersion"] = kReportSchemaVersion;
  nlohmann::ordered_json run;
  run["tool"] = "verify";
  run["version"] = kToolVersion;
  run["seed"] = r.run.seed;
  run["samples"] = r.run.samples;
  run["tol"] = r.run.tol;
  run["suites"] = r.run.suites;
  run["manifests"] = r.run.manifests;
  if (wall_time) run["wallTimeSeconds"] = r.run.wall_seconds;
  j["run"] = run;
  nlohmann::ordered_json recs = nlohmann::ordered_json::array();
  for (const Record& rec : r.records) {
    nlohmann::ordered_json o;
    o["id"] = rec.id;
    o["statement"] = rec.statement;
    o["suite"] = rec.suite;
    o["fixture"] = rec.fixture;
    o["status"] = to_string(rec.status);
    o["samples"] = rec.samples;
    if (rec.status == Status::skipped) {
      o["reason"] = rec.reason;
    } else {
      o["maxResidual"] = std::isfinite(rec.residual) ? nlohmann::ordered_json(rec.residual) : nlohmann::ordered_json(nullptr);
      o["tolerance"] = rec.tol;
    }
    recs.push_back(o);
  }
  j["records"] = recs;
  nlohmann::ordered_json diags = nlohmann::ordered_json::array();
  for (const Diagnostic& d : r.diagnostics) {
    nlohmann::ordered_json o;
    o["id"] = d.id;
    o["fixture"] = d.fixture;
    o["value"] = std::isfinite(d.value) ? nlohmann::ordered_json(d.value) : nlohmann::ordered_json(nullptr);
    o["note"] = d.note;
    diags.push_back(o);
  }
  j["diagnostics"] = diags;
  j["summary"] = {{"pass", r.count(Status::pass)}, {"fail", r.count(Status::fail)}, {"skipped", r.count(Status::skipped)}};
  return j;
}

class IoError : public Error {
 public:
  using Error::Error;
};

inline void emit_report(const Report& r, const std::string& format, std::ostream& os) {
  if (format == "json")
    os << to_json(r).dump(2) << "\n";
  else
    write_text(r, os);
}

inline void emit_report(const Report& r, const std::string& format, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open report file '" + path + "' for writing");
  emit_report(r, format, out);
  out.flush();
  if (!out) throw IoError("failed writing report file '" + path + "'");
}

/// 0 when no record failed, 1 otherwise.
inline int exit_code(const Report& r) { return r.failed() ? 1 : 0; }

}  // namespace metharm
