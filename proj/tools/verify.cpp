// verify: runs the identity suites on manifests and writes a report.
//
// Exit codes: 0 when every record passes or is skipped, 1 when any record
// fails, 2 on usage, manifest or I/O errors.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "metharm/bundled.hpp"
#include "metharm/manifest.hpp"
#include "metharm/report.hpp"
#include "metharm/suites.hpp"

namespace {

using namespace metharm;

Manifest load_any(const std::string& arg) {
  if (std::filesystem::is_regular_file(arg)) return load_manifest(arg);
  if (bundled_text(arg)) return load_bundled(arg);
  throw ManifestError(arg + ": cannot read file");
}

struct Options {
  std::vector<std::string> manifests;
  bool all_fixtures = false;
  std::vector<std::string> suites;
  std::optional<int> samples;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<std::string> report;
  std::optional<std::string> format;
  bool list_suites = false;
  bool list_fixtures = false;
};

int run(const Options& o) {
  if (o.list_suites) {
    for (const std::string& s : suite_names()) {
      std::cout << s << "\n";
      for (const Identity& i : identities())
        if (i.suite == s) std::cout << "  " << i.id << "  " << i.statement << "\n";
    }
    return 0;
  }
  if (o.list_fixtures) {
    for (const std::string& n : bundled_names()) std::cout << n << "\n";
    return 0;
  }

  std::vector<std::string> inputs = o.manifests;
  if (o.all_fixtures)
    for (const std::string& n : bundled_names()) inputs.push_back(n);
  if (inputs.empty()) throw ManifestError("no manifest given (pass a path, a bundled fixture name or --all-fixtures)");

  std::vector<Manifest> manifests;
  for (const std::string& in : inputs) manifests.push_back(load_any(in));

  const VerifyConfig& first = manifests.front().verify;
  std::string format = o.format.value_or(first.format);
  std::optional<std::string> report_path = o.report ? o.report : first.report;

  Report total;
  total.run.seed = o.seed.value_or(first.seed);
  total.run.samples = o.samples.value_or(first.samples);
  total.run.tol = o.tol.value_or(first.tol);
  for (const Manifest& m : manifests) {
    SuiteOptions so = options_from(m.verify);
    if (!o.suites.empty()) so.suites = o.suites;
    if (o.samples) so.samples = *o.samples;
    if (o.seed) so.seed = *o.seed;
    if (o.tol) so.tol = *o.tol;
    Report r = run_suites(m, so);
    total.append(r);
    total.run.manifests.push_back(m.origin);
    for (const std::string& s : so.suites)
      if (std::find(total.run.suites.begin(), total.run.suites.end(), s) == total.run.suites.end())
        total.run.suites.push_back(s);
    total.run.wall_seconds += r.run.wall_seconds;
  }

  if (report_path) {
    emit_report(total, format, *report_path);
    std::cout << total.count(Status::pass) << " passed, " << total.count(Status::fail) << " failed, "
              << total.count(Status::skipped) << " skipped; report written to " << *report_path << "\n";
  } else {
    emit_report(total, format, std::cout);
  }
  for (const Record& r : total.records)
    if (r.status == Status::fail)
      std::cerr << "FAIL " << r.id << " [" << r.fixture << "]: " << r.statement
                << (r.reason.empty() ? "" : " (" + r.reason + ")") << "\n";
  return exit_code(total);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical verification of metallic structure identities"};
  Options o;
  app.add_option("manifest", o.manifests, "manifest path or bundled fixture name");
  app.add_flag("--all-fixtures", o.all_fixtures, "run every bundled fixture");
  app.add_option("--suite", o.suites, "suite to run (repeatable)")
      ->check(CLI::IsMember(metharm::suite_names()));
  app.add_option("--samples", o.samples, "sample points per identity")->check(CLI::PositiveNumber);
  app.add_option("--seed", o.seed, "random seed");
  app.add_option("--tol", o.tol, "base tolerance")->check(CLI::PositiveNumber);
  app.add_option("--report", o.report, "write the report to this path");
  app.add_option("--format", o.format, "report format")->check(CLI::IsMember({"text", "json"}));
  app.add_flag("--list-suites", o.list_suites, "list suites and identities");
  app.add_flag("--list-fixtures", o.list_fixtures, "list bundled fixtures");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  try {
    return run(o);
  } catch (const std::exception& e) {
    std::cerr << "verify: error: " << e.what() << "\n";
    return 2;
  }
}
