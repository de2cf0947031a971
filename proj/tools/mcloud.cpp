// mcloud: run, sweep, validate and report multi-cloud provisioning experiments.
//
// Exit status: 0 success, 1 validation or application failure, 2 configuration error.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "mcloud/experiment.hpp"
#include "mcloud/telemetry.hpp"
#include "mcloud/validate.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;

int exit_code(const mcloud::Error& e) {
  switch (e.code()) {
    case mcloud::ErrorCode::ParseError:
    case mcloud::ErrorCode::ValidationError:
    case mcloud::ErrorCode::MalformedCredentials:
    case mcloud::ErrorCode::UnknownStrategy:
    case mcloud::ErrorCode::InvalidScript:
      return kConfigError;
    default:
      return kFailure;
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw mcloud::Error(mcloud::ErrorCode::ValidationError, "cannot write " + path);
  return out;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out_path,
            const std::string& trace_path) {
  const auto config = mcloud::load_config(config_path);
  const auto outcome = mcloud::simulate(config, seed.value_or(config.seed));
  if (!trace_path.empty()) {
    auto t = open_out(trace_path);
    mcloud::export_trace(t, outcome.trace);
  }
  if (outcome.status == mcloud::AppStatus::Failed) {
    std::cerr << "error: AppFailed: " << config.application.app_id << " exhausted its retries\n";
    return kFailure;
  }
  if (!outcome.terminated) {
    std::cerr << "error: NonTermination: " << config.application.app_id << " did not finish\n";
    return kFailure;
  }
  auto out = open_out(out_path);
  mcloud::write_csv(out, {outcome.row});
  std::cout << mcloud::csv_row(outcome.row) << "\ntrace_hash " << outcome.row.trace_hash << '\n';
  return kOk;
}

int cmd_sweep(const std::string& config_path, const std::string& plan, const std::string& out_path) {
  const auto config = mcloud::load_config(config_path);
  const auto steps = mcloud::parse_plan(plan);
  const auto rows = mcloud::sweep(config, steps);
  auto out = open_out(out_path);
  mcloud::write_csv(out, rows);
  mcloud::write_csv(std::cout, rows);
  return kOk;
}

int cmd_validate(const mcloud::ValidateOptions& options, bool inject_capacity_bug) {
  auto opts = options;
  if (inject_capacity_bug) {
    mcloud::register_capacity_bug_fixture();
    opts.capacity_strategy = "unbounded-priority";
  }
  bool all = true;
  for (const auto& r : mcloud::run_validation(opts)) {
    std::cout << (r.passed() ? "PASS " : "FAIL ") << r.name << ": " << r.cases << " cases, " << r.failures
              << " failures\n";
    for (const auto& n : r.notes) std::cout << "  " << n << '\n';
    all = all && r.passed();
  }
  return all ? kOk : kFailure;
}

int cmd_report(const std::string& trace_path, bool csv) {
  std::ifstream in(trace_path);
  if (!in) throw mcloud::Error(mcloud::ErrorCode::ParseError, "cannot open " + trace_path);
  const auto report = mcloud::build_report(mcloud::parse_trace(in));
  if (csv)
    mcloud::write_report_csv(std::cout, report);
  else
    mcloud::write_report_table(std::cout, report);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-cloud provisioning and bag-of-tasks simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path, trace_path, plan;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "Run one experiment and write its result row");
  run->add_option("--config", config_path, "Experiment INI file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the configured seed");
  run->add_option("--out", out_path, "CSV output path")->required();
  run->add_option("--trace", trace_path, "Also export the event trace here");

  auto* sweep = app.add_subcommand("sweep", "Run a static worker-count sweep");
  sweep->add_option("--config", config_path, "Experiment INI file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--plan", plan, "Worker plan, e.g. \"(1,0),(2,0),(3,1)\" as (azure,ec2)")->required();
  sweep->add_option("--out", out_path, "CSV output path")->required();

  mcloud::ValidateOptions vopts;
  bool inject = false;
  auto* validate = app.add_subcommand("validate", "Run the invariant suites");
  std::string suite;
  validate->add_option("--suite", suite, "capacity | protocol | makespan | deadline");
  validate->add_option("--seed", vopts.seed, "Seed for randomized cases");
  validate->add_flag("--inject-capacity-bug", inject, "Provision with a strategy that ignores capacity");

  bool csv = false;
  auto* report = app.add_subcommand("report", "Summarize an exported trace");
  report->add_option("--trace", trace_path, "Trace file")->required()->check(CLI::ExistingFile);
  report->add_flag("--csv", csv, "CSV blocks instead of tables");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(config_path, seed, out_path, trace_path);
    if (*sweep) return cmd_sweep(config_path, plan, out_path);
    if (*validate) {
      if (!suite.empty()) vopts.suite = suite;
      return cmd_validate(vopts, inject);
    }
    if (*report) return cmd_report(trace_path, csv);
  } catch (const mcloud::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  }
  return kOk;
}
