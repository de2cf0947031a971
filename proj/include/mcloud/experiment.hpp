#pragma once

// Experiment front-end: INI configuration, single runs, worker-count sweeps
// and the Table-II-shaped CSV.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mcloud/core.hpp"
#include "mcloud/deploy.hpp"
#include "mcloud/provisioning.hpp"
#include "mcloud/scheduler.hpp"
#include "mcloud/simkernel.hpp"

namespace mcloud {

enum class CloudMode { Static, Dynamic };

struct ApplicationSpec {
  std::string app_id = "app";
  int tasks = 0;
  SimTime task_duration;
  SimTime task_jitter;  // durations drawn uniformly in duration +- jitter
  std::optional<SimTime> deadline;
  int max_retries = 0;
};

struct MasterSpec {
  std::string network_id = "onprem/master";
  std::string private_ip = "192.168.1.10";
  std::string public_ip = "203.0.113.10";
};

struct FaultSpec {
  int count = 0;
  SimTime window;  // fault times are uniform in [0, window]
};

struct ExperimentConfig {
  CloudMode mode = CloudMode::Static;
  std::uint64_t seed = 0;
  SimTime horizon = SimTime::seconds(7 * 24 * 3600);
  std::vector<PoolConfig> pools;
  ApplicationSpec application;
  std::optional<SchedulerConfig> scheduler;
  std::string strategy = "priority";
  std::vector<std::pair<std::string, int>> static_allocation;
  MasterSpec master;
  Repository repository{RepositoryKind::RemoteFtp, "ftp://repository.local/container", "", {}};
  FaultSpec faults;
};

/// INI sections [experiment], [pool.<id>], [application], [scheduler],
/// [static], [master], [repository], [faults]. Throws Error(ParseError) for
/// syntax errors (message starts with "line N") and Error(ValidationError)
/// for unknown keys and invalid values (message names the field).
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// Cross-field checks; parse_config already calls this.
void validate(const ExperimentConfig& config);

struct ResultRow {
  int tasks = 0;
  int azure_workers = 0;
  int ec2_workers = 0;
  int total_workers = 0;
  SimTime makespan;
  double cost = 0.0;
  std::string trace_hash;
  bool operator==(const ResultRow&) const = default;
};

std::string_view csv_header();  // tasks,azure_workers,ec2_workers,total_workers,makespan_s,cost
std::string csv_row(const ResultRow& row);
void write_csv(std::ostream& out, const std::vector<ResultRow>& rows);

struct RunOptions {
  std::optional<std::string> strategy;  // overrides config.strategy
  bool check_invariants = false;
};

struct RunOutcome {
  std::optional<AppStatus> status;  // nullopt: never submitted
  bool terminated = false;          // app reached Completed or Failed before the horizon
  ResultRow row;
  Trace trace;
  // Filled when RunOptions::check_invariants is set.
  int capacity_violations = 0;
  bool conservation_ok = true;
  std::string detail;
};

/// Runs one experiment to completion (or the horizon) and drains releases.
RunOutcome simulate(const ExperimentConfig& config, std::uint64_t seed, const RunOptions& options = {});

/// simulate() that throws Error(AppFailed) / Error(NonTermination).
RunOutcome run(const ExperimentConfig& config, std::uint64_t seed);

struct WorkerSplit {
  int azure = 0;
  int ec2 = 0;
  bool operator==(const WorkerSplit&) const = default;
};

/// "(1,0),(2,0),(3,1)". Throws Error(ParseError).
std::vector<WorkerSplit> parse_plan(std::string_view text);

/// Replaces the static allocation: Azure workers fill the Azure pools in
/// declaration order, EC2 workers the EC2 pools. Throws ValidationError when
/// the split exceeds capacity.
ExperimentConfig with_allocation(const ExperimentConfig& config, WorkerSplit split);

/// One run per plan entry with the config's seed; rows in plan order.
std::vector<ResultRow> sweep(const ExperimentConfig& config, const std::vector<WorkerSplit>& plan);

}  // namespace mcloud
