#pragma once

// Cross-module invariant suites run by `mcloud validate`.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcloud/experiment.hpp"

namespace mcloud {

struct SuiteResult {
  std::string name;
  int cases = 0;
  int failures = 0;
  std::vector<std::string> notes;  // first few failure descriptions
  bool passed() const { return failures == 0 && cases > 0; }
};

struct ValidateOptions {
  std::optional<std::string> suite;  // run only this suite
  std::string capacity_strategy = "priority";
  int capacity_traces = 500;
  int protocol_sequences = 1000;
  int deadline_instances = 100;
  int makespan_max_tasks = 200;
  int makespan_max_workers = 8;
  std::uint64_t seed = 1;
};

std::vector<std::string> suite_names();  // capacity, protocol, makespan, deadline

/// Throws Error(ValidationError) for an unknown suite name.
std::vector<SuiteResult> run_validation(const ValidateOptions& options);

SuiteResult capacity_suite(const ValidateOptions& options);
SuiteResult protocol_suite(const ValidateOptions& options);
SuiteResult makespan_suite(const ValidateOptions& options);
SuiteResult deadline_suite(const ValidateOptions& options);

/// Registers "unbounded-priority", a strategy that ignores remaining
/// capacity. Used to check that the capacity suite catches over-provisioning.
void register_capacity_bug_fixture();

/// A pool with valid credentials and zero latencies.
PoolConfig fixture_pool(const std::string& id, ProviderKind provider, int capacity, int priority = 0,
                        double price_per_hour = 0.0);

/// Brute force: least w in [1, max_workers] whose FIFO list schedule of
/// `tasks` jobs of length `est` on w workers usable at `overhead` finishes by
/// `deadline`; nullopt when none does.
std::optional<int> oracle_min_workers(int tasks, SimTime est, SimTime overhead, SimTime deadline, int max_workers);

}  // namespace mcloud
