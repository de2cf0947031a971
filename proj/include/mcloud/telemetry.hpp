#pragma once

// Accounting and reporting: ceil-quantized billing per node and a trace-driven
// report of node utilization, pool cost and application makespan.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mcloud/core.hpp"
#include "mcloud/simkernel.hpp"

namespace mcloud {

struct BillingRecord {
  NodeId node_id;
  std::string pool_id;
  SimTime start;
  SimTime end;
  std::int64_t quanta = 0;
  double cost = 0.0;
};

/// quanta = ceil(uptime / quantum); cost = quanta * price_per_hour * quantum / 1h.
std::int64_t billing_quanta(SimTime uptime, SimTime quantum);
double billing_cost(SimTime uptime, double price_per_hour, SimTime quantum);

/// Bills provisioned_at .. released_at. Throws NodeStillRunning without an end.
BillingRecord bill(const NodeRecord& node, double price_per_hour, SimTime quantum);

struct NodeUsage {
  NodeId node_id;
  std::string pool_id;
  std::string provider;
  std::string state;
  SimTime provisioned;
  std::optional<SimTime> ready;
  std::optional<SimTime> end;
  SimTime busy;
  int tasks = 0;
  double utilization = 0.0;  // busy / (end-or-trace-end - ready)
  std::int64_t quanta = 0;
  double cost = 0.0;
};

struct PoolUsage {
  std::string pool_id;
  std::string provider;
  int nodes = 0;
  int rejected = 0;
  SimTime busy;
  std::int64_t quanta = 0;
  double cost = 0.0;
};

struct AppUsage {
  std::string app_id;
  int tasks = 0;
  int completed = 0;
  std::string status;  // Running | Completed | Failed
  SimTime submitted;
  std::optional<SimTime> finished;
  std::optional<SimTime> makespan;
};

struct Report {
  SimTime trace_end;
  std::string trace_hash;
  std::vector<NodeUsage> nodes;
  std::vector<PoolUsage> pools;
  std::vector<AppUsage> apps;
  double total_cost = 0.0;
};

/// Pure aggregation over a trace. Nodes still up at the end of the trace are
/// billed up to the last event.
Report build_report(const Trace& trace);

/// Deterministic CSV blocks (nodes, pools, applications), LF line endings.
void write_report_csv(std::ostream& out, const Report& report);
/// Aligned plain-text tables.
void write_report_table(std::ostream& out, const Report& report);

}  // namespace mcloud
