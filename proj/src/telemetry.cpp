#include "mcloud/telemetry.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>

namespace mcloud {

std::int64_t billing_quanta(SimTime uptime, SimTime quantum) {
  if (quantum <= SimTime::zero()) throw Error(ErrorCode::ValidationError, "billing quantum must be positive");
  if (uptime <= SimTime::zero()) return 0;
  return (uptime.count() + quantum.count() - 1) / quantum.count();
}

double billing_cost(SimTime uptime, double price_per_hour, SimTime quantum) {
  const double hours_per_quantum = static_cast<double>(quantum.count()) / 3.6e9;
  return static_cast<double>(billing_quanta(uptime, quantum)) * price_per_hour * hours_per_quantum;
}

BillingRecord bill(const NodeRecord& node, double price_per_hour, SimTime quantum) {
  if (!node.released_at) throw Error(ErrorCode::NodeStillRunning, to_string(node.node_id));
  BillingRecord r{node.node_id, node.pool_id, node.provisioned_at, *node.released_at, 0, 0.0};
  r.quanta = billing_quanta(r.end - r.start, quantum);
  r.cost = billing_cost(r.end - r.start, price_per_hour, quantum);
  return r;
}

namespace {

struct NodeAcc {
  NodeUsage usage;
  double price = 0.0;
  SimTime quantum = SimTime::seconds(3600);
};

}  // namespace

Report build_report(const Trace& trace) {
  Report rep;
  rep.trace_hash = trace_hash(trace);
  rep.trace_end = trace.empty() ? SimTime::zero() : trace.back().time;

  std::map<NodeId, NodeAcc> nodes;
  std::map<std::pair<std::string, std::string>, NodeId> by_vm;
  std::map<std::string, PoolUsage> pools;
  std::vector<std::string> pool_order;
  std::map<std::string, AppUsage> apps;
  std::vector<std::string> app_order;

  auto pool_of = [&](const std::string& id, const std::string& provider) -> PoolUsage& {
    auto [it, fresh] = pools.try_emplace(id);
    if (fresh) {
      it->second.pool_id = id;
      it->second.provider = provider;
      pool_order.push_back(id);
    }
    return it->second;
  };
  auto end_node = [&](NodeId id, SimTime t, const char* state) {
    auto it = nodes.find(id);
    if (it == nodes.end() || it->second.usage.end) return;
    it->second.usage.end = t;
    it->second.usage.state = state;
  };

  for (const auto& e : trace) {
    const auto& p = e.payload;
    switch (e.kind) {
      case EventKind::VmAccepted:
      case EventKind::ProvisionRejected: {
        NodeAcc acc;
        auto& u = acc.usage;
        u.node_id = p.get_node("node");
        u.pool_id = p.get("pool");
        u.provider = p.get("provider");
        u.provisioned = e.time;
        acc.price = std::stod(p.get("price"));
        acc.quantum = p.get_time("quantum");
        auto& pool = pool_of(u.pool_id, u.provider);
        if (e.kind == EventKind::VmAccepted) {
          u.state = "Booting";
          by_vm[{u.pool_id, p.get("vm")}] = u.node_id;
          ++pool.nodes;
        } else {
          u.state = "Rejected";
          u.end = e.time;
          ++pool.rejected;
        }
        nodes[u.node_id] = acc;
        break;
      }
      case EventKind::VmReady: {
        auto it = by_vm.find({p.get("pool"), p.get("vm")});
        if (it == by_vm.end()) break;
        auto& u = nodes.at(it->second).usage;
        if (u.end) break;
        u.ready = e.time;
        u.state = "Running";
        break;
      }
      case EventKind::ReleaseRequested: {
        auto it = nodes.find(p.get_node("node"));
        if (it != nodes.end() && !it->second.usage.end) it->second.usage.state = "Releasing";
        break;
      }
      case EventKind::Terminated: {
        auto it = by_vm.find({p.get("pool"), p.get("vm")});
        if (it != by_vm.end()) end_node(it->second, e.time, "Terminated");
        break;
      }
      case EventKind::NodeFailed:
        end_node(p.get_node("node"), e.time, "Failed");
        break;
      case EventKind::TaskComplete: {
        auto it = nodes.find(p.get_node("node"));
        if (it != nodes.end()) {
          it->second.usage.busy += p.get_time("duration");
          ++it->second.usage.tasks;
        }
        auto a = apps.find(p.get("app"));
        if (a != apps.end()) ++a->second.completed;
        break;
      }
      case EventKind::AppSubmitted: {
        AppUsage a;
        a.app_id = p.get("app");
        a.tasks = static_cast<int>(p.get_int("tasks"));
        a.status = "Running";
        a.submitted = e.time;
        if (apps.emplace(a.app_id, a).second) app_order.push_back(a.app_id);
        break;
      }
      case EventKind::AppCompleted:
      case EventKind::AppFailed: {
        auto a = apps.find(p.get("app"));
        if (a == apps.end()) break;
        a->second.finished = e.time;
        if (e.kind == EventKind::AppCompleted) {
          a->second.status = "Completed";
          a->second.makespan = e.time - a->second.submitted;
        } else {
          a->second.status = "Failed";
        }
        break;
      }
      default:
        break;
    }
  }

  for (auto& [id, acc] : nodes) {
    auto& u = acc.usage;
    const SimTime end = u.end.value_or(rep.trace_end);
    if (u.ready && end > *u.ready) u.utilization = u.busy.to_seconds() / (end - *u.ready).to_seconds();
    u.quanta = billing_quanta(end - u.provisioned, acc.quantum);
    u.cost = billing_cost(end - u.provisioned, acc.price, acc.quantum);
    auto& pool = pools.at(u.pool_id);
    pool.busy += u.busy;
    pool.quanta += u.quanta;
    pool.cost += u.cost;
    rep.total_cost += u.cost;
    rep.nodes.push_back(u);
  }
  for (const auto& id : pool_order) rep.pools.push_back(pools.at(id));
  for (const auto& id : app_order) rep.apps.push_back(apps.at(id));
  return rep;
}

namespace {

std::string opt_time(const std::optional<SimTime>& t) { return t ? format_seconds(*t) : ""; }

std::string ratio(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

using Rows = std::vector<std::vector<std::string>>;

Rows node_rows(const Report& r) {
  Rows rows{{"node", "pool", "provider", "state", "provisioned_s", "ready_s", "end_s", "busy_s", "tasks",
             "utilization", "quanta", "cost"}};
  for (const auto& n : r.nodes)
    rows.push_back({to_string(n.node_id), n.pool_id, n.provider, n.state, format_seconds(n.provisioned),
                    opt_time(n.ready), opt_time(n.end), format_seconds(n.busy), std::to_string(n.tasks),
                    ratio(n.utilization), std::to_string(n.quanta), format_decimal(n.cost)});
  return rows;
}

Rows pool_rows(const Report& r) {
  Rows rows{{"pool", "provider", "nodes", "rejected", "busy_s", "quanta", "cost"}};
  for (const auto& p : r.pools)
    rows.push_back({p.pool_id, p.provider, std::to_string(p.nodes), std::to_string(p.rejected),
                    format_seconds(p.busy), std::to_string(p.quanta), format_decimal(p.cost)});
  return rows;
}

Rows app_rows(const Report& r) {
  Rows rows{{"app", "tasks", "completed", "status", "submitted_s", "finished_s", "makespan_s"}};
  for (const auto& a : r.apps)
    rows.push_back({a.app_id, std::to_string(a.tasks), std::to_string(a.completed), a.status,
                    format_seconds(a.submitted), opt_time(a.finished), opt_time(a.makespan)});
  return rows;
}

void csv_block(std::ostream& out, const char* title, const Rows& rows) {
  out << "# " << title << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

void table_block(std::ostream& out, const char* title, const Rows& rows) {
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  out << title << '\n';
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) line += "  ";
      line += row[i];
      line.append(width[i] - row[i].size(), ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
}

}  // namespace

void write_report_csv(std::ostream& out, const Report& report) {
  csv_block(out, "nodes", node_rows(report));
  csv_block(out, "pools", pool_rows(report));
  csv_block(out, "applications", app_rows(report));
  out << "# summary\ntrace_end_s,total_cost,trace_hash\n"
      << format_seconds(report.trace_end) << ',' << format_decimal(report.total_cost) << ',' << report.trace_hash
      << '\n';
}

void write_report_table(std::ostream& out, const Report& report) {
  table_block(out, "Nodes", node_rows(report));
  out << '\n';
  table_block(out, "Pools", pool_rows(report));
  out << '\n';
  table_block(out, "Applications", app_rows(report));
  out << "\nTrace end " << format_seconds(report.trace_end) << " s, total cost " << format_decimal(report.total_cost)
      << ", trace hash " << report.trace_hash << '\n';
}

}  // namespace mcloud
