#include "mcloud/core.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <utility>

namespace mcloud {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::IllegalTransition: return "IllegalTransition";
    case ErrorCode::DuplicatePool: return "DuplicatePool";
    case ErrorCode::MalformedCredentials: return "MalformedCredentials";
    case ErrorCode::UnknownPool: return "UnknownPool";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::RefusedMasterRelease: return "RefusedMasterRelease";
    case ErrorCode::NoPublicIp: return "NoPublicIp";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::RepoUnreachable: return "RepoUnreachable";
    case ErrorCode::AlreadyInstalled: return "AlreadyInstalled";
    case ErrorCode::NotInstalled: return "NotInstalled";
    case ErrorCode::NotConfigured: return "NotConfigured";
    case ErrorCode::StillRunning: return "StillRunning";
    case ErrorCode::InvalidScript: return "InvalidScript";
    case ErrorCode::EmptyApplication: return "EmptyApplication";
    case ErrorCode::DuplicateApplication: return "DuplicateApplication";
    case ErrorCode::UnknownTask: return "UnknownTask";
    case ErrorCode::NodeStillRunning: return "NodeStillRunning";
    case ErrorCode::TimeTravel: return "TimeTravel";
    case ErrorCode::MalformedDoc: return "MalformedDoc";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::AppFailed: return "AppFailed";
    case ErrorCode::NonTermination: return "NonTermination";
    case ErrorCode::UnknownStrategy: return "UnknownStrategy";
  }
  return "?";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

SimTime SimTime::seconds(double s) { return SimTime(std::llround(s * 1e6)); }

std::string format_seconds_fixed(SimTime t) {
  std::int64_t us = t.count();
  const bool negative = us < 0;
  if (negative) us = -us;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%lld.%06lld", negative ? "-" : "", static_cast<long long>(us / 1000000),
                static_cast<long long>(us % 1000000));
  return buf;
}

std::string format_seconds(SimTime t) {
  std::string s = format_seconds_fixed(t);
  while (s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
  return s;
}

std::optional<SimTime> parse_seconds(std::string_view text) {
  if (text.empty()) return std::nullopt;
  const auto dot = text.find('.');
  std::string_view whole = text.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  if (whole.empty() || frac.size() > 6 || (dot != std::string_view::npos && frac.empty())) return std::nullopt;
  std::int64_t w = 0;
  auto [p, ec] = std::from_chars(whole.data(), whole.data() + whole.size(), w);
  if (ec != std::errc{} || p != whole.data() + whole.size() || w < 0) return std::nullopt;
  std::int64_t f = 0;
  for (char c : frac) {
    if (c < '0' || c > '9') return std::nullopt;
    f = f * 10 + (c - '0');
  }
  for (std::size_t i = frac.size(); i < 6; ++i) f *= 10;
  return SimTime::micros(w * 1000000 + f);
}

std::string_view to_string(VmState s) {
  switch (s) {
    case VmState::Requested: return "Requested";
    case VmState::Booting: return "Booting";
    case VmState::Running: return "Running";
    case VmState::Releasing: return "Releasing";
    case VmState::Terminated: return "Terminated";
    case VmState::Failed: return "Failed";
  }
  return "?";
}

std::string_view to_string(DaemonState s) {
  switch (s) {
    case DaemonState::NotInstalled: return "NotInstalled";
    case DaemonState::Installing: return "Installing";
    case DaemonState::Configured: return "Configured";
    case DaemonState::ContainerRunning: return "ContainerRunning";
    case DaemonState::Stopped: return "Stopped";
    case DaemonState::Unreachable: return "Unreachable";
  }
  return "?";
}

std::string_view to_string(Role r) { return r == Role::Master ? "Master" : "Worker"; }
std::string_view to_string(NetworkMode m) { return m == NetworkMode::Private ? "private" : "hybrid"; }
std::string_view to_string(ProviderKind p) { return p == ProviderKind::AzureSim ? "azure" : "ec2"; }

std::string_view to_string(LifecycleEvent e) {
  switch (e) {
    case LifecycleEvent::VmAccepted: return "VmAccepted";
    case LifecycleEvent::VmRejected: return "VmRejected";
    case LifecycleEvent::VmReady: return "VmReady";
    case LifecycleEvent::InstallDone: return "InstallDone";
    case LifecycleEvent::ConfigDone: return "ConfigDone";
    case LifecycleEvent::ContainerStarted: return "ContainerStarted";
    case LifecycleEvent::StopRequested: return "StopRequested";
    case LifecycleEvent::UninstallDone: return "UninstallDone";
    case LifecycleEvent::ReleaseRequested: return "ReleaseRequested";
    case LifecycleEvent::Terminated: return "Terminated";
    case LifecycleEvent::ProbeFailed: return "ProbeFailed";
    case LifecycleEvent::Crashed: return "Crashed";
  }
  return "?";
}

std::string to_string(NodeId id) { return "node-" + std::to_string(id.value); }
std::string to_string(TaskId id) { return "task-" + std::to_string(id.value); }

std::string_view to_string(TaskState s) {
  switch (s) {
    case TaskState::Queued: return "Queued";
    case TaskState::Dispatched: return "Dispatched";
    case TaskState::Completed: return "Completed";
    case TaskState::Failed: return "Failed";
  }
  return "?";
}

// The full table, documented in README.md ("Node lifecycle").
std::optional<LifecycleState> next_state(LifecycleState from, LifecycleEvent event) {
  using V = VmState;
  using D = DaemonState;
  using E = LifecycleEvent;
  const auto [vm, d] = from;

  switch (event) {
    case E::VmAccepted:
      if (vm == V::Requested && d == D::NotInstalled) return LifecycleState{V::Booting, d};
      return std::nullopt;
    case E::VmRejected:
      if (vm == V::Requested && d == D::NotInstalled) return LifecycleState{V::Failed, d};
      return std::nullopt;
    case E::VmReady:
      if ((vm == V::Requested || vm == V::Booting) && d == D::NotInstalled) return LifecycleState{V::Running, d};
      return std::nullopt;
    case E::ReleaseRequested:
      if (vm == V::Running && d != D::ContainerRunning) return LifecycleState{V::Releasing, d};
      return std::nullopt;
    case E::Terminated:
      if (vm == V::Releasing) return LifecycleState{V::Terminated, d};
      return std::nullopt;
    case E::Crashed:
      if (vm == V::Terminated || vm == V::Failed) return std::nullopt;
      return LifecycleState{V::Failed, d == D::NotInstalled ? d : D::Unreachable};
    default:
      break;
  }

  // Daemon events require a running VM.
  if (vm != V::Running) return std::nullopt;
  switch (event) {
    case E::InstallDone:
      if (d == D::NotInstalled) return LifecycleState{vm, D::Installing};
      break;
    case E::ConfigDone:
      if (d == D::Installing || d == D::Configured || d == D::Stopped) return LifecycleState{vm, D::Configured};
      break;
    case E::ContainerStarted:
      if (d == D::Configured || d == D::Stopped) return LifecycleState{vm, D::ContainerRunning};
      break;
    case E::StopRequested:
      if (d == D::ContainerRunning) return LifecycleState{vm, D::Stopped};
      break;
    case E::UninstallDone:
      if (d == D::Installing || d == D::Configured || d == D::Stopped) return LifecycleState{vm, D::NotInstalled};
      break;
    case E::ProbeFailed:
      if (d != D::Unreachable) return LifecycleState{vm, D::Unreachable};
      break;
    default:
      break;
  }
  return std::nullopt;
}

NodeRecord transition(NodeRecord node, LifecycleEvent event) {
  const auto next = next_state({node.vm_state, node.daemon_state}, event);
  if (!next) {
    throw Error(ErrorCode::IllegalTransition, to_string(node.node_id) + " (" + std::string(to_string(node.vm_state)) +
                                                  ", " + std::string(to_string(node.daemon_state)) + ") on " +
                                                  std::string(to_string(event)));
  }
  node.vm_state = next->vm;
  node.daemon_state = next->daemon;
  return node;
}

NodeRecord& NodeRegistry::create(std::string pool_id, Role role, SimTime provisioned_at) {
  NodeRecord rec;
  rec.node_id = NodeId{next_++};
  rec.pool_id = std::move(pool_id);
  rec.role = role;
  rec.provisioned_at = provisioned_at;
  return nodes_.emplace(rec.node_id, std::move(rec)).first->second;
}

NodeRecord& NodeRegistry::at(NodeId id) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorCode::UnknownNode, to_string(id));
  return it->second;
}

const NodeRecord& NodeRegistry::at(NodeId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorCode::UnknownNode, to_string(id));
  return it->second;
}

std::string format_decimal(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

Application make_application(std::string app_id, std::vector<SimTime> durations, std::optional<SimTime> deadline,
                             int max_retries) {
  Application app{std::move(app_id), {}, deadline, max_retries};
  app.tasks.reserve(durations.size());
  std::uint64_t next = 1;
  for (SimTime d : durations) {
    TaskRecord t;
    t.task_id = TaskId{next++};
    t.duration = d;
    app.tasks.push_back(t);
  }
  return app;
}

}  // namespace mcloud
