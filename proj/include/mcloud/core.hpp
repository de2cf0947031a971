#pragma once

// Domain model shared by every module: identities, simulation time, node and
// task records, and the node lifecycle transition table.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mcloud {

enum class ErrorCode {
  IllegalTransition,
  DuplicatePool,
  MalformedCredentials,
  UnknownPool,
  UnknownNode,
  RefusedMasterRelease,
  NoPublicIp,
  Unreachable,
  RepoUnreachable,
  AlreadyInstalled,
  NotInstalled,
  NotConfigured,
  StillRunning,
  InvalidScript,
  EmptyApplication,
  DuplicateApplication,
  UnknownTask,
  NodeStillRunning,
  TimeTravel,
  MalformedDoc,
  ParseError,
  ValidationError,
  AppFailed,
  NonTermination,
  UnknownStrategy,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Simulation time and durations in integer microseconds. Integer ticks keep
/// makespans such as 14 x 11.9125 s exact and make traces bit-stable.
class SimTime {
 public:
  constexpr SimTime() = default;
  static constexpr SimTime micros(std::int64_t us) { return SimTime(us); }
  static SimTime seconds(double s);  // rounds to the nearest microsecond
  static constexpr SimTime zero() { return SimTime(0); }

  constexpr std::int64_t count() const { return us_; }
  constexpr double to_seconds() const { return static_cast<double>(us_) / 1e6; }

  constexpr SimTime operator+(SimTime o) const { return SimTime(us_ + o.us_); }
  constexpr SimTime operator-(SimTime o) const { return SimTime(us_ - o.us_); }
  constexpr SimTime operator*(std::int64_t k) const { return SimTime(us_ * k); }
  constexpr SimTime& operator+=(SimTime o) { us_ += o.us_; return *this; }
  constexpr auto operator<=>(const SimTime&) const = default;

 private:
  constexpr explicit SimTime(std::int64_t us) : us_(us) {}
  std::int64_t us_ = 0;
};

/// "953.0", "166.775", "0.000001": shortest exact decimal, at least one fraction digit.
std::string format_seconds(SimTime t);
/// Fixed six fraction digits; used by the trace format.
std::string format_seconds_fixed(SimTime t);
/// Parses a nonnegative decimal with at most six fraction digits, exactly.
std::optional<SimTime> parse_seconds(std::string_view text);
/// Shortest round-trip-ish decimal ("%.12g"), used for prices and costs.
std::string format_decimal(double v);

template <class Tag>
struct Id {
  std::uint64_t value = 0;
  constexpr auto operator<=>(const Id&) const = default;
};

using NodeId = Id<struct NodeTag>;
using TaskId = Id<struct TaskTag>;
using TicketId = Id<struct TicketTag>;

enum class VmState { Requested, Booting, Running, Releasing, Terminated, Failed };
enum class DaemonState { NotInstalled, Installing, Configured, ContainerRunning, Stopped, Unreachable };
enum class Role { Master, Worker };
enum class NetworkMode { Private, Hybrid };
enum class ProviderKind { AzureSim, Ec2Sim };

enum class LifecycleEvent {
  VmAccepted,
  VmRejected,
  VmReady,
  InstallDone,
  ConfigDone,
  ContainerStarted,
  StopRequested,
  UninstallDone,
  ReleaseRequested,
  Terminated,
  ProbeFailed,
  Crashed,
};

inline constexpr VmState kAllVmStates[] = {VmState::Requested, VmState::Booting,    VmState::Running,
                                           VmState::Releasing, VmState::Terminated, VmState::Failed};
inline constexpr DaemonState kAllDaemonStates[] = {
    DaemonState::NotInstalled,     DaemonState::Installing, DaemonState::Configured,
    DaemonState::ContainerRunning, DaemonState::Stopped,    DaemonState::Unreachable};
inline constexpr LifecycleEvent kAllLifecycleEvents[] = {
    LifecycleEvent::VmAccepted,       LifecycleEvent::VmRejected,    LifecycleEvent::VmReady,
    LifecycleEvent::InstallDone,      LifecycleEvent::ConfigDone,    LifecycleEvent::ContainerStarted,
    LifecycleEvent::StopRequested,    LifecycleEvent::UninstallDone, LifecycleEvent::ReleaseRequested,
    LifecycleEvent::Terminated,       LifecycleEvent::ProbeFailed,   LifecycleEvent::Crashed};

std::string_view to_string(VmState s);
std::string_view to_string(DaemonState s);
std::string_view to_string(Role r);
std::string_view to_string(NetworkMode m);
std::string_view to_string(ProviderKind p);
std::string_view to_string(LifecycleEvent e);
std::string to_string(NodeId id);
std::string to_string(TaskId id);

struct NodeRecord {
  NodeId node_id;
  std::string pool_id;
  Role role = Role::Worker;
  VmState vm_state = VmState::Requested;
  DaemonState daemon_state = DaemonState::NotInstalled;
  std::string network_id;
  std::string private_ip;
  std::optional<std::string> public_ip;
  std::set<int> open_ports;
  SimTime provisioned_at;
  std::optional<SimTime> ready_at;
  std::optional<SimTime> released_at;
};

/// Owns every node record of one cloud. Single-threaded by contract.
class NodeRegistry {
 public:
  NodeRecord& create(std::string pool_id, Role role, SimTime provisioned_at);
  NodeRecord& at(NodeId id);
  const NodeRecord& at(NodeId id) const;
  bool contains(NodeId id) const { return nodes_.contains(id); }
  const std::map<NodeId, NodeRecord>& all() const { return nodes_; }

 private:
  std::map<NodeId, NodeRecord> nodes_;
  std::uint64_t next_ = 1;
};

struct LifecycleState {
  VmState vm;
  DaemonState daemon;
  auto operator<=>(const LifecycleState&) const = default;
};

/// The single transition table. Returns nullopt for pairs the table rejects.
std::optional<LifecycleState> next_state(LifecycleState from, LifecycleEvent event);

/// Applies `event` to `node`; throws Error(IllegalTransition) for rejected pairs.
/// Timestamps are the caller's responsibility.
NodeRecord transition(NodeRecord node, LifecycleEvent event);

enum class TaskState { Queued, Dispatched, Completed, Failed };
std::string_view to_string(TaskState s);

struct TaskRecord {
  TaskId task_id;
  SimTime duration;
  TaskState state = TaskState::Queued;
  std::optional<NodeId> assigned_node;
  int attempts = 0;
};

struct Application {
  std::string app_id;
  std::vector<TaskRecord> tasks;
  std::optional<SimTime> deadline;  // relative to submission
  int max_retries = 0;
};

/// Builds an application of `count` tasks with ids 1..count.
Application make_application(std::string app_id, std::vector<SimTime> durations,
                             std::optional<SimTime> deadline = std::nullopt, int max_retries = 0);

inline constexpr int kManagementPort = 5985;
inline constexpr int kContainerPort = 9090;

}  // namespace mcloud
