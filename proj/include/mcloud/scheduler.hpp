#pragma once

// Bag-of-tasks scheduling on ready workers, failed-task reallocation, and the
// two dynamic provisioning decision functions (fixed queue, deadline).

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mcloud/core.hpp"
#include "mcloud/simkernel.hpp"

namespace mcloud {

enum class Algorithm { FixedQueue, DeadlinePriority };

struct SchedulerConfig {
  Algorithm algorithm = Algorithm::FixedQueue;
  int queue_threshold = 1;          // Q, tasks per worker for FixedQueue
  SimTime est_task_time;            // bootstrap estimate
  SimTime provision_overhead;       // boot + install estimate
  SimTime eval_period = SimTime::seconds(30);
  SimTime idle_release;             // grace before an idle worker may be released
};

/// Throws Error(ValidationError) when Q < 1 or eval_period <= 0.
void validate(const SchedulerConfig& config);

struct Decision {
  enum class Kind { NoOp, Provision, Release };
  Kind kind = Kind::NoOp;
  int count = 0;
  bool impossible_deadline = false;

  static Decision noop() { return {}; }
  static Decision provision(int n) { return n > 0 ? Decision{Kind::Provision, n} : Decision{}; }
  static Decision release(int n) { return n > 0 ? Decision{Kind::Release, n} : Decision{}; }
  bool operator==(const Decision&) const = default;
};

struct FixedQueueInput {
  int queued = 0;
  int active = 0;
  int pending = 0;
  int idle_past_grace = 0;
  int remaining_capacity = 0;
};

/// target = ceil(queued / Q): provision up to target (clamped by capacity),
/// or release idle workers beyond it.
Decision fixed_queue_decision(const FixedQueueInput& in, int queue_threshold);

struct DeadlineInput {
  SimTime now;
  SimTime deadline;  // absolute
  int queued = 0;
  SimTime est;
  SimTime overhead;
  std::vector<SimTime> active_busy;    // per active worker: remaining busy time (0 = idle)
  std::vector<SimTime> pending_ready;  // per pending worker: expected time until usable
  int idle_past_grace = 0;
  int remaining_capacity = 0;
};

/// Estimated completion time of the queued tasks plus running work when
/// `extra` new workers become usable at now + overhead. Greedy list schedule
/// of identical tasks of length `est`.
SimTime estimated_completion(const DeadlineInput& in, int extra);

/// Minimal number of extra workers whose estimated completion meets the
/// deadline; provisions everything left when none does (or the deadline has
/// passed). Releases idle workers past grace once nothing is queued.
Decision deadline_decision(const DeadlineInput& in);

/// The continuous lower bound ceil((queued*est + running) / max(budget, est))
/// on workers needed; the discrete answer can exceed it.
int deadline_fluid_bound(SimTime now, SimTime deadline, int queued, SimTime running_remaining, SimTime est,
                         SimTime overhead);

enum class AppStatus { Running, Completed, Failed };
std::string_view to_string(AppStatus s);

struct Assignment {
  std::string app_id;
  TaskId task;
  NodeId node;
  bool operator==(const Assignment&) const = default;
};

enum class FailureOutcome { Requeued, AppFailed };

/// Master-side task scheduler. FIFO queue; idle ready workers are served in
/// ascending node id order; completions are kernel TaskComplete events.
class Scheduler {
 public:
  struct Options {
    bool auto_dispatch = true;
  };
  struct Listener {
    std::function<void(const std::string&)> app_finished;  // completed or failed
  };

  explicit Scheduler(Kernel& kernel) : Scheduler(kernel, Options{}) {}
  Scheduler(Kernel& kernel, Options options);

  void set_listener(Listener l) { listener_ = std::move(l); }

  /// Throws EmptyApplication / DuplicateApplication.
  std::string submit(Application app);

  void add_worker(NodeId node);
  /// Node lost: any running task is failed (counts as an attempt).
  void worker_failed(NodeId node);
  /// Container stopped: any running task goes back to the head of the queue
  /// without consuming an attempt.
  void worker_stopped(NodeId node);

  std::vector<Assignment> dispatch();

  /// Throws UnknownTask unless the task is Dispatched on `node`.
  FailureOutcome on_task_failed(const std::string& app_id, TaskId task, NodeId node);

  // Queries.
  int queued() const { return static_cast<int>(queue_.size()); }
  bool is_ready(NodeId node) const { return ready_.contains(node); }
  std::vector<NodeId> ready_workers() const;
  std::vector<NodeId> idle_workers() const;
  /// Idle workers whose idle time is at least `grace`.
  std::vector<NodeId> idle_since_at_least(SimTime grace) const;
  std::optional<std::pair<std::string, TaskId>> running_on(NodeId node) const;
  /// Remaining busy time per ready worker (0 when idle).
  std::map<NodeId, SimTime> busy_remaining() const;
  SimTime running_remaining_total() const;
  /// Running mean of observed task durations, seeded by `seed` until the first completion.
  SimTime estimated_task_time(SimTime seed) const;

  const Application& application(const std::string& app_id) const;
  AppStatus status(const std::string& app_id) const;
  std::optional<SimTime> submitted_at(const std::string& app_id) const;
  std::optional<SimTime> finished_at(const std::string& app_id) const;
  int completed(const std::string& app_id) const;
  std::uint64_t completions_total() const { return completions_; }

 private:
  struct AppEntry {
    Application app;
    std::map<TaskId, std::size_t> index;
    AppStatus status = AppStatus::Running;
    SimTime submitted;
    std::optional<SimTime> finished;
    int completed = 0;
  };
  struct Running {
    std::string app_id;
    TaskId task;
    SimTime ends;
    std::uint64_t event = 0;
  };
  using QueueItem = std::pair<std::string, TaskId>;

  TaskRecord& task(const std::string& app_id, TaskId id);
  void on_complete(const SimEvent& e);
  void finish_app(AppEntry& entry, AppStatus status);
  void maybe_dispatch();
  void drop_queued(const std::string& app_id);

  Kernel& kernel_;
  Options options_;
  Listener listener_;
  std::map<std::string, AppEntry> apps_;
  std::deque<QueueItem> queue_;
  std::set<NodeId> ready_;
  std::map<NodeId, Running> busy_;
  std::map<NodeId, SimTime> idle_since_;
  std::uint64_t completions_ = 0;
  SimTime observed_total_;
};

}  // namespace mcloud
