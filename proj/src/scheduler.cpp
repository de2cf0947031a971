#include "mcloud/scheduler.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <queue>

namespace mcloud {

void validate(const SchedulerConfig& config) {
  if (config.queue_threshold < 1) throw Error(ErrorCode::ValidationError, "scheduler.queue_threshold must be >= 1");
  if (config.eval_period <= SimTime::zero()) throw Error(ErrorCode::ValidationError, "scheduler.eval_period_s must be > 0");
  if (config.est_task_time <= SimTime::zero())
    throw Error(ErrorCode::ValidationError, "scheduler.est_task_time_s must be > 0");
  if (config.provision_overhead < SimTime::zero() || config.idle_release < SimTime::zero())
    throw Error(ErrorCode::ValidationError, "scheduler overhead/idle_release must be >= 0");
}

Decision fixed_queue_decision(const FixedQueueInput& in, int queue_threshold) {
  const int target = (in.queued + queue_threshold - 1) / queue_threshold;
  const int w = in.active + in.pending;
  if (target > w) return Decision::provision(std::min(target - w, in.remaining_capacity));
  if (target < w) return Decision::release(std::min(in.idle_past_grace, w - target));
  return Decision::noop();
}

SimTime estimated_completion(const DeadlineInput& in, int extra) {
  using Clock = std::int64_t;
  std::priority_queue<Clock, std::vector<Clock>, std::greater<>> free_at;
  Clock done = in.now.count();
  for (SimTime busy : in.active_busy) {
    free_at.push((in.now + busy).count());
    done = std::max(done, (in.now + busy).count());
  }
  for (SimTime ready : in.pending_ready) free_at.push((in.now + ready).count());
  for (int i = 0; i < extra; ++i) free_at.push((in.now + in.overhead).count());

  if (in.queued > 0 && free_at.empty()) return SimTime::micros(std::numeric_limits<Clock>::max());
  for (int t = 0; t < in.queued; ++t) {
    const Clock start = free_at.top();
    free_at.pop();
    const Clock end = start + in.est.count();
    done = std::max(done, end);
    free_at.push(end);
  }
  return SimTime::micros(done);
}

Decision deadline_decision(const DeadlineInput& in) {
  if (in.queued == 0) return Decision::release(in.idle_past_grace);
  if (in.deadline <= in.now) {
    Decision d = Decision::provision(in.remaining_capacity);
    d.impossible_deadline = true;
    return d;
  }
  if (estimated_completion(in, 0) <= in.deadline) return Decision::noop();
  int lo = 1, hi = in.remaining_capacity;
  if (hi <= 0 || estimated_completion(in, hi) > in.deadline) return Decision::provision(hi);
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    if (estimated_completion(in, mid) <= in.deadline) hi = mid;
    else lo = mid + 1;
  }
  return Decision::provision(lo);
}

int deadline_fluid_bound(SimTime now, SimTime deadline, int queued, SimTime running_remaining, SimTime est,
                         SimTime overhead) {
  const std::int64_t budget = (deadline - now - overhead).count();
  const std::int64_t denom = std::max(budget, est.count());
  const std::int64_t work = queued * est.count() + running_remaining.count();
  return static_cast<int>((work + denom - 1) / denom);
}

std::string_view to_string(AppStatus s) {
  switch (s) {
    case AppStatus::Running: return "Running";
    case AppStatus::Completed: return "Completed";
    case AppStatus::Failed: return "Failed";
  }
  return "?";
}

Scheduler::Scheduler(Kernel& kernel, Options options) : kernel_(kernel), options_(options) {
  kernel_.on(EventKind::TaskComplete, [this](const SimEvent& e) { on_complete(e); });
}

std::string Scheduler::submit(Application app) {
  if (app.tasks.empty()) throw Error(ErrorCode::EmptyApplication, app.app_id);
  if (apps_.contains(app.app_id)) throw Error(ErrorCode::DuplicateApplication, app.app_id);
  AppEntry entry;
  for (std::size_t i = 0; i < app.tasks.size(); ++i) {
    auto& t = app.tasks[i];
    if (t.duration <= SimTime::zero()) throw Error(ErrorCode::ValidationError, "task durations must be positive");
    if (!entry.index.emplace(t.task_id, i).second)
      throw Error(ErrorCode::ValidationError, "duplicate task id " + to_string(t.task_id));
    t.state = TaskState::Queued;
    t.assigned_node.reset();
    t.attempts = 0;
  }
  const std::string id = app.app_id;
  for (const auto& t : app.tasks) queue_.emplace_back(id, t.task_id);
  entry.submitted = kernel_.now();
  auto payload = Payload{}.set("app", id).set("tasks", static_cast<std::int64_t>(app.tasks.size()));
  if (app.deadline) payload.set("deadline", *app.deadline);
  entry.app = std::move(app);
  apps_.emplace(id, std::move(entry));
  kernel_.schedule(kernel_.now(), EventKind::AppSubmitted, std::move(payload));
  maybe_dispatch();
  return id;
}

TaskRecord& Scheduler::task(const std::string& app_id, TaskId id) {
  auto it = apps_.find(app_id);
  if (it == apps_.end()) throw Error(ErrorCode::UnknownTask, app_id + "/" + to_string(id));
  auto t = it->second.index.find(id);
  if (t == it->second.index.end()) throw Error(ErrorCode::UnknownTask, app_id + "/" + to_string(id));
  return it->second.app.tasks[t->second];
}

void Scheduler::add_worker(NodeId node) {
  if (!ready_.insert(node).second) return;
  idle_since_[node] = kernel_.now();
  maybe_dispatch();
}

void Scheduler::maybe_dispatch() {
  if (options_.auto_dispatch) dispatch();
}

std::vector<Assignment> Scheduler::dispatch() {
  std::vector<Assignment> out;
  for (NodeId node : ready_) {
    if (queue_.empty()) break;
    if (busy_.contains(node)) continue;
    auto [app_id, tid] = queue_.front();
    queue_.pop_front();
    TaskRecord& t = task(app_id, tid);
    t.state = TaskState::Dispatched;
    t.assigned_node = node;
    ++t.attempts;
    const auto base = Payload{}.set("app", app_id).set("attempt", t.attempts).set("node", node).set("task", tid);
    kernel_.schedule(kernel_.now(), EventKind::TaskDispatched, base);
    const auto event = kernel_.schedule_after(t.duration, EventKind::TaskComplete, Payload(base).set("duration", t.duration));
    busy_[node] = Running{app_id, tid, kernel_.now() + t.duration, event};
    idle_since_.erase(node);
    out.push_back({app_id, tid, node});
  }
  return out;
}

void Scheduler::on_complete(const SimEvent& e) {
  const NodeId node = e.payload.get_node("node");
  auto it = busy_.find(node);
  if (it == busy_.end() || it->second.event != e.seq) return;
  const auto app_id = it->second.app_id;
  TaskRecord& t = task(app_id, it->second.task);
  busy_.erase(it);
  t.state = TaskState::Completed;
  if (ready_.contains(node)) idle_since_[node] = kernel_.now();
  ++completions_;
  observed_total_ += t.duration;

  AppEntry& entry = apps_.at(app_id);
  if (++entry.completed == static_cast<int>(entry.app.tasks.size())) finish_app(entry, AppStatus::Completed);
  maybe_dispatch();
}

void Scheduler::finish_app(AppEntry& entry, AppStatus status) {
  entry.status = status;
  entry.finished = kernel_.now();
  const auto& id = entry.app.app_id;
  if (status == AppStatus::Completed) {
    kernel_.schedule(kernel_.now(), EventKind::AppCompleted,
                     Payload{}.set("app", id).set("makespan", kernel_.now() - entry.submitted));
  } else {
    drop_queued(id);
    kernel_.schedule(kernel_.now(), EventKind::AppFailed, Payload{}.set("app", id));
  }
  if (listener_.app_finished) listener_.app_finished(id);
}

void Scheduler::drop_queued(const std::string& app_id) {
  std::erase_if(queue_, [&](const QueueItem& q) { return q.first == app_id; });
  for (auto it = busy_.begin(); it != busy_.end();) {
    if (it->second.app_id == app_id) {
      kernel_.cancel(it->second.event);
      if (ready_.contains(it->first)) idle_since_[it->first] = kernel_.now();
      it = busy_.erase(it);
    } else {
      ++it;
    }
  }
}

FailureOutcome Scheduler::on_task_failed(const std::string& app_id, TaskId tid, NodeId node) {
  TaskRecord& t = task(app_id, tid);
  if (t.state != TaskState::Dispatched || t.assigned_node != node)
    throw Error(ErrorCode::UnknownTask, to_string(tid) + " is not running on " + to_string(node));
  if (auto it = busy_.find(node); it != busy_.end()) {
    kernel_.cancel(it->second.event);
    busy_.erase(it);
  }
  if (ready_.contains(node)) idle_since_[node] = kernel_.now();

  AppEntry& entry = apps_.at(app_id);
  if (t.attempts < entry.app.max_retries + 1) {
    t.state = TaskState::Queued;
    t.assigned_node.reset();
    queue_.emplace_front(app_id, tid);
    maybe_dispatch();
    return FailureOutcome::Requeued;
  }
  t.state = TaskState::Failed;
  finish_app(entry, AppStatus::Failed);
  maybe_dispatch();
  return FailureOutcome::AppFailed;
}

void Scheduler::worker_failed(NodeId node) {
  ready_.erase(node);
  idle_since_.erase(node);
  if (auto it = busy_.find(node); it != busy_.end()) {
    const auto [app_id, tid, ends, event] = it->second;
    on_task_failed(app_id, tid, node);
  }
}

void Scheduler::worker_stopped(NodeId node) {
  ready_.erase(node);
  idle_since_.erase(node);
  auto it = busy_.find(node);
  if (it == busy_.end()) return;
  kernel_.cancel(it->second.event);
  TaskRecord& t = task(it->second.app_id, it->second.task);
  t.state = TaskState::Queued;
  t.assigned_node.reset();
  --t.attempts;
  queue_.emplace_front(it->second.app_id, it->second.task);
  busy_.erase(it);
  maybe_dispatch();
}

std::vector<NodeId> Scheduler::ready_workers() const { return {ready_.begin(), ready_.end()}; }

std::vector<NodeId> Scheduler::idle_workers() const {
  std::vector<NodeId> out;
  for (NodeId n : ready_)
    if (!busy_.contains(n)) out.push_back(n);
  return out;
}

std::vector<NodeId> Scheduler::idle_since_at_least(SimTime grace) const {
  std::vector<NodeId> out;
  for (const auto& [n, since] : idle_since_)
    if (ready_.contains(n) && !busy_.contains(n) && kernel_.now() - since >= grace) out.push_back(n);
  return out;
}

std::optional<std::pair<std::string, TaskId>> Scheduler::running_on(NodeId node) const {
  auto it = busy_.find(node);
  if (it == busy_.end()) return std::nullopt;
  return std::pair{it->second.app_id, it->second.task};
}

std::map<NodeId, SimTime> Scheduler::busy_remaining() const {
  std::map<NodeId, SimTime> out;
  for (NodeId n : ready_) {
    auto it = busy_.find(n);
    out[n] = it == busy_.end() ? SimTime::zero() : it->second.ends - kernel_.now();
  }
  return out;
}

SimTime Scheduler::running_remaining_total() const {
  SimTime total;
  for (const auto& [n, r] : busy_) total += r.ends - kernel_.now();
  return total;
}

SimTime Scheduler::estimated_task_time(SimTime seed) const {
  if (completions_ == 0) return seed;
  return SimTime::micros(observed_total_.count() / static_cast<std::int64_t>(completions_));
}

const Application& Scheduler::application(const std::string& app_id) const { return apps_.at(app_id).app; }
AppStatus Scheduler::status(const std::string& app_id) const { return apps_.at(app_id).status; }

std::optional<SimTime> Scheduler::submitted_at(const std::string& app_id) const {
  auto it = apps_.find(app_id);
  if (it == apps_.end()) return std::nullopt;
  return it->second.submitted;
}

std::optional<SimTime> Scheduler::finished_at(const std::string& app_id) const {
  auto it = apps_.find(app_id);
  if (it == apps_.end()) return std::nullopt;
  return it->second.finished;
}

int Scheduler::completed(const std::string& app_id) const { return apps_.at(app_id).completed; }

}  // namespace mcloud
