#pragma once

// Deterministic discrete-event kernel: virtual clock, (time, seq)-ordered event
// queue, SplitMix64 randomness, and trace capture/export.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mcloud/core.hpp"

namespace mcloud {

/// SplitMix64 (Steele, Lea, Flood). Fixed so sequences match across implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  /// 53-bit uniform in [0, 1).
  double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

enum class EventKind {
  AppSubmitted,
  VmAccepted,
  ProvisionRejected,
  VmReady,
  ProbeFailed,
  InstallDone,
  ConfigDone,
  ContainerStarted,
  ContainerStopped,
  Uninstalled,
  TaskDispatched,
  TaskComplete,
  InjectFault,
  NodeFailed,
  EvalProvisioning,
  ReleaseRequested,
  Terminated,
  AppCompleted,
  AppFailed,
  Custom,
};

std::string_view to_string(EventKind k);
std::optional<EventKind> parse_event_kind(std::string_view s);

/// Sorted key=value payload. Keys and values may not contain ',', '=', tab or newline.
class Payload {
 public:
  Payload() = default;
  Payload(std::initializer_list<std::pair<const std::string, std::string>> kv);

  Payload& set(const std::string& key, std::string value);
  Payload& set(const std::string& key, std::int64_t value) { return set(key, std::to_string(value)); }
  Payload& set(const std::string& key, SimTime value) { return set(key, format_seconds_fixed(value)); }
  Payload& set(const std::string& key, NodeId id) { return set(key, static_cast<std::int64_t>(id.value)); }
  Payload& set(const std::string& key, TaskId id) { return set(key, static_cast<std::int64_t>(id.value)); }

  bool has(const std::string& key) const { return kv_.contains(key); }
  const std::string& get(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  SimTime get_time(const std::string& key) const;
  NodeId get_node(const std::string& key) const { return NodeId{static_cast<std::uint64_t>(get_int(key))}; }
  TaskId get_task(const std::string& key) const { return TaskId{static_cast<std::uint64_t>(get_int(key))}; }

  const std::map<std::string, std::string>& entries() const { return kv_; }
  std::string encode() const;  // "k=v,k2=v2"
  static Payload decode(std::string_view text);
  bool operator==(const Payload&) const = default;

 private:
  std::map<std::string, std::string> kv_;
};

struct SimEvent {
  SimTime time;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::Custom;
  Payload payload;
  bool operator==(const SimEvent&) const = default;
};

using Trace = std::vector<SimEvent>;

/// One line of the tab-separated trace format (no trailing newline).
std::string trace_line(const SimEvent& e);
void export_trace(std::ostream& out, const Trace& trace);
/// Throws Error(ParseError) on malformed lines.
Trace parse_trace(std::istream& in);
/// FNV-1a 64 over the exported lines; rendered as 16 lowercase hex digits.
std::string trace_hash(const Trace& trace);

class Kernel {
 public:
  using Handler = std::function<void(const SimEvent&)>;

  explicit Kernel(std::uint64_t seed = 0) : rng_(seed) {}
  Kernel(const Kernel&) = delete;
  Kernel& operator=(const Kernel&) = delete;

  SimTime now() const { return now_; }

  /// Throws Error(TimeTravel) when `at` < now().
  std::uint64_t schedule(SimTime at, EventKind kind, Payload payload = {});
  std::uint64_t schedule_after(SimTime delay, EventKind kind, Payload payload = {}) {
    return schedule(now_ + delay, kind, std::move(payload));
  }

  /// Withdraws a queued event; it is dropped unprocessed and never enters the
  /// trace. Returns false when the event already ran or was cancelled.
  bool cancel(std::uint64_t event_id);

  /// Handlers for one kind run in registration order.
  void on(EventKind kind, Handler handler);
  /// Runs after every processed event, after its handlers.
  void add_observer(Handler observer);

  /// Processes events until `stop` returns true for a processed event, the
  /// queue empties, or the next event lies beyond `horizon` (then now = horizon).
  /// Returns the events processed by this call.
  Trace run_until(std::optional<SimTime> horizon = std::nullopt,
                  const std::function<bool(const SimEvent&)>& stop = {});

  double rand_uniform(double lo, double hi);
  std::uint64_t rand_u64() { return rng_.next(); }

  const Trace& trace() const { return trace_; }
  /// Queued events that will still be processed.
  std::size_t pending() const { return live_.size(); }
  std::uint64_t scheduled_count() const { return next_seq_; }
  std::uint64_t cancelled_count() const { return cancelled_count_; }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  SimTime now_;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  std::set<std::uint64_t> live_;
  std::uint64_t cancelled_count_ = 0;
  std::map<EventKind, std::vector<Handler>> handlers_;
  std::vector<Handler> observers_;
  Trace trace_;
  SplitMix64 rng_;
};

}  // namespace mcloud
