#include "mcloud/experiment.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <sstream>

#include "mcloud/netmodel.hpp"
#include "mcloud/telemetry.hpp"

namespace mcloud {

std::string_view csv_header() { return "tasks,azure_workers,ec2_workers,total_workers,makespan_s,cost"; }

std::string csv_row(const ResultRow& r) {
  std::ostringstream out;
  out << r.tasks << ',' << r.azure_workers << ',' << r.ec2_workers << ',' << r.total_workers << ','
      << format_seconds(r.makespan) << ',' << format_decimal(r.cost);
  return out.str();
}

void write_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << csv_header() << '\n';
  for (const auto& r : rows) out << csv_row(r) << '\n';
}

namespace {

std::vector<SimTime> draw_durations(Kernel& k, const ApplicationSpec& a) {
  std::vector<SimTime> out;
  out.reserve(a.tasks);
  const double d = static_cast<double>(a.task_duration.count());
  const double j = static_cast<double>(a.task_jitter.count());
  for (int i = 0; i < a.tasks; ++i) {
    const auto us = static_cast<std::int64_t>(k.rand_uniform(d - j, d + j));
    out.push_back(SimTime::micros(std::max<std::int64_t>(us, 1)));
  }
  return out;
}

class Experiment {
 public:
  Experiment(const ExperimentConfig& config, std::uint64_t seed, const RunOptions& options)
      : config_(config),
        options_(options),
        kernel_(seed),
        master_(make_master()),
        pools_(kernel_, nodes_, ips_, StrategyRegistry::global().make(options.strategy.value_or(config.strategy))),
        deployer_(kernel_, nodes_, master_),
        scheduler_(kernel_) {
    for (const auto& p : config_.pools) pools_.register_pool(p);
    wire_listeners();
  }

  RunOutcome execute() {
    const auto durations = draw_durations(kernel_, config_.application);
    schedule_faults();
    if (options_.check_invariants) {
      kernel_.add_observer([this](const SimEvent&) {
        if (!pools_.capacity_ok()) ++capacity_violations_;
      });
    }
    app_ = make_application(config_.application.app_id, durations, config_.application.deadline,
                            config_.application.max_retries);

    if (config_.mode == CloudMode::Static) {
      for (const auto& [pool, n] : config_.static_allocation) {
        for (const auto& t : pools_.provision_in(pool, n).tickets)
          if (!t.rejected) ++unsettled_;
      }
      maybe_submit_static();
    } else {
      submit();
      eval_event_ = kernel_.schedule(kernel_.now(), EventKind::EvalProvisioning);
      kernel_.on(EventKind::EvalProvisioning, [this](const SimEvent&) { evaluate(); });
    }

    kernel_.run_until(config_.horizon, [this](const SimEvent&) { return finished_; });
    shutdown();
    return outcome();
  }

 private:
  NodeId make_master() {
    NodeRecord& m = nodes_.create("master", Role::Master, SimTime::zero());
    m.vm_state = VmState::Running;
    m.daemon_state = DaemonState::ContainerRunning;
    m.network_id = config_.master.network_id;
    m.private_ip = config_.master.private_ip;
    m.public_ip = config_.master.public_ip;
    m.open_ports = {kManagementPort, kContainerPort};
    m.ready_at = SimTime::zero();
    return m.node_id;
  }

  const PoolConfig& pool_config(NodeId node) const { return pools_.pool(nodes_.at(node).pool_id).config; }

  void wire_listeners() {
    pools_.set_listener({.ready = [this](NodeId n) { on_ready(n); }, .terminated = {}, .rejected = {}});
    deployer_.set_listener({.installed = [this](NodeId n) { on_installed(n); },
                            .started = [this](NodeId n) { on_started(n); },
                            .stopped = [this](NodeId n) { scheduler_.worker_stopped(n); }});
    scheduler_.set_listener({.app_finished = [this](const std::string&) { finished_ = true; }});
    kernel_.on(EventKind::InjectFault, [this](const SimEvent&) { inject_fault(); });
  }

  void settle_one() {
    if (unsettled_ > 0) --unsettled_;
    maybe_submit_static();
  }

  void give_up(NodeId n) {
    deployer_.mark_unreachable(n);
    settle_one();
  }

  void on_ready(NodeId n) {
    if (shutting_down_) {
      pools_.release(n);
      return;
    }
    if (deployer_.probe(n) == ProbeResult::Unreachable) return give_up(n);
    try {
      deployer_.install(n, config_.repository, pool_config(n).install_plan());
    } catch (const Error&) {
      give_up(n);
    }
  }

  void on_installed(NodeId n) {
    const auto mode = pool_config(n).network_mode;
    const auto master = net::location_of(nodes_.at(master_));
    try {
      deployer_.configure(n, net::advertise_endpoint(master, mode, kContainerPort), mode);
      deployer_.control(n, ControlAction::Start);
    } catch (const Error&) {
      give_up(n);
    }
  }

  void on_started(NodeId n) {
    if (!deployer_.connected(n)) return give_up(n);
    scheduler_.add_worker(n);
    settle_one();
  }

  void submit() {
    submitted_ = true;
    submit_time_ = kernel_.now();
    scheduler_.submit(app_);
  }

  void maybe_submit_static() {
    if (config_.mode == CloudMode::Static && !submitted_ && unsettled_ == 0) submit();
  }

  void schedule_faults() {
    const double window = static_cast<double>(config_.faults.window.count());
    for (int i = 0; i < config_.faults.count; ++i) {
      const auto at = SimTime::micros(static_cast<std::int64_t>(kernel_.rand_uniform(0.0, window)));
      fault_events_.push_back(kernel_.schedule(at, EventKind::InjectFault));
    }
  }

  std::vector<NodeId> live_workers() const {
    std::vector<NodeId> out;
    for (const auto& [id, n] : nodes_.all()) {
      if (n.role != Role::Worker) continue;
      if (n.vm_state == VmState::Requested || n.vm_state == VmState::Booting || n.vm_state == VmState::Running)
        out.push_back(id);
    }
    return out;
  }

  void inject_fault() {
    const auto live = live_workers();
    if (live.empty()) return;
    const NodeId victim = live[kernel_.rand_u64() % live.size()];
    const bool was_settled = scheduler_.is_ready(victim) || nodes_.at(victim).daemon_state == DaemonState::Unreachable;
    scheduler_.worker_failed(victim);
    deployer_.forget(victim);
    pools_.fail(victim);
    if (!was_settled) settle_one();
  }

  void evaluate() {
    if (finished_) return;
    const Decision d = decide();
    if (d.kind == Decision::Kind::Provision) {
      pools_.provision(d.count);
    } else if (d.kind == Decision::Kind::Release) {
      const auto idle = scheduler_.idle_since_at_least(config_.scheduler->idle_release);
      for (int i = 0; i < d.count && i < static_cast<int>(idle.size()); ++i) {
        deployer_.control(idle[i], ControlAction::Stop);
        pools_.release(idle[i]);
      }
    }
    eval_event_ = kernel_.schedule_after(config_.scheduler->eval_period, EventKind::EvalProvisioning);
  }

  Decision decide() const {
    const auto& sc = *config_.scheduler;
    const int idle = static_cast<int>(scheduler_.idle_since_at_least(sc.idle_release).size());
    const int remaining = pools_.total_remaining();
    if (sc.algorithm == Algorithm::FixedQueue) {
      return fixed_queue_decision({scheduler_.queued(), static_cast<int>(pools_.active_count()),
                                   static_cast<int>(pools_.pending_count()), idle, remaining},
                                  sc.queue_threshold);
    }
    DeadlineInput in;
    in.now = kernel_.now();
    in.deadline = submit_time_ + *config_.application.deadline;
    in.queued = scheduler_.queued();
    in.est = scheduler_.estimated_task_time(sc.est_task_time);
    in.overhead = sc.provision_overhead;
    for (const auto& [node, busy] : scheduler_.busy_remaining()) in.active_busy.push_back(busy);
    for (NodeId id : live_workers()) {
      const NodeRecord& n = nodes_.at(id);
      if (scheduler_.is_ready(id) || n.daemon_state == DaemonState::Unreachable) continue;
      const SimTime usable = n.provisioned_at + sc.provision_overhead;
      in.pending_ready.push_back(usable > in.now ? usable - in.now : SimTime::zero());
    }
    in.idle_past_grace = idle;
    in.remaining_capacity = remaining;
    return deadline_decision(in);
  }

  void shutdown() {
    shutting_down_ = true;
    for (auto id : fault_events_) kernel_.cancel(id);
    if (eval_event_) kernel_.cancel(*eval_event_);
    for (NodeId id : live_workers()) {
      NodeRecord& n = nodes_.at(id);
      if (n.vm_state != VmState::Running) continue;  // released once ready
      deployer_.forget(id);
      if (n.daemon_state == DaemonState::ContainerRunning) deployer_.control(id, ControlAction::Stop);
      pools_.release(id);
    }
    kernel_.run_until();
  }

  RunOutcome outcome() {
    RunOutcome out;
    out.trace = kernel_.trace();
    if (submitted_) out.status = scheduler_.status(app_.app_id);
    out.terminated = finished_;

    auto& row = out.row;
    row.tasks = config_.application.tasks;
    for (const auto& e : out.trace) {
      if (e.kind != EventKind::VmAccepted) continue;
      (e.payload.get("provider") == to_string(ProviderKind::AzureSim) ? row.azure_workers : row.ec2_workers)++;
    }
    row.total_workers = row.azure_workers + row.ec2_workers;
    if (submitted_) {
      if (auto f = scheduler_.finished_at(app_.app_id)) row.makespan = *f - submit_time_;
    }
    const Report report = build_report(out.trace);
    row.cost = report.total_cost;
    row.trace_hash = report.trace_hash;

    if (options_.check_invariants) {
      out.capacity_violations = capacity_violations_;
      check_conservation(out);
    }
    return out;
  }

  void check_conservation(RunOutcome& out) const {
    std::map<std::uint64_t, int> done;
    for (const auto& e : out.trace)
      if (e.kind == EventKind::TaskComplete) ++done[e.payload.get_task("task").value];
    std::ostringstream why;
    for (const auto& [task, n] : done)
      if (n > 1) why << "task " << task << " completed " << n << " times; ";
    if (out.status == AppStatus::Completed) {
      if (static_cast<int>(done.size()) != config_.application.tasks)
        why << "completed app has " << done.size() << " distinct completions; ";
    } else if (out.status != AppStatus::Failed) {
      why << "app neither completed nor failed; ";
    }
    for (const auto& t : scheduler_.application(app_.app_id).tasks)
      if (t.attempts > config_.application.max_retries + 1) why << "task " << t.task_id.value << " over-attempted; ";
    out.detail = why.str();
    out.conservation_ok = out.detail.empty();
  }

  const ExperimentConfig& config_;
  RunOptions options_;
  Kernel kernel_;
  NodeRegistry nodes_;
  PublicIpAllocator ips_;
  NodeId master_;
  PoolManager pools_;
  Deployer deployer_;
  Scheduler scheduler_;

  Application app_;
  bool submitted_ = false;
  bool finished_ = false;
  bool shutting_down_ = false;
  SimTime submit_time_;
  int unsettled_ = 0;
  std::vector<std::uint64_t> fault_events_;
  std::optional<std::uint64_t> eval_event_;
  int capacity_violations_ = 0;
};

}  // namespace

RunOutcome simulate(const ExperimentConfig& config, std::uint64_t seed, const RunOptions& options) {
  validate(config);
  Experiment ex(config, seed, options);
  return ex.execute();
}

RunOutcome run(const ExperimentConfig& config, std::uint64_t seed) {
  auto out = simulate(config, seed);
  if (out.status == AppStatus::Failed) throw Error(ErrorCode::AppFailed, config.application.app_id + " failed");
  if (!out.terminated)
    throw Error(ErrorCode::NonTermination, config.application.app_id + " did not finish before the horizon");
  return out;
}

std::vector<WorkerSplit> parse_plan(std::string_view text) {
  std::vector<WorkerSplit> out;
  std::size_t i = 0;
  auto fail = [&](const std::string& why) -> void {
    throw Error(ErrorCode::ParseError, "plan at offset " + std::to_string(i) + ": " + why);
  };
  auto skip_ws = [&] {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
  };
  auto number = [&] {
    skip_ws();
    const std::size_t start = i;
    int v = 0;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
      v = v * 10 + (text[i] - '0');
      if (v > 1'000'000) fail("worker count too large");
      ++i;
    }
    if (i == start) fail("expected a worker count");
    skip_ws();
    return v;
  };
  auto expect = [&](char c) {
    skip_ws();
    if (i >= text.size() || text[i] != c) fail(std::string("expected '") + c + "'");
    ++i;
  };
  skip_ws();
  while (i < text.size()) {
    expect('(');
    WorkerSplit w;
    w.azure = number();
    expect(',');
    w.ec2 = number();
    expect(')');
    out.push_back(w);
    skip_ws();
    if (i < text.size()) {
      expect(',');
      skip_ws();
      if (i >= text.size()) fail("trailing ','");
    }
  }
  if (out.empty()) fail("empty plan");
  return out;
}

ExperimentConfig with_allocation(const ExperimentConfig& config, WorkerSplit split) {
  ExperimentConfig c = config;
  c.mode = CloudMode::Static;
  c.static_allocation.clear();
  auto fill = [&](ProviderKind kind, int wanted, const char* label) {
    for (const auto& p : c.pools) {
      if (p.provider != kind || wanted == 0) continue;
      const int n = std::min(wanted, p.capacity);
      if (n > 0) c.static_allocation.emplace_back(p.pool_id, n);
      wanted -= n;
    }
    if (wanted > 0) throw Error(ErrorCode::ValidationError, std::string(label) + " workers exceed pool capacity");
  };
  fill(ProviderKind::AzureSim, split.azure, "azure");
  fill(ProviderKind::Ec2Sim, split.ec2, "ec2");
  if (c.static_allocation.empty()) throw Error(ErrorCode::ValidationError, "plan entry with zero workers");
  return c;
}

std::vector<ResultRow> sweep(const ExperimentConfig& config, const std::vector<WorkerSplit>& plan) {
  std::vector<ResultRow> rows;
  rows.reserve(plan.size());
  for (const auto& split : plan) rows.push_back(run(with_allocation(config, split), config.seed).row);
  return rows;
}

}  // namespace mcloud
