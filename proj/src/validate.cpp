#include "mcloud/validate.hpp"

#include <algorithm>
#include <set>

#include "mcloud/provider_sim.hpp"
#include "mcloud/wire.hpp"

namespace mcloud {

namespace {

constexpr std::size_t kMaxNotes = 5;

void note(SuiteResult& r, std::string what) {
  ++r.failures;
  if (r.notes.size() < kMaxNotes) r.notes.push_back(std::move(what));
}

class Dice {
 public:
  explicit Dice(std::uint64_t seed) : rng_(seed) {}
  int between(int lo, int hi) { return lo + static_cast<int>(rng_.next() % static_cast<std::uint64_t>(hi - lo + 1)); }
  SimTime millis(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return SimTime::micros((lo + static_cast<std::int64_t>(rng_.next() % span)) * 1000);
  }
  bool coin() { return rng_.next() & 1; }
  std::uint64_t next() { return rng_.next(); }

 private:
  SplitMix64 rng_;
};

class UnboundedPriorityStrategy final : public ProvisionStrategy {
 public:
  std::string_view name() const override { return "unbounded-priority"; }
  std::optional<std::string> select(std::span<const PoolState> pools) const override {
    const PoolState* best = nullptr;
    for (const auto& p : pools)
      if (!best || p.config.priority > best->config.priority) best = &p;
    if (!best) return std::nullopt;
    return best->config.pool_id;
  }
};

std::string case_label(const char* kind, int i) { return std::string(kind) + " #" + std::to_string(i); }

}  // namespace

void register_capacity_bug_fixture() {
  StrategyRegistry::global().add("unbounded-priority", [] { return std::make_unique<UnboundedPriorityStrategy>(); });
}

PoolConfig fixture_pool(const std::string& id, ProviderKind provider, int capacity, int priority,
                        double price_per_hour) {
  PoolConfig p;
  p.pool_id = id;
  p.provider = provider;
  p.capacity = capacity;
  p.priority = priority;
  p.price_per_hour = price_per_hour;
  if (provider == ProviderKind::AzureSim)
    p.credentials = AzureCredentials{"sub-" + id, "cert-" + id};
  else
    p.credentials = Ec2Credentials{"AKIA" + id, "secret-" + id};
  return p;
}

std::optional<int> oracle_min_workers(int tasks, SimTime est, SimTime overhead, SimTime deadline, int max_workers) {
  for (int w = 1; w <= max_workers; ++w) {
    std::vector<SimTime> free_at(w, overhead);
    SimTime done = overhead;
    for (int t = 0; t < tasks; ++t) {
      auto it = std::min_element(free_at.begin(), free_at.end());
      *it = *it + est;
      done = std::max(done, *it);
    }
    if (done <= deadline) return w;
  }
  return std::nullopt;
}

std::vector<std::string> suite_names() { return {"capacity", "protocol", "makespan", "deadline"}; }

std::vector<SuiteResult> run_validation(const ValidateOptions& options) {
  const auto names = suite_names();
  if (options.suite && std::find(names.begin(), names.end(), *options.suite) == names.end())
    throw Error(ErrorCode::ValidationError, "unknown suite '" + *options.suite + "'");
  std::vector<SuiteResult> out;
  for (const auto& name : names) {
    if (options.suite && *options.suite != name) continue;
    if (name == "capacity") out.push_back(capacity_suite(options));
    if (name == "protocol") out.push_back(protocol_suite(options));
    if (name == "makespan") out.push_back(makespan_suite(options));
    if (name == "deadline") out.push_back(deadline_suite(options));
  }
  return out;
}

SuiteResult capacity_suite(const ValidateOptions& options) {
  SuiteResult r{"capacity", 0, 0, {}};
  Dice dice(options.seed ^ 0xca9ac17eULL);
  for (int i = 0; i < options.capacity_traces; ++i) {
    ExperimentConfig c;
    c.mode = CloudMode::Dynamic;
    c.seed = dice.next();
    c.strategy = options.capacity_strategy;
    const int pools = dice.between(2, 3);
    for (int p = 0; p < pools; ++p) {
      auto pool = fixture_pool("p" + std::to_string(p), dice.coin() ? ProviderKind::AzureSim : ProviderKind::Ec2Sim,
                               dice.between(1, 4), dice.between(0, 3), 0.05 * dice.between(1, 4));
      pool.boot_latency = dice.millis(0, 60'000);
      pool.boot_jitter = dice.millis(0, 20'000);
      pool.install_latency = dice.millis(0, 30'000);
      c.pools.push_back(pool);
    }
    auto& a = c.application;
    a.tasks = dice.between(5, 40);
    a.task_duration = dice.millis(5'000, 30'000);
    a.task_jitter = SimTime::micros(a.task_duration.count() / 5);
    a.max_retries = dice.between(0, 3);
    SchedulerConfig sc;
    sc.algorithm = dice.coin() ? Algorithm::FixedQueue : Algorithm::DeadlinePriority;
    sc.queue_threshold = dice.between(1, 4);
    sc.est_task_time = a.task_duration;
    sc.provision_overhead = dice.millis(0, 90'000);
    sc.eval_period = dice.millis(10'000, 60'000);
    sc.idle_release = dice.millis(0, 60'000);
    c.scheduler = sc;
    if (sc.algorithm == Algorithm::DeadlinePriority)
      a.deadline = SimTime::micros(a.task_duration.count() * dice.between(1, a.tasks));
    c.faults.count = dice.between(0, 6);
    c.faults.window = SimTime::micros(a.task_duration.count() * a.tasks / 2);

    ++r.cases;
    try {
      const auto out = simulate(c, c.seed, {.strategy = std::nullopt, .check_invariants = true});
      if (out.capacity_violations > 0)
        note(r, case_label("trace", i) + ": capacity exceeded at " + std::to_string(out.capacity_violations) +
                    " timestamps");
      else if (!out.terminated)
        note(r, case_label("trace", i) + ": application did not terminate");
      else if (!out.conservation_ok)
        note(r, case_label("trace", i) + ": " + out.detail);
    } catch (const Error& e) {
      note(r, case_label("trace", i) + ": " + e.what());
    }
  }
  return r;
}

SuiteResult protocol_suite(const ValidateOptions& options) {
  using wire::Body;
  using wire::Request;
  using wire::Verb;
  SuiteResult r{"protocol", 0, 0, {}};
  const AzureCredentials creds{"sub-1", "cert-1"};
  auto auth = [&](Body b) {
    b["subscription_id"] = creds.subscription_id;
    b["certificate_token"] = creds.certificate_token;
    return b;
  };

  // Golden behaviours.
  {
    ++r.cases;
    Kernel k(options.seed);
    PublicIpAllocator ips;
    AzureBackend az(k, "golden", creds, {}, ips);
    az.handle({Verb::Post, "/services", auth({{"name", "svc"}, {"region", "west"}})});
    const auto res = az.handle({Verb::Post, "/services/svc/vms", auth({{"storage", "missing"}, {"template", "small"}})});
    if (res.status != wire::Status::Error || res.code != wire::codes::kStorageNotFound)
      note(r, "VM create without storage did not return STORAGE_NOT_FOUND");
  }
  {
    ++r.cases;
    Kernel k(options.seed);
    PublicIpAllocator ips;
    AzureBackend az(k, "golden", creds, {}, ips);
    az.handle({Verb::Post, "/storages", auth({{"name", "st"}})});
    const auto svc = az.handle({Verb::Post, "/services", auth({{"name", "svc"}, {"region", "west"}})});
    std::set<std::string> publics, privates;
    for (int i = 0; i < 3; ++i) {
      const auto vm = az.handle({Verb::Post, "/services/svc/vms", auth({{"storage", "st"}, {"template", "small"}})});
      publics.insert(vm.body.at("public_ip"));
      privates.insert(vm.body.at("private_ip"));
    }
    if (publics.size() != 1 || *publics.begin() != svc.body.at("public_ip") || privates.size() != 3)
      note(r, "VMs of one cloud service do not share its public IP");
  }

  // Referential-integrity fuzz.
  Dice dice(options.seed ^ 0x9a7ec01ULL);
  const char* storages[] = {"st-a", "st-b", "st-c"};
  const char* services[] = {"svc-a", "svc-b", "svc-c"};
  for (int seq = 0; seq < options.protocol_sequences; ++seq) {
    ++r.cases;
    Kernel k(dice.next());
    PublicIpAllocator ips;
    AzureBackend az(k, "fuzz", creds, {SimTime::seconds(1), SimTime::zero()}, ips);
    k.on(EventKind::VmReady, [&](const SimEvent& e) { az.on_vm_ready(e.payload.get("vm")); });
    std::vector<std::string> vms;
    const int steps = dice.between(5, 40);
    bool ok = true;
    for (int s = 0; s < steps && ok; ++s) {
      const std::string st = storages[dice.between(0, 2)];
      const std::string svc = services[dice.between(0, 2)];
      const std::string vm = vms.empty() || dice.between(0, 4) == 0 ? "vm-999" : vms[dice.next() % vms.size()];
      wire::Response res;
      switch (dice.between(0, 9)) {
        case 0: res = az.handle({Verb::Post, "/storages", auth({{"name", st}})}); break;
        case 1: res = az.handle({Verb::Post, "/services", auth({{"name", svc}, {"region", "r"}})}); break;
        case 2:
        case 3:
          res = az.handle({Verb::Post, "/services/" + svc + "/vms", auth({{"storage", st}, {"template", "small"}})});
          if (res.status == wire::Status::Ok) vms.push_back(res.body.at("vm_id"));
          break;
        case 4: res = az.handle({Verb::Delete, "/storages/" + st, auth({})}); break;
        case 5: res = az.handle({Verb::Delete, "/services/" + svc, auth({})}); break;
        case 6: res = az.handle({Verb::Delete, "/vms/" + vm, auth({})}); break;
        case 7: res = az.handle({Verb::Get, "/vms/" + vm, auth({})}); break;
        case 8: {
          const auto reply = az.handle_bytes("POST /storages\nname=" + st + "\nb=unsorted\n\n");
          if (wire::decode_response(reply).code != wire::codes::kMalformedDoc) ok = false;
          break;
        }
        default: k.run_until(k.now() + SimTime::seconds(dice.between(0, 2))); break;
      }
      if (res.status == wire::Status::Error && res.code.empty()) ok = false;
      if (!az.integrity_ok()) ok = false;
    }
    if (!ok) note(r, case_label("sequence", seq) + " corrupted the resource graph");
  }
  return r;
}

SuiteResult makespan_suite(const ValidateOptions& options) {
  SuiteResult r{"makespan", 0, 0, {}};
  const SimTime t = SimTime::micros(11'912'500);
  ExperimentConfig base;
  base.seed = options.seed;
  base.pools.push_back(fixture_pool("azure", ProviderKind::AzureSim, options.makespan_max_workers));
  base.application.task_duration = t;
  for (int n = 1; n <= options.makespan_max_tasks; ++n) {
    for (int w = 1; w <= options.makespan_max_workers; ++w) {
      ++r.cases;
      ExperimentConfig c = base;
      c.application.tasks = n;
      c.static_allocation = {{"azure", w}};
      const SimTime expected = t * ((n + w - 1) / w);
      try {
        const auto out = run(c, c.seed);
        if (out.row.makespan != expected)
          note(r, "N=" + std::to_string(n) + " w=" + std::to_string(w) + ": makespan " +
                      format_seconds(out.row.makespan) + " != " + format_seconds(expected));
      } catch (const Error& e) {
        note(r, "N=" + std::to_string(n) + " w=" + std::to_string(w) + ": " + e.what());
      }
    }
  }
  return r;
}

SuiteResult deadline_suite(const ValidateOptions& options) {
  SuiteResult r{"deadline", 0, 0, {}};
  Dice dice(options.seed ^ 0xdead1111eULL);
  int attempts = 0;
  while (r.cases < options.deadline_instances && attempts < options.deadline_instances * 50) {
    ++attempts;
    const int tasks = dice.between(1, 40);
    const SimTime est = dice.millis(5'000, 20'000);
    const SimTime overhead = dice.millis(0, 120'000);
    const int capacity = dice.between(1, 8);
    const SimTime deadline =
        dice.millis((overhead + est).count() / 1000, (overhead + est * tasks).count() / 1000);
    const auto needed = oracle_min_workers(tasks, est, overhead, deadline, capacity);
    if (!needed) continue;

    ExperimentConfig c;
    c.mode = CloudMode::Dynamic;
    c.seed = dice.next();
    const int azure = dice.between(0, capacity);
    auto a = fixture_pool("azure", ProviderKind::AzureSim, azure, dice.between(0, 2), 0.12);
    auto e = fixture_pool("ec2", ProviderKind::Ec2Sim, capacity - azure, dice.between(0, 2), 0.10);
    for (auto* p : {&a, &e}) {
      p->boot_latency = SimTime::micros(overhead.count() / 2);
      p->install_latency = overhead - p->boot_latency;
    }
    c.pools = {a, e};
    c.application.tasks = tasks;
    c.application.task_duration = est;
    c.application.deadline = deadline;
    SchedulerConfig sc;
    sc.algorithm = Algorithm::DeadlinePriority;
    sc.est_task_time = est;
    sc.provision_overhead = overhead;
    c.scheduler = sc;

    ++r.cases;
    const std::string label = "N=" + std::to_string(tasks) + " est=" + format_seconds(est) +
                              " overhead=" + format_seconds(overhead) + " deadline=" + format_seconds(deadline) +
                              " capacity=" + std::to_string(capacity);
    try {
      const auto out = run(c, c.seed);
      if (out.row.makespan > deadline)
        note(r, label + ": makespan " + format_seconds(out.row.makespan) + " misses the deadline (oracle " +
                    std::to_string(*needed) + " workers)");
    } catch (const Error& ex) {
      note(r, label + ": " + ex.what());
    }
  }
  return r;
}

}  // namespace mcloud
