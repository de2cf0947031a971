#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "mcloud/experiment.hpp"
#include "mcloud/provider_sim.hpp"
#include "mcloud/telemetry.hpp"
#include "mcloud/validate.hpp"

using namespace mcloud;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string suite_detail(const SuiteResult& r) {
  std::string s = std::to_string(r.cases) + " cases, " + std::to_string(r.failures) + " failures";
  if (!r.notes.empty()) s += "; " + r.notes.front();
  return s;
}

SuiteResult suite(const std::string& name, std::function<void(ValidateOptions&)> tweak = {}) {
  ValidateOptions o;
  o.suite = name;
  if (tweak) tweak(o);
  return run_validation(o).at(0);
}

// 1. Sweep trend and the exact makespan law.
Verdict sweep_law() {
  Verdict v;
  const auto start = Clock::now();
  const auto cfg = load_config(MCLOUD_CONFIG_DIR "/calibration_80.ini");
  const auto rows = sweep(cfg, parse_plan("(1,0),(2,0),(3,0),(3,1),(3,2),(3,3)"));
  const std::int64_t task = 11'912'500;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int w = rows[i].total_workers;
    const std::int64_t expected = (80 + w - 1) / w * task;
    v.require(rows[i].makespan.count() == expected,
              std::to_string(w) + " workers: " + format_seconds(rows[i].makespan) + " s");
    if (i > 0) v.require(rows[i].makespan < rows[i - 1].makespan, "makespans not strictly decreasing");
  }
  v.require(rows.front().makespan == SimTime::seconds(953), "1 worker is not 953.0 s");
  v.require(rows.back().makespan == SimTime::micros(166'775'000), "6 workers is not 166.775 s");
  const auto big = run(load_config(MCLOUD_CONFIG_DIR "/calibration_160.ini"), 42).row;
  v.require(big.makespan == SimTime::seconds(2048), "160 tasks on 1 worker is " + format_seconds(big.makespan));
  const double took = seconds_since(start);
  v.require(took < 5.0, "runtime " + std::to_string(took) + " s");
  if (v.ok)
    v.detail = "953.0 > ... > " + format_seconds(rows.back().makespan) + " s, 160 tasks 2048.0 s, " +
               std::to_string(took).substr(0, 5) + " s";
  return v;
}

std::vector<std::tuple<std::int64_t, std::string, std::string>> task_timeline(const Trace& trace) {
  std::vector<std::tuple<std::int64_t, std::string, std::string>> out;
  for (const auto& e : trace)
    if (e.kind == EventKind::TaskDispatched || e.kind == EventKind::TaskComplete)
      out.emplace_back(e.time.count(), std::string(to_string(e.kind)), e.payload.get("task"));
  std::sort(out.begin(), out.end());
  return out;
}

// 2. Provider mix does not matter at equal worker counts and latencies.
Verdict provider_indifference() {
  Verdict v;
  auto cfg = load_config(MCLOUD_CONFIG_DIR "/calibration_80.ini");
  for (auto& p : cfg.pools) p.capacity = 6;
  for (const auto latency : {SimTime::zero(), SimTime::seconds(45)}) {
    auto c = cfg;
    for (auto& p : c.pools) {
      p.boot_latency = latency;
      p.install_latency = SimTime::micros(latency.count() / 3);
    }
    const auto mixed = simulate(with_allocation(c, {3, 3}), c.seed);
    const auto azure = simulate(with_allocation(c, {6, 0}), c.seed);
    const auto ec2 = simulate(with_allocation(c, {0, 6}), c.seed);
    const std::string tag = " (boot " + format_seconds(latency) + " s)";
    v.require(mixed.status == AppStatus::Completed && azure.status == AppStatus::Completed, "run incomplete" + tag);
    v.require(mixed.row.makespan == azure.row.makespan && azure.row.makespan == ec2.row.makespan,
              "makespans differ" + tag);
    v.require(task_timeline(mixed.trace) == task_timeline(azure.trace) &&
                  task_timeline(azure.trace) == task_timeline(ec2.trace),
              "task timelines differ" + tag);
  }
  if (v.ok) v.detail = "3+3, 6+0 and 0+6 identical at 0 s and 45 s boot";
  return v;
}

// 3. Deadline runs meet the deadline whenever the oracle says it is feasible.
Verdict deadline_equivalence() {
  Verdict v;
  const auto start = Clock::now();
  const auto r = suite("deadline");
  const double took = seconds_since(start);
  v.require(r.passed() && r.cases >= 100, suite_detail(r));
  v.require(took < 30.0, "runtime " + std::to_string(took) + " s");
  if (v.ok) v.detail = suite_detail(r) + ", " + std::to_string(took).substr(0, 5) + " s";
  return v;
}

std::vector<std::string> session_documents(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<std::string> docs;
  std::string current, line;
  while (std::getline(in, line)) {
    current += line + '\n';
    if (line.empty()) {
      docs.push_back(current);
      current.clear();
    }
  }
  return docs;
}

// 4. Wire protocol: golden sessions, golden behaviours and integrity fuzz.
Verdict protocol() {
  Verdict v;
  Kernel k;
  PublicIpAllocator ips;
  AzureBackend az(k, "golden", {"sub-1", "cert-1"}, {}, ips);
  const auto docs = session_documents(MCLOUD_GOLDEN_DIR "/wire/azure_session.txt");
  v.require(!docs.empty() && docs.size() % 2 == 0, "golden session unreadable");
  for (std::size_t i = 0; i + 1 < docs.size(); i += 2)
    v.require(az.handle_bytes(docs[i]) == docs[i + 1], "golden exchange " + std::to_string(i / 2 + 1) + " differs");
  const auto r = suite("protocol");
  v.require(r.passed() && r.cases >= 1000, suite_detail(r));
  if (v.ok) v.detail = std::to_string(docs.size() / 2) + " golden exchanges, " + suite_detail(r);
  return v;
}

// 5. Capacity and task conservation under injected failures.
Verdict capacity() {
  Verdict v;
  const auto r = suite("capacity");
  v.require(r.passed() && r.cases == 500, suite_detail(r));
  if (v.ok) v.detail = suite_detail(r);
  return v;
}

// 6. Same seed, same trace hash and CSV bytes.
Verdict determinism() {
  Verdict v;
  int checked = 0;
  for (const char* name : {"calibration_80.ini", "dynamic_queue.ini", "dynamic_deadline.ini"}) {
    const auto cfg = load_config(std::string(MCLOUD_CONFIG_DIR "/") + name);
    auto render = [&] {
      const auto out = simulate(cfg, cfg.seed);
      std::ostringstream csv, trace;
      write_csv(csv, {out.row});
      export_trace(trace, out.trace);
      return std::make_tuple(out.row.trace_hash, csv.str(), trace.str());
    };
    const auto a = render();
    const auto b = render();
    v.require(std::get<0>(a) == std::get<0>(b), std::string(name) + ": trace hash differs");
    v.require(std::get<1>(a) == std::get<1>(b), std::string(name) + ": CSV differs");
    v.require(std::get<2>(a) == std::get<2>(b), std::string(name) + ": trace differs");
    ++checked;
  }
  const auto cfg = load_config(MCLOUD_CONFIG_DIR "/calibration_80.ini");
  const auto plan = parse_plan("(1,0),(2,0),(3,0),(3,1),(3,2),(3,3)");
  std::ostringstream s1, s2;
  write_csv(s1, sweep(cfg, plan));
  write_csv(s2, sweep(cfg, plan));
  v.require(s1.str() == s2.str(), "sweep CSV differs");
  if (v.ok) v.detail = std::to_string(checked) + " configs and one sweep rerun byte-identical";
  return v;
}

// 7. Ceil-quantized billing over random and boundary uptimes.
Verdict billing() {
  Verdict v;
  const std::int64_t hour = 3'600'000'000;
  SplitMix64 rng(7);
  std::vector<std::int64_t> uptimes;
  for (std::int64_t k = 0; k <= 48; ++k) {
    uptimes.push_back(k * hour);
    uptimes.push_back(k * hour + 1'000'000);
    uptimes.push_back(k * hour + 1);
  }
  for (int i = 0; i < 20000; ++i) uptimes.push_back(static_cast<std::int64_t>(rng.next() % (200 * hour)));
  int cases = 0;
  for (const auto u : uptimes) {
    const double price = static_cast<double>(rng.next() % 1000) / 100.0;
    const std::int64_t expected = u <= 0 ? 0 : (u + hour - 1) / hour;
    const auto q = billing_quanta(SimTime::micros(u), SimTime::micros(hour));
    const double cost = billing_cost(SimTime::micros(u), price, SimTime::micros(hour));
    v.require(q == expected, "uptime " + std::to_string(u) + " us: " + std::to_string(q) + " quanta");
    v.require(std::abs(cost - static_cast<double>(expected) * price) < 1e-9, "cost mismatch");
    if (u % hour == 0 && u > 0) v.require(q == u / hour, "boundary k*3600 billed extra");
    if (u % hour == 1'000'000 && u > hour) v.require(q == u / hour + 1, "k*3600+1 not billed the next hour");
    NodeRecord n;
    n.provisioned_at = SimTime::seconds(10);
    n.released_at = SimTime::seconds(10) + SimTime::micros(u);
    v.require(bill(n, price, SimTime::micros(hour)).quanta == expected, "bill() disagrees");
    ++cases;
  }
  v.require(billing_cost(SimTime::seconds(3600), 0.09, SimTime::seconds(3600)) == 0.09, "3600 s at 0.09");
  v.require(std::abs(billing_cost(SimTime::seconds(3601), 0.09, SimTime::seconds(3600)) - 0.18) < 1e-12,
            "3601 s at 0.09");
  if (v.ok) v.detail = std::to_string(cases) + " uptimes";
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"sweep trend and makespan law", sweep_law},
      {"multi-provider indifference", provider_indifference},
      {"deadline oracle equivalence", deadline_equivalence},
      {"azure protocol conformance", protocol},
      {"capacity and conservation safety", capacity},
      {"determinism", determinism},
      {"billing quantization", billing},
  };
  int failed = 0;
  int index = 0;
  for (const auto& [name, check] : criteria) {
    ++index;
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.ok;
    std::cout << (v.ok ? "PASS" : "FAIL") << " " << index << " " << name << ": " << v.detail << "\n";
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << (criteria.size() - failed) << "/" << criteria.size() << "\n";
  return failed ? 1 : 0;
}
