#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <queue>

#include "mcloud/experiment.hpp"
#include "mcloud/scheduler.hpp"
#include "mcloud/validate.hpp"

using namespace mcloud;

namespace {

// Event-by-event list schedule: each task goes to the earliest free worker.
std::int64_t brute_makespan(int tasks, std::int64_t task_us, int workers, std::int64_t start_us = 0) {
  std::priority_queue<std::int64_t, std::vector<std::int64_t>, std::greater<>> free_at;
  for (int i = 0; i < workers; ++i) free_at.push(start_us);
  std::int64_t done = start_us;
  for (int i = 0; i < tasks; ++i) {
    const auto t = free_at.top() + task_us;
    free_at.pop();
    free_at.push(t);
    done = std::max(done, t);
  }
  return done;
}

std::optional<int> brute_min_workers(int tasks, std::int64_t est, std::int64_t overhead, std::int64_t deadline,
                                     int max_workers) {
  for (int w = 1; w <= max_workers; ++w)
    if (brute_makespan(tasks, est, w, overhead) <= deadline) return w;
  return std::nullopt;
}

ExperimentConfig static_config(int tasks, SimTime duration, int azure_cap, int ec2_cap) {
  ExperimentConfig c;
  c.mode = CloudMode::Static;
  c.pools.push_back(fixture_pool("az", ProviderKind::AzureSim, azure_cap, 2, 0.12));
  c.pools.push_back(fixture_pool("ec2", ProviderKind::Ec2Sim, ec2_cap, 1, 0.10));
  c.application.tasks = tasks;
  c.application.task_duration = duration;
  return c;
}

}  // namespace

TEST_CASE("list schedule oracle reproduces the closed-form examples") {
  CHECK(brute_makespan(80, 11'912'500, 1) == 953'000'000);
  CHECK(brute_makespan(80, 11'912'500, 6) == 166'775'000);
  CHECK(brute_makespan(160, 12'800'000, 1) == 2'048'000'000);
  CHECK(brute_makespan(80, 12'000'000, 7, 60'000'000) == 204'000'000);
  CHECK(brute_makespan(80, 12'000'000, 8, 60'000'000) == 180'000'000);
}

TEST_CASE("simulated static makespan equals the brute-force list schedule") {
  SplitMix64 rng(5);
  for (int round = 0; round < 60; ++round) {
    const int tasks = 1 + static_cast<int>(rng.next() % 120);
    const auto dur = SimTime::micros(1 + static_cast<std::int64_t>(rng.next() % 30'000'000));
    const int az = static_cast<int>(rng.next() % 5);
    const int ec = static_cast<int>(rng.next() % 5) + (az == 0 ? 1 : 0);
    const auto rows = sweep(static_config(tasks, dur, 4, 5), {{az, ec}});
    CAPTURE(tasks);
    CAPTURE(az);
    CAPTURE(ec);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].makespan.count() == brute_makespan(tasks, dur.count(), az + ec));
    CHECK(rows[0].total_workers == az + ec);
  }
}

TEST_CASE("provider mix does not change the makespan") {
  const auto cfg = static_config(80, SimTime::micros(11'912'500), 6, 6);
  const auto mixed = sweep(cfg, {{3, 3}, {6, 0}, {0, 6}, {2, 4}});
  for (const auto& r : mixed) CHECK(r.makespan == mixed[0].makespan);
}

TEST_CASE("oracle_min_workers agrees with the brute force") {
  SplitMix64 rng(17);
  for (int round = 0; round < 300; ++round) {
    const int tasks = 1 + static_cast<int>(rng.next() % 100);
    const std::int64_t est = 1'000'000 + static_cast<std::int64_t>(rng.next() % 20'000'000);
    const std::int64_t overhead = static_cast<std::int64_t>(rng.next() % 120'000'000);
    const std::int64_t deadline = overhead + static_cast<std::int64_t>(rng.next() % 600'000'000);
    const int max_w = 1 + static_cast<int>(rng.next() % 12);
    REQUIRE(oracle_min_workers(tasks, SimTime::micros(est), SimTime::micros(overhead), SimTime::micros(deadline),
                               max_w) == brute_min_workers(tasks, est, overhead, deadline, max_w));
  }
}

TEST_CASE("deadline_decision picks the brute-force minimum from a cold start") {
  SplitMix64 rng(23);
  for (int round = 0; round < 300; ++round) {
    DeadlineInput in;
    in.queued = 1 + static_cast<int>(rng.next() % 100);
    in.est = SimTime::micros(1'000'000 + static_cast<std::int64_t>(rng.next() % 20'000'000));
    in.overhead = SimTime::micros(static_cast<std::int64_t>(rng.next() % 120'000'000));
    in.deadline = in.overhead + SimTime::micros(1 + static_cast<std::int64_t>(rng.next() % 600'000'000));
    in.remaining_capacity = 1 + static_cast<int>(rng.next() % 12);
    const auto expected = brute_min_workers(in.queued, in.est.count(), in.overhead.count(), in.deadline.count(),
                                            in.remaining_capacity);
    const auto d = deadline_decision(in);
    CAPTURE(round);
    REQUIRE(d.kind == Decision::Kind::Provision);
    CHECK(d.count == expected.value_or(in.remaining_capacity));
    const int fluid = deadline_fluid_bound(in.now, in.deadline, in.queued, SimTime::zero(), in.est, in.overhead);
    if (expected) CHECK(fluid <= *expected);
  }
}
