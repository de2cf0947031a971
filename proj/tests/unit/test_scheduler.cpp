#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mcloud/scheduler.hpp"

using namespace mcloud;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::ParseError;
}

Application uniform(std::string id, int n, SimTime d, int retries = 0) {
  return make_application(std::move(id), std::vector<SimTime>(static_cast<std::size_t>(n), d), std::nullopt, retries);
}

int count(const std::vector<SimEvent>& trace, EventKind kind) {
  int n = 0;
  for (const auto& e : trace) n += e.kind == kind;
  return n;
}

DeadlineInput example() {
  DeadlineInput in;
  in.now = SimTime::zero();
  in.deadline = SimTime::seconds(200);
  in.queued = 80;
  in.est = SimTime::seconds(12);
  in.overhead = SimTime::seconds(60);
  in.remaining_capacity = 10;
  return in;
}

}  // namespace

TEST_CASE("configuration validation") {
  SchedulerConfig c;
  c.est_task_time = SimTime::seconds(10);
  CHECK_NOTHROW(validate(c));
  c.queue_threshold = 0;
  CHECK(code_of([&] { validate(c); }) == ErrorCode::ValidationError);
  c.queue_threshold = 1;
  c.eval_period = SimTime::zero();
  CHECK(code_of([&] { validate(c); }) == ErrorCode::ValidationError);
}

TEST_CASE("fixed queue decision") {
  CHECK(fixed_queue_decision({.queued = 25, .active = 1, .pending = 0, .idle_past_grace = 0, .remaining_capacity = 9},
                             10) == Decision::provision(2));
  CHECK(fixed_queue_decision({.queued = 25, .active = 1, .pending = 0, .idle_past_grace = 0, .remaining_capacity = 1},
                             10) == Decision::provision(1));
  CHECK(fixed_queue_decision({.queued = 25, .active = 2, .pending = 1, .idle_past_grace = 0, .remaining_capacity = 5},
                             10) == Decision::noop());
  CHECK(fixed_queue_decision({.queued = 5, .active = 4, .pending = 0, .idle_past_grace = 2, .remaining_capacity = 5},
                             10) == Decision::release(2));
  CHECK(fixed_queue_decision({.queued = 0, .active = 3, .pending = 0, .idle_past_grace = 3, .remaining_capacity = 0},
                             10) == Decision::release(3));
}

TEST_CASE("deadline decision: discrete answer 8 exceeds the fluid bound 7") {
  const auto in = example();
  CHECK(deadline_fluid_bound(in.now, in.deadline, in.queued, SimTime::zero(), in.est, in.overhead) == 7);
  CHECK(estimated_completion(in, 7) == SimTime::seconds(204));
  CHECK(estimated_completion(in, 8) == SimTime::seconds(180));
  CHECK(deadline_decision(in) == Decision::provision(8));
}

TEST_CASE("deadline decision edge cases") {
  SUBCASE("nothing queued releases idle workers") {
    auto in = example();
    in.queued = 0;
    in.idle_past_grace = 2;
    CHECK(deadline_decision(in) == Decision::release(2));
  }
  SUBCASE("current workers already meet the deadline") {
    auto in = example();
    in.active_busy.assign(10, SimTime::zero());
    CHECK(estimated_completion(in, 0) == SimTime::seconds(96));
    CHECK(deadline_decision(in) == Decision::noop());
  }
  SUBCASE("pending workers count toward the estimate") {
    auto in = example();
    in.pending_ready.assign(4, SimTime::seconds(60));
    CHECK(deadline_decision(in) == Decision::provision(4));
  }
  SUBCASE("unreachable deadline provisions everything left") {
    auto in = example();
    in.deadline = SimTime::seconds(100);
    in.remaining_capacity = 6;
    CHECK(deadline_decision(in) == Decision::provision(6));
  }
  SUBCASE("passed deadline is flagged") {
    auto in = example();
    in.now = SimTime::seconds(300);
    const auto d = deadline_decision(in);
    CHECK(d.kind == Decision::Kind::Provision);
    CHECK(d.count == 10);
    CHECK(d.impossible_deadline);
  }
  SUBCASE("no workers and no capacity never completes") {
    auto in = example();
    in.remaining_capacity = 0;
    CHECK(estimated_completion(in, 0) == SimTime::micros(std::numeric_limits<std::int64_t>::max()));
    CHECK(deadline_decision(in) == Decision::noop());
  }
}

TEST_CASE("FIFO dispatch to idle workers in ascending node order") {
  Kernel k;
  Scheduler s(k, {.auto_dispatch = false});
  s.submit(uniform("a", 5, SimTime::seconds(10)));
  s.add_worker(NodeId{7});
  s.add_worker(NodeId{3});
  const auto first = s.dispatch();
  REQUIRE(first.size() == 2);
  CHECK(first[0] == Assignment{"a", TaskId{1}, NodeId{3}});
  CHECK(first[1] == Assignment{"a", TaskId{2}, NodeId{7}});
  CHECK(s.dispatch().empty());
  CHECK(s.queued() == 3);
  CHECK(s.idle_workers().empty());
  CHECK(s.running_on(NodeId{7}) == std::make_pair(std::string("a"), TaskId{2}));
}

TEST_CASE("makespan of an application on a fixed worker set") {
  Kernel k;
  Scheduler s(k);
  std::vector<std::string> finished;
  s.set_listener({.app_finished = [&](const std::string& id) { finished.push_back(id); }});
  s.submit(uniform("app", 80, SimTime::micros(11'912'500)));
  for (std::uint64_t i = 1; i <= 6; ++i) s.add_worker(NodeId{i});
  const auto trace = k.run_until();
  CHECK(s.status("app") == AppStatus::Completed);
  CHECK(finished == std::vector<std::string>{"app"});
  CHECK(*s.finished_at("app") == SimTime::micros(166'775'000));
  CHECK(s.completed("app") == 80);
  CHECK(count(trace, EventKind::TaskComplete) == 80);
  CHECK(count(trace, EventKind::AppCompleted) == 1);
  CHECK(s.estimated_task_time(SimTime::seconds(1)) == SimTime::micros(11'912'500));
}

TEST_CASE("submission errors") {
  Kernel k;
  Scheduler s(k);
  CHECK(code_of([&] { s.submit(make_application("e", {})); }) == ErrorCode::EmptyApplication);
  s.submit(uniform("x", 1, SimTime::seconds(1)));
  CHECK(code_of([&] { s.submit(uniform("x", 1, SimTime::seconds(1))); }) == ErrorCode::DuplicateApplication);
  CHECK(code_of([&] { s.submit(uniform("z", 1, SimTime::zero())); }) == ErrorCode::ValidationError);
}

TEST_CASE("failed tasks are requeued at the head until retries run out") {
  Kernel k;
  Scheduler s(k, {.auto_dispatch = false});
  s.submit(uniform("a", 3, SimTime::seconds(10), 2));
  s.add_worker(NodeId{1});
  s.dispatch();
  CHECK(s.on_task_failed("a", TaskId{1}, NodeId{1}) == FailureOutcome::Requeued);
  CHECK(s.dispatch().at(0).task == TaskId{1});
  CHECK(s.on_task_failed("a", TaskId{1}, NodeId{1}) == FailureOutcome::Requeued);
  s.dispatch();
  CHECK(s.application("a").tasks[0].attempts == 3);
  CHECK(s.on_task_failed("a", TaskId{1}, NodeId{1}) == FailureOutcome::AppFailed);
  CHECK(s.status("a") == AppStatus::Failed);
  CHECK(s.queued() == 0);
  CHECK(code_of([&] { s.on_task_failed("a", TaskId{1}, NodeId{1}); }) == ErrorCode::UnknownTask);
  CHECK(code_of([&] { s.on_task_failed("nope", TaskId{1}, NodeId{1}); }) == ErrorCode::UnknownTask);
  const auto trace = k.run_until();
  CHECK(count(trace, EventKind::TaskComplete) == 0);
  CHECK(count(trace, EventKind::AppFailed) == 1);
}

TEST_CASE("a failed worker consumes an attempt; a stopped worker does not") {
  Kernel k;
  Scheduler s(k);
  s.submit(uniform("a", 2, SimTime::seconds(10), 1));
  s.add_worker(NodeId{1});
  s.add_worker(NodeId{2});
  k.run_until(SimTime::seconds(5));
  s.worker_failed(NodeId{1});
  CHECK_FALSE(s.is_ready(NodeId{1}));
  CHECK(s.application("a").tasks[0].attempts == 1);
  CHECK(s.queued() == 1);
  s.worker_stopped(NodeId{2});
  CHECK(s.application("a").tasks[1].attempts == 0);
  CHECK(s.queued() == 2);
  s.add_worker(NodeId{3});
  k.run_until();
  CHECK(s.status("a") == AppStatus::Completed);
  CHECK(*s.finished_at("a") == SimTime::seconds(25));
  CHECK(s.application("a").tasks[0].attempts == 2);
  CHECK(s.application("a").tasks[1].attempts == 1);
}

TEST_CASE("busy and idle bookkeeping") {
  Kernel k;
  Scheduler s(k);
  s.submit(make_application("a", {SimTime::seconds(10), SimTime::seconds(30)}));
  s.add_worker(NodeId{1});
  s.add_worker(NodeId{2});
  k.run_until(SimTime::seconds(4));
  const auto busy = s.busy_remaining();
  CHECK(busy.at(NodeId{1}) == SimTime::seconds(6));
  CHECK(busy.at(NodeId{2}) == SimTime::seconds(26));
  CHECK(s.running_remaining_total() == SimTime::seconds(32));
  k.run_until(SimTime::seconds(20));
  CHECK(s.idle_workers() == std::vector<NodeId>{NodeId{1}});
  CHECK(s.idle_since_at_least(SimTime::seconds(10)) == std::vector<NodeId>{NodeId{1}});
  CHECK(s.idle_since_at_least(SimTime::seconds(11)).empty());
}
