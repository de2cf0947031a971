#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "mcloud/provisioning.hpp"
#include "mcloud/validate.hpp"

using namespace mcloud;

namespace {

struct Fixture {
  Kernel kernel;
  NodeRegistry nodes;
  PublicIpAllocator ips;
  PoolManager pools{kernel, nodes, ips};
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::ParseError;
}

PoolState state(std::string id, int capacity, int priority, int used = 0) {
  PoolState s;
  s.config.pool_id = std::move(id);
  s.config.capacity = capacity;
  s.config.priority = priority;
  for (int i = 0; i < used; ++i) s.active.insert(NodeId{static_cast<std::uint64_t>(i + 1)});
  return s;
}

// Brute force: scan every pool and keep the best (priority, -id) with room.
std::optional<std::string> oracle_select(const std::vector<PoolState>& pools) {
  std::optional<std::string> best;
  int best_priority = 0;
  for (const auto& p : pools) {
    if (p.remaining() <= 0) continue;
    if (!best || p.config.priority > best_priority ||
        (p.config.priority == best_priority && p.config.pool_id < *best)) {
      best = p.config.pool_id;
      best_priority = p.config.priority;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("priority provisioning fills A then B") {
  Fixture f;
  f.pools.register_pool(fixture_pool("A", ProviderKind::AzureSim, 2, 2));
  f.pools.register_pool(fixture_pool("B", ProviderKind::Ec2Sim, 2, 1));
  const auto out = f.pools.provision(3);
  REQUIRE(out.tickets.size() == 3);
  CHECK_FALSE(out.no_capacity);
  CHECK(out.tickets[0].pool_id == "A");
  CHECK(out.tickets[1].pool_id == "A");
  CHECK(out.tickets[2].pool_id == "B");
  CHECK(f.pools.total_remaining() == 1);
  CHECK(f.pools.capacity_ok());

  const auto more = f.pools.provision(5);
  CHECK(more.tickets.size() == 1);
  CHECK(more.no_capacity);
  CHECK(f.pools.total_remaining() == 0);
}

TEST_CASE("select_pool matches brute force and is invariant under permutation") {
  SplitMix64 rng(77);
  for (int round = 0; round < 500; ++round) {
    std::vector<PoolState> pools;
    const int n = 1 + static_cast<int>(rng.next() % 5);
    for (int i = 0; i < n; ++i) {
      const int cap = static_cast<int>(rng.next() % 4);
      pools.push_back(state(std::string(1, static_cast<char>('a' + i)), cap, static_cast<int>(rng.next() % 3),
                            static_cast<int>(rng.next() % (cap + 1))));
    }
    const auto expected = oracle_select(pools);
    REQUIRE(select_pool(pools) == expected);
    std::sort(pools.begin(), pools.end(),
              [](const PoolState& a, const PoolState& b) { return a.config.pool_id > b.config.pool_id; });
    REQUIRE(select_pool(pools) == expected);
  }
  CHECK_FALSE(select_pool(std::vector<PoolState>{}).has_value());
}

TEST_CASE("provider rejection frees the ticket and logs ProvisionRejected") {
  Fixture f;
  auto cfg = fixture_pool("az", ProviderKind::AzureSim, 2, 1);
  cfg.storage = "missing";
  f.pools.register_pool(cfg);
  std::string seen;
  f.pools.set_listener({.ready = {}, .terminated = {}, .rejected = [&](NodeId, const std::string& c) { seen = c; }});
  const auto out = f.pools.provision(1);
  REQUIRE(out.tickets.size() == 1);
  CHECK(out.tickets[0].rejected);
  CHECK(out.tickets[0].code == wire::codes::kStorageNotFound);
  CHECK(seen == wire::codes::kStorageNotFound);
  CHECK(f.pools.pool("az").remaining() == 2);
  CHECK(f.nodes.at(out.tickets[0].node_id).vm_state == VmState::Failed);
  const auto t = f.kernel.run_until();
  REQUIRE(t.size() == 1);
  CHECK(t[0].kind == EventKind::ProvisionRejected);
  CHECK(t[0].payload.get("code") == wire::codes::kStorageNotFound);
  CHECK(f.pools.counters().rejected == 1);
}

TEST_CASE("ready, release and termination") {
  Fixture f;
  auto cfg = fixture_pool("ec2", ProviderKind::Ec2Sim, 1, 0, 0.09);
  cfg.boot_latency = SimTime::seconds(30);
  f.pools.register_pool(cfg);
  std::vector<NodeId> ready, terminated;
  f.pools.set_listener({.ready = [&](NodeId n) { ready.push_back(n); },
                        .terminated = [&](NodeId n) { terminated.push_back(n); },
                        .rejected = {}});
  const NodeId n = f.pools.provision(1).tickets.at(0).node_id;
  CHECK(f.pools.pool("ec2").pending.size() == 1);
  CHECK(code_of([&] { f.pools.release(n); }) == ErrorCode::UnknownNode);  // still booting
  f.kernel.run_until();
  CHECK(ready == std::vector<NodeId>{n});
  CHECK(f.nodes.at(n).ready_at == SimTime::seconds(30));
  CHECK(f.pools.pool("ec2").active.contains(n));
  CHECK(f.pools.pool("ec2").remaining() == 0);

  f.pools.release(n);
  CHECK(f.pools.pool("ec2").remaining() == 0);  // held until Terminated
  CHECK(code_of([&] { f.pools.release(n); }) == ErrorCode::UnknownNode);
  f.kernel.run_until();
  CHECK(terminated == std::vector<NodeId>{n});
  CHECK(f.pools.pool("ec2").remaining() == 1);
  CHECK(f.nodes.at(n).vm_state == VmState::Terminated);
  CHECK(code_of([&] { f.pools.release(n); }) == ErrorCode::UnknownNode);
  CHECK(code_of([&] { f.pools.release(NodeId{999}); }) == ErrorCode::UnknownNode);
}

TEST_CASE("the master is never released") {
  Fixture f;
  const NodeId m = f.nodes.create("master", Role::Master, SimTime::zero()).node_id;
  CHECK(code_of([&] { f.pools.release(m); }) == ErrorCode::RefusedMasterRelease);
}

TEST_CASE("failing a booting worker frees capacity at once") {
  Fixture f;
  auto cfg = fixture_pool("az", ProviderKind::AzureSim, 1);
  cfg.boot_latency = SimTime::seconds(60);
  f.pools.register_pool(cfg);
  int ready = 0;
  f.pools.set_listener({.ready = [&](NodeId) { ++ready; }, .terminated = {}, .rejected = {}});
  const NodeId n = f.pools.provision(1).tickets.at(0).node_id;
  f.pools.fail(n);
  CHECK(f.pools.pool("az").remaining() == 1);
  CHECK(f.nodes.at(n).vm_state == VmState::Failed);
  f.kernel.run_until();
  CHECK(ready == 0);
  CHECK(f.pools.capacity_ok());
}

TEST_CASE("registration errors") {
  Fixture f;
  f.pools.register_pool(fixture_pool("p", ProviderKind::AzureSim, 1));
  CHECK(code_of([&] { f.pools.register_pool(fixture_pool("p", ProviderKind::Ec2Sim, 1)); }) ==
        ErrorCode::DuplicatePool);

  auto wrong_kind = fixture_pool("q", ProviderKind::AzureSim, 1);
  wrong_kind.credentials = Ec2Credentials{"k", "s"};
  CHECK(code_of([&] { f.pools.register_pool(wrong_kind); }) == ErrorCode::MalformedCredentials);

  auto empty_field = fixture_pool("r", ProviderKind::Ec2Sim, 1);
  empty_field.credentials = Ec2Credentials{"k", ""};
  CHECK(code_of([&] { f.pools.register_pool(empty_field); }) == ErrorCode::MalformedCredentials);

  CHECK(code_of([&] { f.pools.register_pool(fixture_pool("s", ProviderKind::Ec2Sim, -1)); }) ==
        ErrorCode::ValidationError);
  CHECK(code_of([&] { f.pools.provision_in("nope", 1); }) == ErrorCode::UnknownPool);
  CHECK(f.pools.pool_ids() == std::vector<std::string>{"p"});
}

TEST_CASE("strategy registry") {
  CHECK(StrategyRegistry::global().make("priority")->name() == "priority");
  CHECK(code_of([] { StrategyRegistry::global().make("cheapest-first"); }) == ErrorCode::UnknownStrategy);
}

TEST_CASE("provision_in bypasses the strategy") {
  Fixture f;
  f.pools.register_pool(fixture_pool("hi", ProviderKind::AzureSim, 3, 5));
  f.pools.register_pool(fixture_pool("lo", ProviderKind::Ec2Sim, 2, 0));
  const auto out = f.pools.provision_in("lo", 3);
  CHECK(out.tickets.size() == 2);
  CHECK(out.no_capacity);
  CHECK(f.pools.pool("hi").remaining() == 3);
}
