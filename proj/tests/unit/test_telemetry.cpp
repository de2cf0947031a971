#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "mcloud/telemetry.hpp"

using namespace mcloud;

namespace {

const SimTime kHour = SimTime::seconds(3600);

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Trace load(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  return parse_trace(in);
}

NodeRecord node(SimTime start, std::optional<SimTime> end) {
  NodeRecord n;
  n.node_id = NodeId{1};
  n.pool_id = "ec2";
  n.provisioned_at = start;
  n.released_at = end;
  return n;
}

}  // namespace

TEST_CASE("billing examples") {
  CHECK(billing_cost(kHour, 0.09, kHour) == doctest::Approx(0.09));
  CHECK(billing_cost(kHour + SimTime::seconds(1), 0.09, kHour) == doctest::Approx(0.18));
  CHECK(billing_cost(SimTime::zero(), 0.09, kHour) == 0.0);
  CHECK(billing_quanta(SimTime::micros(1), kHour) == 1);
  CHECK(billing_quanta(SimTime::seconds(120), SimTime::seconds(60)) == 2);
  CHECK(billing_quanta(SimTime::seconds(121), SimTime::seconds(60)) == 3);
  CHECK(billing_cost(SimTime::seconds(121), 0.6, SimTime::seconds(60)) == doctest::Approx(0.03));
  CHECK_THROWS_AS(billing_quanta(kHour, SimTime::zero()), Error);
}

TEST_CASE("bill a node record") {
  const auto r = bill(node(SimTime::seconds(100), SimTime::seconds(100) + kHour * 2), 0.12, kHour);
  CHECK(r.quanta == 2);
  CHECK(r.cost == doctest::Approx(0.24));
  CHECK(r.start == SimTime::seconds(100));
  try {
    bill(node(SimTime::zero(), std::nullopt), 0.12, kHour);
    FAIL("expected NodeStillRunning");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NodeStillRunning);
  }
}

TEST_CASE("report over a hand-written trace") {
  const auto rep = build_report(load(MCLOUD_GOLDEN_DIR "/report_trace.txt"));
  CHECK(rep.trace_end == SimTime::seconds(3700));
  REQUIRE(rep.nodes.size() == 3);
  CHECK(rep.nodes[0].utilization == doctest::Approx(0.5));
  CHECK(rep.nodes[0].tasks == 2);
  CHECK(rep.nodes[0].cost == doctest::Approx(0.12));
  CHECK(rep.nodes[1].state == "Rejected");
  CHECK(rep.nodes[1].cost == 0.0);
  CHECK(rep.nodes[2].state == "Running");
  CHECK(rep.nodes[2].quanta == 2);
  REQUIRE(rep.pools.size() == 2);
  CHECK(rep.pools[0].rejected == 1);
  REQUIRE(rep.apps.size() == 1);
  CHECK(rep.apps[0].makespan == SimTime::seconds(50));
  CHECK(rep.total_cost == doctest::Approx(0.32));

  std::ostringstream csv;
  write_report_csv(csv, rep);
  CHECK(csv.str() == slurp(MCLOUD_GOLDEN_DIR "/report.csv"));

  std::ostringstream table;
  write_report_table(table, rep);
  CHECK(table.str().find("total cost 0.32") != std::string::npos);
}

TEST_CASE("empty trace reports nothing") {
  const auto rep = build_report({});
  CHECK(rep.nodes.empty());
  CHECK(rep.total_cost == 0.0);
  CHECK(rep.trace_hash == "cbf29ce484222325");
}

TEST_CASE("failed nodes stop billing at the failure") {
  Trace t;
  t.push_back({SimTime::zero(), 1, EventKind::VmAccepted,
               Payload{{"node", "5"}, {"pool", "p"}, {"price", "1"}, {"provider", "ec2"}, {"quantum", "60.000000"},
                       {"ticket", "1"}, {"vm", "i-1"}}});
  t.push_back({SimTime::seconds(61), 2, EventKind::NodeFailed, Payload{{"node", "5"}, {"pool", "p"}}});
  t.push_back({SimTime::seconds(1000), 3, EventKind::Custom, Payload{}});
  const auto rep = build_report(t);
  REQUIRE(rep.nodes.size() == 1);
  CHECK(rep.nodes[0].state == "Failed");
  CHECK(rep.nodes[0].quanta == 2);
  CHECK(rep.nodes[0].cost == doctest::Approx(2.0 / 60.0));
}
