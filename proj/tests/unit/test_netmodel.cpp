#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mcloud/netmodel.hpp"

using namespace mcloud;
using namespace mcloud::net;

namespace {

NetworkLocation loc(std::string net, std::string priv, std::optional<std::string> pub, std::set<int> ports = {}) {
  return {std::move(net), std::move(priv), std::move(pub), std::move(ports)};
}

}  // namespace

TEST_CASE("advertised endpoint follows the network mode") {
  const auto n = loc("azure/p/svc", "10.0.1.4", "100.64.0.1");
  CHECK(advertise_endpoint(n, NetworkMode::Private, kContainerPort) == Endpoint{"10.0.1.4", kContainerPort});
  CHECK(advertise_endpoint(n, NetworkMode::Hybrid, kContainerPort) == Endpoint{"100.64.0.1", kContainerPort});
  CHECK(to_string(Endpoint{"1.2.3.4", 9090}) == "1.2.3.4:9090");
  try {
    advertise_endpoint(loc("x", "10.0.0.1", std::nullopt), NetworkMode::Hybrid, kContainerPort);
    FAIL("expected NoPublicIp");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoPublicIp);
  }
}

TEST_CASE("reachability") {
  const auto a1 = loc("azure/p/svc", "10.0.1.4", "100.64.0.1", {kContainerPort});
  const auto a2 = loc("azure/p/svc", "10.0.1.5", "100.64.0.1", {kContainerPort});
  const auto e1 = loc("ec2/q/us", "172.31.0.10", "100.64.0.2", {kContainerPort});
  const auto closed = loc("ec2/q/us", "172.31.0.11", "100.64.0.3");

  SUBCASE("same network over private addresses") {
    CHECK(reachable(a1, a2, {"10.0.1.5", kContainerPort}));
    CHECK(route(a1, a2, kContainerPort) == Endpoint{"10.0.1.5", kContainerPort});
  }
  SUBCASE("cross network needs the public address and an open port") {
    CHECK_FALSE(reachable(a1, e1, {"172.31.0.10", kContainerPort}));
    CHECK(reachable(a1, e1, {"100.64.0.2", kContainerPort}));
    CHECK_FALSE(reachable(a1, e1, {"100.64.0.2", kManagementPort}));
    CHECK(route(a1, e1, kContainerPort) == Endpoint{"100.64.0.2", kContainerPort});
    CHECK_FALSE(route(a1, closed, kContainerPort).has_value());
  }
  SUBCASE("wrong address is never reachable") {
    CHECK_FALSE(reachable(a1, a2, {"10.0.1.99", kContainerPort}));
  }
}

TEST_CASE("location_of copies addressing from the node record") {
  NodeRecord n;
  n.network_id = "net";
  n.private_ip = "10.0.0.2";
  n.public_ip = "100.64.0.9";
  n.open_ports = {kManagementPort};
  const auto l = location_of(n);
  CHECK(l.network_id == "net");
  CHECK(l.private_ip == "10.0.0.2");
  CHECK(l.public_ip == "100.64.0.9");
  CHECK(l.open_ports == std::set<int>{kManagementPort});
}
