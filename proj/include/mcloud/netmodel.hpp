#pragma once

// Addressing and reachability as pure predicates over network locations.

#include <optional>
#include <set>
#include <string>

#include "mcloud/core.hpp"

namespace mcloud::net {

struct NetworkLocation {
  std::string network_id;
  std::string private_ip;
  std::optional<std::string> public_ip;
  std::set<int> open_ports;
};

struct Endpoint {
  std::string ip;
  int port = 0;
  bool operator==(const Endpoint&) const = default;
};

std::string to_string(const Endpoint& e);

NetworkLocation location_of(const NodeRecord& node);

/// Private -> (private_ip, port); Hybrid -> (public_ip, port). Throws Error(NoPublicIp).
Endpoint advertise_endpoint(const NetworkLocation& node, NetworkMode mode, int port);

/// Whether `from` can open a connection to `to` at `endpoint`.
bool reachable(const NetworkLocation& from, const NetworkLocation& to, const Endpoint& endpoint);

/// Best route from `from` to `to` on `port`: the private address inside a
/// shared network, otherwise the public one. nullopt when neither works.
std::optional<Endpoint> route(const NetworkLocation& from, const NetworkLocation& to, int port);

}  // namespace mcloud::net
