#include "mcloud/netmodel.hpp"

namespace mcloud::net {

std::string to_string(const Endpoint& e) { return e.ip + ":" + std::to_string(e.port); }

NetworkLocation location_of(const NodeRecord& node) {
  return {node.network_id, node.private_ip, node.public_ip, node.open_ports};
}

Endpoint advertise_endpoint(const NetworkLocation& node, NetworkMode mode, int port) {
  if (mode == NetworkMode::Private) return {node.private_ip, port};
  if (!node.public_ip) throw Error(ErrorCode::NoPublicIp, "hybrid mode needs a public ip on " + node.private_ip);
  return {*node.public_ip, port};
}

bool reachable(const NetworkLocation& from, const NetworkLocation& to, const Endpoint& endpoint) {
  if (from.network_id == to.network_id && endpoint.ip == to.private_ip) return true;
  return to.public_ip && endpoint.ip == *to.public_ip && to.open_ports.contains(endpoint.port);
}

std::optional<Endpoint> route(const NetworkLocation& from, const NetworkLocation& to, int port) {
  if (from.network_id == to.network_id) return Endpoint{to.private_ip, port};
  if (to.public_ip) {
    Endpoint pub{*to.public_ip, port};
    if (reachable(from, to, pub)) return pub;
  }
  return std::nullopt;
}

}  // namespace mcloud::net
