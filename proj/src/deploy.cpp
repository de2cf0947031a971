#include "mcloud/deploy.hpp"

namespace mcloud {

bool repository_reachable(const Repository& repo, const NodeRecord& node) {
  if (repo.kind == RepositoryKind::SharedPath) return node.network_id == repo.network_id;
  return node.public_ip.has_value();
}

void validate_script(const InstallScript& script) {
  for (const auto& [key, value] : script.mutations) {
    if (!script_key_whitelist().contains(key))
      throw Error(ErrorCode::InvalidScript, "script '" + script.name + "' sets non-whitelisted key " + key);
  }
}

std::string_view to_string(ProbeResult r) {
  switch (r) {
    case ProbeResult::NotInstalled: return "NotInstalled";
    case ProbeResult::Installed: return "Installed";
    case ProbeResult::Running: return "Running";
    case ProbeResult::Unreachable: return "Unreachable";
  }
  return "?";
}

Deployer::Deployer(Kernel& kernel, NodeRegistry& nodes, NodeId master)
    : kernel_(kernel), nodes_(nodes), master_(master) {
  kernel_.on(EventKind::InstallDone, [this](const SimEvent& e) { on_install_done(e); });
}

void Deployer::apply(NodeId id, LifecycleEvent event) {
  NodeRecord& rec = nodes_.at(id);
  rec = transition(rec, event);
}

ProbeResult Deployer::probe(NodeId id) const {
  const NodeRecord& node = nodes_.at(id);
  if (node.vm_state != VmState::Running || node.daemon_state == DaemonState::Unreachable)
    return ProbeResult::Unreachable;
  const auto master = net::location_of(nodes_.at(master_));
  if (!net::route(master, net::location_of(node), kManagementPort)) return ProbeResult::Unreachable;
  switch (node.daemon_state) {
    case DaemonState::NotInstalled: return ProbeResult::NotInstalled;
    case DaemonState::ContainerRunning: return ProbeResult::Running;
    default: return ProbeResult::Installed;
  }
}

void Deployer::install(NodeId id, const Repository& repo, const InstallPlan& plan) {
  const ProbeResult status = probe(id);
  if (status == ProbeResult::Unreachable) throw Error(ErrorCode::Unreachable, to_string(id) + " failed probe");
  if (status != ProbeResult::NotInstalled || in_flight_.contains(id))
    throw Error(ErrorCode::AlreadyInstalled, to_string(id));
  if (!repository_reachable(repo, nodes_.at(id)))
    throw Error(ErrorCode::RepoUnreachable, to_string(id) + " cannot reach repository " + repo.address);
  if (plan.script) validate_script(*plan.script);

  const auto event = kernel_.schedule_after(plan.total(), EventKind::InstallDone,
                                            Payload{}.set("node", id).set("flavor", plan.flavor == InstallFlavor::Full
                                                                                        ? "full"
                                                                                        : "preconfigured"));
  in_flight_.emplace(id, InFlight{event, plan.script});
}

void Deployer::on_install_done(const SimEvent& e) {
  const NodeId id = e.payload.get_node("node");
  auto it = in_flight_.find(id);
  if (it == in_flight_.end()) return;
  const auto script = std::move(it->second.script);
  in_flight_.erase(it);

  apply(id, LifecycleEvent::InstallDone);
  nodes_.at(id).open_ports.insert(kContainerPort);
  auto& managed = managed_[id];
  if (script) {
    for (const auto& [key, value] : script->mutations) managed.config[key] = value;
  }
  if (listener_.installed) listener_.installed(id);
}

void Deployer::configure(NodeId id, const net::Endpoint& master_endpoint, NetworkMode mode) {
  const NodeRecord& node = nodes_.at(id);
  switch (node.daemon_state) {
    case DaemonState::Installing:
    case DaemonState::Configured:
    case DaemonState::Stopped:
      break;
    case DaemonState::ContainerRunning:
      throw Error(ErrorCode::StillRunning, "stop " + to_string(id) + " before reconfiguring");
    default:
      throw Error(ErrorCode::NotInstalled, to_string(id));
  }
  const auto own = net::advertise_endpoint(net::location_of(node), mode, kContainerPort);
  apply(id, LifecycleEvent::ConfigDone);
  auto& managed = managed_[id];
  managed.advertised = own;
  managed.master_endpoint = master_endpoint;
  kernel_.schedule(kernel_.now(), EventKind::ConfigDone,
                   Payload{}
                       .set("node", id)
                       .set("endpoint", net::to_string(own))
                       .set("master", net::to_string(master_endpoint))
                       .set("mode", std::string(to_string(mode))));
}

void Deployer::control(NodeId id, ControlAction action) {
  const DaemonState d = nodes_.at(id).daemon_state;
  if (d != DaemonState::Configured && d != DaemonState::ContainerRunning && d != DaemonState::Stopped)
    throw Error(ErrorCode::NotConfigured, to_string(id) + " is " + std::string(to_string(d)));

  switch (action) {
    case ControlAction::Start:
      apply(id, LifecycleEvent::ContainerStarted);
      kernel_.schedule(kernel_.now(), EventKind::ContainerStarted, Payload{}.set("node", id));
      if (listener_.started) listener_.started(id);
      break;
    case ControlAction::Stop:
      apply(id, LifecycleEvent::StopRequested);
      kernel_.schedule(kernel_.now(), EventKind::ContainerStopped, Payload{}.set("node", id));
      if (listener_.stopped) listener_.stopped(id);
      break;
    case ControlAction::Restart: {
      const bool was_running = d == DaemonState::ContainerRunning;
      if (was_running) apply(id, LifecycleEvent::StopRequested);
      apply(id, LifecycleEvent::ContainerStarted);
      kernel_.schedule(kernel_.now(), EventKind::ContainerStarted, Payload{}.set("node", id).set("restart", 1));
      if (was_running && listener_.stopped) listener_.stopped(id);
      if (listener_.started) listener_.started(id);
      break;
    }
  }
}

void Deployer::uninstall(NodeId id) {
  const DaemonState d = nodes_.at(id).daemon_state;
  if (d == DaemonState::ContainerRunning) throw Error(ErrorCode::StillRunning, to_string(id));
  if (d == DaemonState::NotInstalled || d == DaemonState::Unreachable || in_flight_.contains(id))
    throw Error(ErrorCode::NotInstalled, to_string(id));
  apply(id, LifecycleEvent::UninstallDone);
  nodes_.at(id).open_ports.erase(kContainerPort);
  managed_.erase(id);
  kernel_.schedule(kernel_.now(), EventKind::Uninstalled, Payload{}.set("node", id));
}

void Deployer::mark_unreachable(NodeId id) {
  apply(id, LifecycleEvent::ProbeFailed);
  kernel_.schedule(kernel_.now(), EventKind::ProbeFailed, Payload{}.set("node", id));
}

void Deployer::forget(NodeId id) {
  if (auto it = in_flight_.find(id); it != in_flight_.end()) {
    kernel_.cancel(it->second.event);
    in_flight_.erase(it);
  }
  managed_.erase(id);
}

bool Deployer::connected(NodeId id) const {
  const NodeRecord& node = nodes_.at(id);
  if (node.vm_state != VmState::Running || node.daemon_state != DaemonState::ContainerRunning) return false;
  auto it = managed_.find(id);
  if (it == managed_.end() || !it->second.advertised || !it->second.master_endpoint) return false;
  const auto master = net::location_of(nodes_.at(master_));
  const auto self = net::location_of(node);
  return net::reachable(master, self, *it->second.advertised) &&
         net::reachable(self, master, *it->second.master_endpoint);
}

std::optional<net::Endpoint> Deployer::advertised(NodeId id) const {
  auto it = managed_.find(id);
  return it == managed_.end() ? std::nullopt : it->second.advertised;
}

std::optional<net::Endpoint> Deployer::master_endpoint_of(NodeId id) const {
  auto it = managed_.find(id);
  return it == managed_.end() ? std::nullopt : it->second.master_endpoint;
}

const std::map<std::string, std::string>& Deployer::container_config(NodeId id) const {
  static const std::map<std::string, std::string> empty;
  auto it = managed_.find(id);
  return it == managed_.end() ? empty : it->second.config;
}

}  // namespace mcloud
