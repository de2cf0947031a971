#pragma once

// Remote installation and management of containers on provisioned nodes:
// probe, install from a repository, configure, start/stop/restart, uninstall,
// and declarative post-install scripts.

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mcloud/core.hpp"
#include "mcloud/netmodel.hpp"
#include "mcloud/simkernel.hpp"

namespace mcloud {

enum class RepositoryKind { SharedPath, RemoteFtp };

struct Repository {
  RepositoryKind kind = RepositoryKind::RemoteFtp;
  std::string address;
  std::string network_id;  // SharedPath only
  std::map<std::string, std::uint64_t> artifacts;
};

/// SharedPath: same network only. RemoteFtp: any node with a public route.
bool repository_reachable(const Repository& repo, const NodeRecord& node);

/// Container configuration keys an install script may set.
inline const std::set<std::string>& script_key_whitelist() {
  static const std::set<std::string> keys{"cache_dir", "heartbeat_s", "hostname_alias", "log_level", "threads"};
  return keys;
}

struct InstallScript {
  std::string name;
  SimTime delay;
  std::vector<std::pair<std::string, std::string>> mutations;
};

/// Throws Error(InvalidScript) if a mutation touches a key outside the whitelist.
void validate_script(const InstallScript& script);

enum class InstallFlavor { Full, Preconfigured };

struct InstallPlan {
  InstallFlavor flavor = InstallFlavor::Full;
  SimTime install_latency;        // Full
  SimTime image_config_latency;   // Preconfigured
  std::optional<InstallScript> script;

  SimTime total() const {
    return (flavor == InstallFlavor::Full ? install_latency : image_config_latency) +
           (script ? script->delay : SimTime::zero());
  }
};

enum class ProbeResult { NotInstalled, Installed, Running, Unreachable };
std::string_view to_string(ProbeResult r);

enum class ControlAction { Start, Stop, Restart };

/// Executes deploy commands against nodes in a registry. Completions are
/// kernel events; install is the only command with latency, the others take
/// effect immediately and are recorded as zero-delay events.
class Deployer {
 public:
  struct Listener {
    std::function<void(NodeId)> installed;  // after InstallDone is applied
    std::function<void(NodeId)> started;    // container running
    std::function<void(NodeId)> stopped;    // container stopped (incl. the stop half of a restart)
  };

  Deployer(Kernel& kernel, NodeRegistry& nodes, NodeId master);

  void set_listener(Listener l) { listener_ = std::move(l); }

  ProbeResult probe(NodeId node) const;
  void install(NodeId node, const Repository& repo, const InstallPlan& plan);
  void configure(NodeId node, const net::Endpoint& master_endpoint, NetworkMode mode);
  void control(NodeId node, ControlAction action);
  void uninstall(NodeId node);

  /// Marks an unreachable node (ProbeFailed); records the event.
  void mark_unreachable(NodeId node);
  /// Forgets in-flight work for a node that died.
  void forget(NodeId node);

  /// True iff the container runs and the node and master reach each other on
  /// their advertised container endpoints.
  bool connected(NodeId node) const;

  std::optional<net::Endpoint> advertised(NodeId node) const;
  std::optional<net::Endpoint> master_endpoint_of(NodeId node) const;
  const std::map<std::string, std::string>& container_config(NodeId node) const;
  bool install_in_flight(NodeId node) const { return in_flight_.contains(node); }

 private:
  struct InFlight {
    std::uint64_t event = 0;
    std::optional<InstallScript> script;
  };
  struct Managed {
    std::optional<net::Endpoint> advertised;
    std::optional<net::Endpoint> master_endpoint;
    std::map<std::string, std::string> config;
  };

  void on_install_done(const SimEvent& e);
  void apply(NodeId node, LifecycleEvent event);

  Kernel& kernel_;
  NodeRegistry& nodes_;
  NodeId master_;
  Listener listener_;
  std::map<NodeId, Managed> managed_;
  std::map<NodeId, InFlight> in_flight_;
};

}  // namespace mcloud
