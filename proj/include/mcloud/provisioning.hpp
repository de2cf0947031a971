#pragma once

// The pool manager: provider pools, the provisioning strategy that picks one,
// capacity accounting, and provision/release against provider backends.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mcloud/core.hpp"
#include "mcloud/deploy.hpp"
#include "mcloud/provider_sim.hpp"
#include "mcloud/simkernel.hpp"

namespace mcloud {

using PoolCredentials = std::variant<AzureCredentials, Ec2Credentials>;

struct PoolConfig {
  std::string pool_id;
  ProviderKind provider = ProviderKind::AzureSim;
  PoolCredentials credentials;
  int capacity = 0;
  int priority = 0;
  double price_per_hour = 0.0;
  std::string region = "default";
  std::string vm_template = "small";
  NetworkMode network_mode = NetworkMode::Hybrid;
  SimTime boot_latency;
  SimTime boot_jitter;
  SimTime install_latency;
  InstallFlavor install_flavor = InstallFlavor::Full;
  SimTime image_config_latency;
  SimTime billing_quantum = SimTime::seconds(3600);
  std::optional<InstallScript> custom_script;
  // Azure only: reuse a named storage / cloud service instead of creating
  // "<pool_id>-storage" / "<pool_id>-service" on first provision.
  std::optional<std::string> storage;
  std::optional<std::string> service;

  InstallPlan install_plan() const {
    return {install_flavor, install_latency, image_config_latency, custom_script};
  }
};

/// Throws Error(MalformedCredentials) unless the credential record matches
/// the provider kind and every field is non-empty.
void check_credentials(const PoolConfig& config);

struct PoolState {
  PoolConfig config;
  std::set<NodeId> active;
  std::set<TicketId> pending;

  int remaining() const {
    return config.capacity - static_cast<int>(active.size()) - static_cast<int>(pending.size());
  }
};

/// Chooses the pool that supplies the next VM.
class ProvisionStrategy {
 public:
  virtual ~ProvisionStrategy() = default;
  virtual std::string_view name() const = 0;
  virtual std::optional<std::string> select(std::span<const PoolState> pools) const = 0;
};

/// Highest priority among pools with remaining capacity; ties go to the
/// lexicographically smallest pool id. nullopt means NoCapacity.
std::optional<std::string> select_pool(std::span<const PoolState> pools);

class PriorityStrategy final : public ProvisionStrategy {
 public:
  std::string_view name() const override { return "priority"; }
  std::optional<std::string> select(std::span<const PoolState> pools) const override { return select_pool(pools); }
};

/// Name -> factory. "priority" is always registered.
class StrategyRegistry {
 public:
  using Factory = std::function<std::unique_ptr<ProvisionStrategy>()>;

  static StrategyRegistry& global();
  void add(std::string name, Factory factory);
  /// Throws Error(UnknownStrategy).
  std::unique_ptr<ProvisionStrategy> make(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  StrategyRegistry();
  std::map<std::string, Factory> factories_;
};

/// One provider connection: turns provision/release into wire requests.
class ResourcePool {
 public:
  struct VmGrant {
    std::string vm_id;
    std::string network_id;
    std::string private_ip;
    std::optional<std::string> public_ip;
  };
  struct Outcome {
    std::optional<VmGrant> grant;
    std::string error_code;  // set iff !grant
  };

  explicit ResourcePool(PoolConfig config) : config_(std::move(config)) {}
  virtual ~ResourcePool() = default;

  virtual Outcome request_vm() = 0;
  /// Returns the provider error code, empty on success.
  virtual std::string release_vm(const std::string& vm_id) = 0;
  virtual ProviderBackend& backend() = 0;
  const PoolConfig& config() const { return config_; }

 protected:
  wire::Response call(wire::Verb verb, std::string path, wire::Body body);
  PoolConfig config_;
};

class AzureResourcePool final : public ResourcePool {
 public:
  AzureResourcePool(PoolConfig config, std::unique_ptr<AzureBackend> backend);
  Outcome request_vm() override;
  std::string release_vm(const std::string& vm_id) override;
  ProviderBackend& backend() override { return *backend_; }

 private:
  wire::Body auth() const;
  std::string ensure_defaults();

  std::unique_ptr<AzureBackend> backend_;
  bool defaults_ready_ = false;
};

class Ec2ResourcePool final : public ResourcePool {
 public:
  Ec2ResourcePool(PoolConfig config, std::unique_ptr<Ec2Backend> backend);
  Outcome request_vm() override;
  std::string release_vm(const std::string& vm_id) override;
  ProviderBackend& backend() override { return *backend_; }

 private:
  wire::Body auth() const;
  std::unique_ptr<Ec2Backend> backend_;
};

struct Ticket {
  TicketId ticket_id;
  std::string pool_id;
  NodeId node_id;
  bool rejected = false;
  std::string code;  // provider error code when rejected
};

struct ProvisionOutcome {
  std::vector<Ticket> tickets;
  bool no_capacity = false;
};

class PoolManager {
 public:
  struct Listener {
    std::function<void(NodeId)> ready;       // VmReady applied; node active
    std::function<void(NodeId)> terminated;  // released node terminated
    std::function<void(NodeId, const std::string&)> rejected;
  };

  PoolManager(Kernel& kernel, NodeRegistry& nodes, PublicIpAllocator& ips,
              std::unique_ptr<ProvisionStrategy> strategy = std::make_unique<PriorityStrategy>());

  void set_listener(Listener l) { listener_ = std::move(l); }

  /// Registers a pool backed by a fresh simulated account holding the
  /// configured credentials. Throws DuplicatePool / MalformedCredentials /
  /// ValidationError (capacity < 0).
  std::string register_pool(PoolConfig config);
  /// Same, with an explicit backend (lets tests seed accounts or mismatch credentials).
  std::string register_pool(PoolConfig config, std::unique_ptr<ProviderBackend> backend);

  /// Provisions `count` VMs one by one, re-running the strategy after each.
  ProvisionOutcome provision(int count);
  /// Provisions in a named pool, bypassing the strategy (static clouds).
  ProvisionOutcome provision_in(const std::string& pool_id, int count);

  /// Throws UnknownNode (not active / already releasing) or RefusedMasterRelease.
  void release(NodeId node);
  /// Crash of a pending or active worker: frees its capacity immediately.
  void fail(NodeId node);

  std::vector<PoolState> snapshot() const;
  const PoolState& pool(const std::string& pool_id) const;
  std::vector<std::string> pool_ids() const;  // registration order
  int total_remaining() const;
  std::optional<TicketId> ticket_of(NodeId node) const;
  std::optional<std::string> vm_of(NodeId node) const;
  ProviderBackend& backend(const std::string& pool_id);

  /// |active| + |pending| <= capacity for every pool.
  bool capacity_ok() const;

  struct Counters {
    std::uint64_t issued = 0;
    std::uint64_t rejected = 0;
    std::uint64_t ended = 0;  // terminated or failed after acceptance
  };
  const Counters& counters() const { return counters_; }
  std::size_t pending_count() const;
  std::size_t active_count() const;

 private:
  struct Entry {
    PoolState state;
    std::unique_ptr<ResourcePool> pool;
  };

  Ticket provision_one(Entry& entry);
  Entry& entry(const std::string& pool_id);
  void on_vm_ready(const SimEvent& e);
  void on_terminated(const SimEvent& e);

  Kernel& kernel_;
  NodeRegistry& nodes_;
  PublicIpAllocator& ips_;
  std::unique_ptr<ProvisionStrategy> strategy_;
  Listener listener_;
  std::vector<std::string> order_;
  std::map<std::string, Entry> pools_;
  std::map<std::pair<std::string, std::string>, NodeId> by_vm_;  // (pool, vm) -> node
  std::map<NodeId, std::pair<TicketId, std::string>> vm_of_;    // node -> (ticket, vm)
  std::uint64_t next_ticket_ = 1;
  Counters counters_;
};

}  // namespace mcloud
