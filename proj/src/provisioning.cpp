#include "mcloud/provisioning.hpp"

#include <algorithm>

namespace mcloud {

void check_credentials(const PoolConfig& config) {
  auto bad = [&](const std::string& why) { return Error(ErrorCode::MalformedCredentials, config.pool_id + ": " + why); };
  if (config.provider == ProviderKind::AzureSim) {
    const auto* c = std::get_if<AzureCredentials>(&config.credentials);
    if (!c) throw bad("azure pool needs subscription_id and certificate_token");
    if (c->subscription_id.empty()) throw bad("missing subscription_id");
    if (c->certificate_token.empty()) throw bad("missing certificate_token");
  } else {
    const auto* c = std::get_if<Ec2Credentials>(&config.credentials);
    if (!c) throw bad("ec2 pool needs access_key and secret_key");
    if (c->access_key.empty()) throw bad("missing access_key");
    if (c->secret_key.empty()) throw bad("missing secret_key");
  }
}

std::optional<std::string> select_pool(std::span<const PoolState> pools) {
  const PoolState* best = nullptr;
  for (const auto& p : pools) {
    if (p.remaining() <= 0) continue;
    if (!best || p.config.priority > best->config.priority ||
        (p.config.priority == best->config.priority && p.config.pool_id < best->config.pool_id))
      best = &p;
  }
  if (!best) return std::nullopt;
  return best->config.pool_id;
}

StrategyRegistry::StrategyRegistry() {
  add("priority", [] { return std::make_unique<PriorityStrategy>(); });
}

StrategyRegistry& StrategyRegistry::global() {
  static StrategyRegistry registry;
  return registry;
}

void StrategyRegistry::add(std::string name, Factory factory) { factories_[std::move(name)] = std::move(factory); }

std::unique_ptr<ProvisionStrategy> StrategyRegistry::make(const std::string& name) const {
  auto it = factories_.find(name);
  if (it == factories_.end()) throw Error(ErrorCode::UnknownStrategy, name);
  return it->second();
}

std::vector<std::string> StrategyRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, f] : factories_) out.push_back(name);
  return out;
}

// ---------------------------------------------------------------------------
// Resource pools

wire::Response ResourcePool::call(wire::Verb verb, std::string path, wire::Body body) {
  // Round-trip through the byte encoding, as a remote client would.
  const std::string reply = backend().handle_bytes(wire::encode(wire::Request{verb, std::move(path), std::move(body)}));
  return wire::decode_response(reply);
}

AzureResourcePool::AzureResourcePool(PoolConfig config, std::unique_ptr<AzureBackend> backend)
    : ResourcePool(std::move(config)), backend_(std::move(backend)) {}

wire::Body AzureResourcePool::auth() const {
  const auto& c = std::get<AzureCredentials>(config_.credentials);
  return {{"certificate_token", c.certificate_token}, {"subscription_id", c.subscription_id}};
}

std::string AzureResourcePool::ensure_defaults() {
  if (defaults_ready_) return {};
  if (!config_.storage) {
    auto body = auth();
    body["name"] = config_.pool_id + "-storage";
    const auto r = call(wire::Verb::Post, "/storages", body);
    if (r.status == wire::Status::Error && r.code != wire::codes::kStorageExists) return r.code;
  }
  if (!config_.service) {
    auto body = auth();
    body["name"] = config_.pool_id + "-service";
    body["region"] = config_.region;
    const auto r = call(wire::Verb::Post, "/services", body);
    if (r.status == wire::Status::Error && r.code != wire::codes::kServiceExists) return r.code;
  }
  defaults_ready_ = true;
  return {};
}

ResourcePool::Outcome AzureResourcePool::request_vm() {
  if (auto code = ensure_defaults(); !code.empty()) return {std::nullopt, code};
  const std::string service = config_.service.value_or(config_.pool_id + "-service");
  auto body = auth();
  body["storage"] = config_.storage.value_or(config_.pool_id + "-storage");
  body["template"] = config_.vm_template;
  const auto r = call(wire::Verb::Post, "/services/" + service + "/vms", body);
  if (r.status == wire::Status::Error) return {std::nullopt, r.code};
  return {VmGrant{r.body.at("vm_id"), r.body.at("network_id"), r.body.at("private_ip"), r.body.at("public_ip")}, {}};
}

std::string AzureResourcePool::release_vm(const std::string& vm_id) {
  const auto r = call(wire::Verb::Delete, "/vms/" + vm_id, auth());
  return r.code;
}

Ec2ResourcePool::Ec2ResourcePool(PoolConfig config, std::unique_ptr<Ec2Backend> backend)
    : ResourcePool(std::move(config)), backend_(std::move(backend)) {}

wire::Body Ec2ResourcePool::auth() const {
  const auto& c = std::get<Ec2Credentials>(config_.credentials);
  return {{"access_key", c.access_key}, {"secret_key", c.secret_key}};
}

ResourcePool::Outcome Ec2ResourcePool::request_vm() {
  auto body = auth();
  body["template"] = config_.vm_template;
  const auto r = call(wire::Verb::Post, "/instances", body);
  if (r.status == wire::Status::Error) return {std::nullopt, r.code};
  return {VmGrant{r.body.at("instance_id"), r.body.at("network_id"), r.body.at("private_ip"), r.body.at("public_ip")},
          {}};
}

std::string Ec2ResourcePool::release_vm(const std::string& vm_id) {
  return call(wire::Verb::Delete, "/instances/" + vm_id, auth()).code;
}

// ---------------------------------------------------------------------------
// Pool manager

PoolManager::PoolManager(Kernel& kernel, NodeRegistry& nodes, PublicIpAllocator& ips,
                         std::unique_ptr<ProvisionStrategy> strategy)
    : kernel_(kernel), nodes_(nodes), ips_(ips), strategy_(std::move(strategy)) {
  kernel_.on(EventKind::VmReady, [this](const SimEvent& e) { on_vm_ready(e); });
  kernel_.on(EventKind::Terminated, [this](const SimEvent& e) { on_terminated(e); });
}

std::string PoolManager::register_pool(PoolConfig config) {
  check_credentials(config);
  const BootTiming timing{config.boot_latency, config.boot_jitter};
  std::unique_ptr<ProviderBackend> backend;
  if (config.provider == ProviderKind::AzureSim) {
    backend = std::make_unique<AzureBackend>(kernel_, config.pool_id, std::get<AzureCredentials>(config.credentials),
                                             timing, ips_);
  } else {
    backend = std::make_unique<Ec2Backend>(kernel_, config.pool_id, std::get<Ec2Credentials>(config.credentials),
                                           config.region, timing, ips_);
  }
  return register_pool(std::move(config), std::move(backend));
}

std::string PoolManager::register_pool(PoolConfig config, std::unique_ptr<ProviderBackend> backend) {
  if (pools_.contains(config.pool_id)) throw Error(ErrorCode::DuplicatePool, config.pool_id);
  check_credentials(config);
  if (config.capacity < 0) throw Error(ErrorCode::ValidationError, config.pool_id + ": capacity must be >= 0");
  if (backend->kind() != config.provider) throw Error(ErrorCode::ValidationError, "backend kind mismatch");

  std::unique_ptr<ResourcePool> pool;
  if (config.provider == ProviderKind::AzureSim) {
    pool = std::make_unique<AzureResourcePool>(
        config, std::unique_ptr<AzureBackend>(static_cast<AzureBackend*>(backend.release())));
  } else {
    pool = std::make_unique<Ec2ResourcePool>(config,
                                             std::unique_ptr<Ec2Backend>(static_cast<Ec2Backend*>(backend.release())));
  }
  const std::string id = config.pool_id;
  order_.push_back(id);
  pools_.emplace(id, Entry{PoolState{std::move(config), {}, {}}, std::move(pool)});
  return id;
}

PoolManager::Entry& PoolManager::entry(const std::string& pool_id) {
  auto it = pools_.find(pool_id);
  if (it == pools_.end()) throw Error(ErrorCode::UnknownPool, pool_id);
  return it->second;
}

Ticket PoolManager::provision_one(Entry& e) {
  const TicketId ticket{next_ticket_++};
  ++counters_.issued;
  const auto& cfg = e.state.config;
  NodeRecord& node = nodes_.create(cfg.pool_id, Role::Worker, kernel_.now());
  const NodeId id = node.node_id;
  e.state.pending.insert(ticket);

  auto base = Payload{}
                  .set("node", id)
                  .set("pool", cfg.pool_id)
                  .set("price", format_decimal(cfg.price_per_hour))
                  .set("provider", std::string(to_string(cfg.provider)))
                  .set("quantum", cfg.billing_quantum)
                  .set("ticket", static_cast<std::int64_t>(ticket.value));

  const auto outcome = e.pool->request_vm();
  if (!outcome.grant) {
    e.state.pending.erase(ticket);
    ++counters_.rejected;
    node = transition(node, LifecycleEvent::VmRejected);
    node.released_at = kernel_.now();
    kernel_.schedule(kernel_.now(), EventKind::ProvisionRejected, base.set("code", outcome.error_code));
    if (listener_.rejected) listener_.rejected(id, outcome.error_code);
    return Ticket{ticket, cfg.pool_id, id, true, outcome.error_code};
  }

  const auto& g = *outcome.grant;
  node = transition(node, LifecycleEvent::VmAccepted);
  node.network_id = g.network_id;
  node.private_ip = g.private_ip;
  node.public_ip = g.public_ip;
  if (cfg.network_mode == NetworkMode::Hybrid) node.open_ports.insert(kManagementPort);
  by_vm_[{cfg.pool_id, g.vm_id}] = id;
  vm_of_[id] = {ticket, g.vm_id};
  kernel_.schedule(kernel_.now(), EventKind::VmAccepted, base.set("vm", g.vm_id));
  return Ticket{ticket, cfg.pool_id, id, false, {}};
}

ProvisionOutcome PoolManager::provision(int count) {
  ProvisionOutcome out;
  for (int i = 0; i < count; ++i) {
    const auto states = snapshot();
    const auto chosen = strategy_->select(states);
    if (!chosen) {
      out.no_capacity = true;
      break;
    }
    out.tickets.push_back(provision_one(entry(*chosen)));
  }
  return out;
}

ProvisionOutcome PoolManager::provision_in(const std::string& pool_id, int count) {
  ProvisionOutcome out;
  Entry& e = entry(pool_id);
  for (int i = 0; i < count; ++i) {
    if (e.state.remaining() <= 0) {
      out.no_capacity = true;
      break;
    }
    out.tickets.push_back(provision_one(e));
  }
  return out;
}

void PoolManager::on_vm_ready(const SimEvent& ev) {
  const auto& pool_id = ev.payload.get("pool");
  const auto& vm = ev.payload.get("vm");
  auto pit = pools_.find(pool_id);
  if (pit == pools_.end()) return;
  pit->second.pool->backend().on_vm_ready(vm);

  auto it = by_vm_.find({pool_id, vm});
  if (it == by_vm_.end()) return;
  const NodeId id = it->second;
  const TicketId ticket = vm_of_.at(id).first;
  if (pit->second.state.pending.erase(ticket) == 0) return;  // failed while booting
  pit->second.state.active.insert(id);
  NodeRecord& node = nodes_.at(id);
  node = transition(node, LifecycleEvent::VmReady);
  node.ready_at = kernel_.now();
  if (listener_.ready) listener_.ready(id);
}

void PoolManager::on_terminated(const SimEvent& ev) {
  auto it = by_vm_.find({ev.payload.get("pool"), ev.payload.get("vm")});
  if (it == by_vm_.end()) return;
  const NodeId id = it->second;
  by_vm_.erase(it);
  NodeRecord& node = nodes_.at(id);
  if (node.vm_state != VmState::Releasing) return;  // crashed node cleanup
  entry(node.pool_id).state.active.erase(id);
  node = transition(node, LifecycleEvent::Terminated);
  node.released_at = kernel_.now();
  ++counters_.ended;
  if (listener_.terminated) listener_.terminated(id);
}

void PoolManager::release(NodeId id) {
  if (!nodes_.contains(id)) throw Error(ErrorCode::UnknownNode, to_string(id));
  NodeRecord& node = nodes_.at(id);
  if (node.role == Role::Master) throw Error(ErrorCode::RefusedMasterRelease, to_string(id));
  auto pit = pools_.find(node.pool_id);
  if (pit == pools_.end() || !pit->second.state.active.contains(id) || node.vm_state != VmState::Running)
    throw Error(ErrorCode::UnknownNode, to_string(id) + " is not an active worker");
  node = transition(node, LifecycleEvent::ReleaseRequested);
  kernel_.schedule(kernel_.now(), EventKind::ReleaseRequested, Payload{}.set("node", id).set("pool", node.pool_id));
  pit->second.pool->release_vm(vm_of_.at(id).second);
}

void PoolManager::fail(NodeId id) {
  NodeRecord& node = nodes_.at(id);
  if (node.role == Role::Master) throw Error(ErrorCode::RefusedMasterRelease, "master cannot be failed");
  auto& state = entry(node.pool_id).state;
  const auto [ticket, vm] = vm_of_.at(id);
  state.pending.erase(ticket);
  state.active.erase(id);
  node = transition(node, LifecycleEvent::Crashed);
  node.released_at = kernel_.now();
  ++counters_.ended;
  kernel_.schedule(kernel_.now(), EventKind::NodeFailed, Payload{}.set("node", id).set("pool", node.pool_id));
  // Reclaim the dead VM at the provider; its Terminated event is ignored.
  entry(node.pool_id).pool->release_vm(vm);
}

std::vector<PoolState> PoolManager::snapshot() const {
  std::vector<PoolState> out;
  out.reserve(order_.size());
  for (const auto& id : order_) out.push_back(pools_.at(id).state);
  return out;
}

const PoolState& PoolManager::pool(const std::string& pool_id) const {
  auto it = pools_.find(pool_id);
  if (it == pools_.end()) throw Error(ErrorCode::UnknownPool, pool_id);
  return it->second.state;
}

std::vector<std::string> PoolManager::pool_ids() const { return order_; }

int PoolManager::total_remaining() const {
  int total = 0;
  for (const auto& [id, e] : pools_) total += std::max(0, e.state.remaining());
  return total;
}

std::optional<TicketId> PoolManager::ticket_of(NodeId node) const {
  auto it = vm_of_.find(node);
  if (it == vm_of_.end()) return std::nullopt;
  return it->second.first;
}

std::optional<std::string> PoolManager::vm_of(NodeId node) const {
  auto it = vm_of_.find(node);
  if (it == vm_of_.end()) return std::nullopt;
  return it->second.second;
}

ProviderBackend& PoolManager::backend(const std::string& pool_id) { return entry(pool_id).pool->backend(); }

bool PoolManager::capacity_ok() const {
  return std::all_of(pools_.begin(), pools_.end(), [](const auto& kv) {
    const auto& s = kv.second.state;
    return static_cast<int>(s.active.size() + s.pending.size()) <= s.config.capacity;
  });
}

std::size_t PoolManager::pending_count() const {
  std::size_t n = 0;
  for (const auto& [id, e] : pools_) n += e.state.pending.size();
  return n;
}

std::size_t PoolManager::active_count() const {
  std::size_t n = 0;
  for (const auto& [id, e] : pools_) n += e.state.active.size();
  return n;
}

}  // namespace mcloud
