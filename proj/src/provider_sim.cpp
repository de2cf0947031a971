#include "mcloud/provider_sim.hpp"

#include <cstdio>
#include <vector>

namespace mcloud {

using wire::Body;
using wire::Request;
using wire::Response;
using wire::Verb;
namespace codes = wire::codes;

namespace {

std::string dotted(std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", a, b, c, d);
  return buf;
}

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  if (path.starts_with('/')) path.remove_prefix(1);
  while (!path.empty()) {
    const auto slash = path.find('/');
    parts.push_back(path.substr(0, slash));
    if (slash == std::string_view::npos) break;
    path.remove_prefix(slash + 1);
  }
  return parts;
}

const std::string* field(const Body& body, const char* key) {
  auto it = body.find(key);
  return it == body.end() || it->second.empty() ? nullptr : &it->second;
}

Response error(std::string_view code) { return Response::error(std::string(code)); }

const char* phase_name(VmPhase p) { return p == VmPhase::Booting ? "Booting" : "Running"; }

}  // namespace

std::string PublicIpAllocator::allocate() {
  const std::uint32_t n = next_++;
  return dotted(100, 64 + ((n >> 16) & 0x3f), (n >> 8) & 0xff, n & 0xff);
}

ProviderBackend::ProviderBackend(Kernel& kernel, std::string name, BootTiming timing, PublicIpAllocator& ips)
    : kernel_(kernel), name_(std::move(name)), timing_(timing), ips_(ips) {}

std::string ProviderBackend::handle_bytes(std::string_view request) {
  Request decoded;
  try {
    decoded = wire::decode_request(request);
  } catch (const Error&) {
    return wire::encode(error(codes::kMalformedDoc));
  }
  return wire::encode(handle(decoded));
}

SimTime ProviderBackend::draw_boot_delay() {
  if (timing_.jitter == SimTime::zero()) return timing_.latency;
  const double extra = kernel_.rand_uniform(0.0, static_cast<double>(timing_.jitter.count()));
  return timing_.latency + SimTime::micros(static_cast<std::int64_t>(extra));
}

void ProviderBackend::schedule_ready(const std::string& vm_id) {
  kernel_.schedule_after(draw_boot_delay(), EventKind::VmReady, Payload{{"pool", name_}, {"vm", vm_id}});
}

void ProviderBackend::schedule_terminated(const std::string& vm_id) {
  kernel_.schedule(kernel_.now(), EventKind::Terminated, Payload{{"pool", name_}, {"vm", vm_id}});
}

// ---------------------------------------------------------------------------
// Azure

AzureBackend::AzureBackend(Kernel& kernel, std::string name, AzureCredentials account, BootTiming timing,
                           PublicIpAllocator& ips)
    : ProviderBackend(kernel, std::move(name), timing, ips), account_(std::move(account)) {}

std::string AzureBackend::network_id(const std::string& service) const { return "azure/" + name_ + "/" + service; }

Response AzureBackend::handle(const Request& request) {
  const auto* sub = field(request.body, "subscription_id");
  const auto* cert = field(request.body, "certificate_token");
  const auto parts = split_path(request.path);
  const bool known_root = !parts.empty() && (parts[0] == "storages" || parts[0] == "services" || parts[0] == "vms");
  if (!known_root) return error(codes::kBadRoute);
  if (!sub || !cert || *sub != account_.subscription_id || *cert != account_.certificate_token)
    return error(codes::kAuthFailed);

  const auto n = parts.size();
  const auto v = request.verb;
  if (parts[0] == "storages") {
    if (n == 1 && v == Verb::Post) return create_storage(request.body);
    if (n == 2) {
      const std::string name(parts[1]);
      if (!state_.storages.contains(name)) return error(codes::kNotFound);
      if (v == Verb::Get) return Response::ok({{"name", name}});
      if (v == Verb::Delete) {
        for (const auto& [id, vm] : state_.vms)
          if (vm.storage == name) return error(codes::kInUse);
        state_.storages.erase(name);
        return Response::ok();
      }
    }
  } else if (parts[0] == "services") {
    if (n == 1 && v == Verb::Post) return create_service(request.body);
    if (n == 2) {
      const std::string name(parts[1]);
      auto it = state_.cloud_services.find(name);
      if (it == state_.cloud_services.end()) return error(codes::kNotFound);
      if (v == Verb::Get) {
        std::string vms;
        for (const auto& id : it->second.vms) vms += (vms.empty() ? "" : ",") + id;
        return Response::ok({{"name", name}, {"public_ip", it->second.public_ip}, {"region", it->second.region},
                             {"vms", vms}});
      }
      if (v == Verb::Delete) {
        if (!it->second.vms.empty()) return error(codes::kInUse);
        state_.cloud_services.erase(it);
        return Response::ok();
      }
    }
    if (n == 3 && parts[2] == "vms" && v == Verb::Post) return create_vm(std::string(parts[1]), request.body);
  } else if (parts[0] == "vms" && n == 2) {
    if (v == Verb::Get) return describe_vm(std::string(parts[1]));
    if (v == Verb::Delete) return delete_vm(std::string(parts[1]));
  }
  return error(codes::kBadRoute);
}

Response AzureBackend::create_storage(const Body& body) {
  const auto* name = field(body, "name");
  if (!name) return error(codes::kBadRequest);
  if (!state_.storages.insert(*name).second) return error(codes::kStorageExists);
  return Response::ok({{"name", *name}});
}

Response AzureBackend::create_service(const Body& body) {
  const auto* name = field(body, "name");
  const auto* region = field(body, "region");
  if (!name || !region) return error(codes::kBadRequest);
  if (state_.cloud_services.contains(*name)) return error(codes::kServiceExists);
  AzureServiceState svc;
  svc.region = *region;
  svc.public_ip = ips_.allocate();
  svc.subnet = next_subnet_++;
  auto& stored = state_.cloud_services.emplace(*name, std::move(svc)).first->second;
  return Response::ok({{"name", *name}, {"public_ip", stored.public_ip}, {"region", stored.region}});
}

Response AzureBackend::create_vm(const std::string& service, const Body& body) {
  const auto* storage = field(body, "storage");
  const auto* tmpl = field(body, "template");
  if (!storage || !tmpl) return error(codes::kBadRequest);
  auto svc = state_.cloud_services.find(service);
  if (svc == state_.cloud_services.end()) return error(codes::kServiceNotFound);
  if (!state_.storages.contains(*storage)) return error(codes::kStorageNotFound);

  const std::string id = "vm-" + std::to_string(next_vm_++);
  AzureVmState vm;
  vm.service = service;
  vm.storage = *storage;
  vm.tmpl = *tmpl;
  const std::uint32_t host = svc->second.next_host++;
  vm.private_ip = dotted(10, (svc->second.subnet >> 8) & 0xff, svc->second.subnet & 0xff, host);
  svc->second.vms.insert(id);
  const std::string private_ip = vm.private_ip;
  state_.vms.emplace(id, std::move(vm));
  schedule_ready(id);
  return Response::ok({{"network_id", network_id(service)},
                       {"private_ip", private_ip},
                       {"public_ip", svc->second.public_ip},
                       {"state", "Booting"},
                       {"vm_id", id}});
}

Response AzureBackend::describe_vm(const std::string& id) const {
  auto it = state_.vms.find(id);
  if (it == state_.vms.end()) return error(codes::kNotFound);
  const auto& vm = it->second;
  return Response::ok({{"network_id", network_id(vm.service)},
                       {"private_ip", vm.private_ip},
                       {"public_ip", state_.cloud_services.at(vm.service).public_ip},
                       {"service", vm.service},
                       {"state", phase_name(vm.phase)},
                       {"storage", vm.storage},
                       {"template", vm.tmpl},
                       {"vm_id", id}});
}

Response AzureBackend::delete_vm(const std::string& id) {
  auto it = state_.vms.find(id);
  if (it == state_.vms.end()) return error(codes::kNotFound);
  state_.cloud_services.at(it->second.service).vms.erase(id);
  state_.vms.erase(it);
  schedule_terminated(id);
  return Response::ok();
}

void AzureBackend::on_vm_ready(const std::string& vm_id) {
  if (auto it = state_.vms.find(vm_id); it != state_.vms.end()) it->second.phase = VmPhase::Running;
}

bool AzureBackend::integrity_ok() const {
  std::set<std::string> public_ips;
  for (const auto& [name, svc] : state_.cloud_services) {
    if (!public_ips.insert(svc.public_ip).second) return false;
    for (const auto& id : svc.vms) {
      auto vm = state_.vms.find(id);
      if (vm == state_.vms.end() || vm->second.service != name) return false;
    }
  }
  for (const auto& [id, vm] : state_.vms) {
    auto svc = state_.cloud_services.find(vm.service);
    if (svc == state_.cloud_services.end() || !svc->second.vms.contains(id)) return false;
    if (!state_.storages.contains(vm.storage)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// EC2

Ec2Backend::Ec2Backend(Kernel& kernel, std::string name, Ec2Credentials account, std::string region,
                       BootTiming timing, PublicIpAllocator& ips)
    : ProviderBackend(kernel, std::move(name), timing, ips), account_(std::move(account)), region_(std::move(region)) {}

std::string Ec2Backend::network_id() const { return "ec2/" + name_ + "/" + region_; }

Response Ec2Backend::handle(const Request& request) {
  const auto parts = split_path(request.path);
  if (parts.empty() || parts[0] != "instances" || parts.size() > 2) return error(codes::kBadRoute);
  const auto* access = field(request.body, "access_key");
  const auto* secret = field(request.body, "secret_key");
  if (!access || !secret || *access != account_.access_key || *secret != account_.secret_key)
    return error(codes::kAuthFailed);

  if (parts.size() == 1 && request.verb == Verb::Post) {
    const auto* tmpl = field(request.body, "template");
    if (!tmpl) return error(codes::kBadRequest);
    char id[16];
    std::snprintf(id, sizeof id, "i-%08x", next_instance_++);
    Ec2InstanceState inst;
    inst.tmpl = *tmpl;
    const std::uint32_t host = next_host_++;
    inst.private_ip = dotted(172, 31, (host >> 8) & 0xff, host & 0xff);
    inst.public_ip = ips_.allocate();
    instances_.emplace(id, inst);
    schedule_ready(id);
    return Response::ok({{"instance_id", id},
                         {"network_id", network_id()},
                         {"private_ip", inst.private_ip},
                         {"public_ip", inst.public_ip},
                         {"state", "Booting"}});
  }
  if (parts.size() == 2) {
    const std::string id(parts[1]);
    if (request.verb == Verb::Get) return describe(id);
    if (request.verb == Verb::Delete) {
      if (instances_.erase(id) == 0) return error(codes::kNotFound);
      schedule_terminated(id);
      return Response::ok();
    }
  }
  return error(codes::kBadRoute);
}

Response Ec2Backend::describe(const std::string& id) const {
  auto it = instances_.find(id);
  if (it == instances_.end()) return error(codes::kNotFound);
  return Response::ok({{"instance_id", id},
                       {"network_id", network_id()},
                       {"private_ip", it->second.private_ip},
                       {"public_ip", it->second.public_ip},
                       {"state", phase_name(it->second.phase)},
                       {"template", it->second.tmpl}});
}

void Ec2Backend::on_vm_ready(const std::string& vm_id) {
  if (auto it = instances_.find(vm_id); it != instances_.end()) it->second.phase = VmPhase::Running;
}

bool Ec2Backend::integrity_ok() const {
  std::set<std::string> public_ips, private_ips;
  for (const auto& [id, inst] : instances_) {
    if (!public_ips.insert(inst.public_ip).second) return false;
    if (!private_ips.insert(inst.private_ip).second) return false;
  }
  return true;
}

}  // namespace mcloud
