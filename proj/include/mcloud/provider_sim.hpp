#pragma once

// Deterministic simulated IaaS backends behind the canonical wire protocol.
//
// Azure-style routes (every request carries subscription_id + certificate_token):
//   POST   /storages                 {name}
//   GET    /storages/<name>
//   DELETE /storages/<name>
//   POST   /services                 {name, region}
//   GET    /services/<name>
//   DELETE /services/<name>
//   POST   /services/<name>/vms      {storage, template}
//   GET    /vms/<id>
//   DELETE /vms/<id>
//
// EC2-style routes (every request carries access_key + secret_key):
//   POST   /instances                {template}
//   GET    /instances/<id>
//   DELETE /instances/<id>
//
// VM creation answers immediately with state=Booting and schedules a kernel
// VmReady event {pool, vm} after the boot latency; deletion removes the VM from
// the resource graph at once and schedules Terminated {pool, vm} at now.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include "mcloud/core.hpp"
#include "mcloud/simkernel.hpp"
#include "mcloud/wire.hpp"

namespace mcloud {

/// Hands out globally unique public addresses across every backend of one experiment.
class PublicIpAllocator {
 public:
  std::string allocate();

 private:
  std::uint32_t next_ = 1;
};

struct BootTiming {
  SimTime latency;
  SimTime jitter;  // uniform extra in [0, jitter]
};

enum class VmPhase { Booting, Running };

class ProviderBackend {
 public:
  /// `name` is the owning pool id; it tags every event this backend schedules.
  ProviderBackend(Kernel& kernel, std::string name, BootTiming timing, PublicIpAllocator& ips);
  virtual ~ProviderBackend() = default;
  ProviderBackend(const ProviderBackend&) = delete;
  ProviderBackend& operator=(const ProviderBackend&) = delete;

  virtual ProviderKind kind() const = 0;
  virtual wire::Response handle(const wire::Request& request) = 0;
  /// Byte-level entry point: undecodable input yields ERROR MALFORMED_DOC.
  std::string handle_bytes(std::string_view request);
  /// Referential integrity of the resource graph.
  virtual bool integrity_ok() const = 0;

  const std::string& name() const { return name_; }

  /// Completes a boot; the owner routes this backend's VmReady events here.
  /// A VM deleted while booting never becomes Running.
  virtual void on_vm_ready(const std::string& vm_id) = 0;

 protected:
  SimTime draw_boot_delay();
  void schedule_ready(const std::string& vm_id);
  void schedule_terminated(const std::string& vm_id);

  Kernel& kernel_;
  std::string name_;
  BootTiming timing_;
  PublicIpAllocator& ips_;
};

struct AzureCredentials {
  std::string subscription_id;
  std::string certificate_token;
};

struct AzureServiceState {
  std::string region;
  std::string public_ip;
  std::uint32_t subnet = 0;
  std::uint32_t next_host = 4;
  std::set<std::string> vms;
};

struct AzureVmState {
  std::string service;
  std::string storage;
  std::string tmpl;
  VmPhase phase = VmPhase::Booting;
  std::string private_ip;
};

struct AzureAccountState {
  std::set<std::string> storages;
  std::map<std::string, AzureServiceState> cloud_services;
  std::map<std::string, AzureVmState> vms;
};

class AzureBackend final : public ProviderBackend {
 public:
  AzureBackend(Kernel& kernel, std::string name, AzureCredentials account, BootTiming timing,
               PublicIpAllocator& ips);

  ProviderKind kind() const override { return ProviderKind::AzureSim; }
  wire::Response handle(const wire::Request& request) override;
  bool integrity_ok() const override;

  const AzureAccountState& state() const { return state_; }
  std::string network_id(const std::string& service) const;
  void on_vm_ready(const std::string& vm_id) override;

 private:
  wire::Response create_storage(const wire::Body& body);
  wire::Response create_service(const wire::Body& body);
  wire::Response create_vm(const std::string& service, const wire::Body& body);
  wire::Response describe_vm(const std::string& id) const;
  wire::Response delete_vm(const std::string& id);

  AzureCredentials account_;
  AzureAccountState state_;
  std::uint32_t next_vm_ = 1;
  std::uint32_t next_subnet_ = 1;
};

struct Ec2Credentials {
  std::string access_key;
  std::string secret_key;
};

struct Ec2InstanceState {
  std::string tmpl;
  VmPhase phase = VmPhase::Booting;
  std::string private_ip;
  std::string public_ip;
};

class Ec2Backend final : public ProviderBackend {
 public:
  Ec2Backend(Kernel& kernel, std::string name, Ec2Credentials account, std::string region, BootTiming timing,
             PublicIpAllocator& ips);

  ProviderKind kind() const override { return ProviderKind::Ec2Sim; }
  wire::Response handle(const wire::Request& request) override;
  bool integrity_ok() const override;

  const std::map<std::string, Ec2InstanceState>& instances() const { return instances_; }
  std::string network_id() const;
  void on_vm_ready(const std::string& vm_id) override;

 private:
  wire::Response describe(const std::string& id) const;

  Ec2Credentials account_;
  std::string region_;
  std::map<std::string, Ec2InstanceState> instances_;
  std::uint32_t next_instance_ = 1;
  std::uint32_t next_host_ = 10;
};

}  // namespace mcloud
