#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mcloud/experiment.hpp"

namespace mcloud {

namespace {

struct Entry {
  std::string key;
  std::string value;
  int line = 0;
};

struct Section {
  std::string name;
  int line = 0;
  std::vector<Entry> entries;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void parse_error(int line, const std::string& what) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::ValidationError, field + ": " + what);
}

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  return true;
}

std::vector<Section> tokenize(std::istream& in) {
  std::vector<Section> sections;
  std::set<std::string> seen;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string text = trim(raw);
    if (text.empty() || text[0] == '#' || text[0] == ';') continue;
    if (text.front() == '[') {
      if (text.back() != ']') parse_error(line, "unterminated section header");
      std::string name = trim(std::string_view(text).substr(1, text.size() - 2));
      if (!is_identifier(name)) parse_error(line, "bad section name '" + name + "'");
      if (!seen.insert(name).second) parse_error(line, "duplicate section [" + name + "]");
      sections.push_back({std::move(name), line, {}});
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) parse_error(line, "expected 'key = value'");
    if (sections.empty()) parse_error(line, "key outside of a section");
    std::string key = trim(std::string_view(text).substr(0, eq));
    std::string value = trim(std::string_view(text).substr(eq + 1));
    if (!is_identifier(key)) parse_error(line, "bad key '" + key + "'");
    auto& s = sections.back();
    if (key != "script.set") {
      for (const auto& e : s.entries)
        if (e.key == key) parse_error(line, "duplicate key '" + key + "' in [" + s.name + "]");
    }
    s.entries.push_back({std::move(key), std::move(value), line});
  }
  return sections;
}

class Reader {
 public:
  Reader(const Section& s, std::string prefix) : section_(s), prefix_(std::move(prefix)) {}

  std::string field(const std::string& key) const { return prefix_ + "." + key; }

  const Entry* find(const std::string& key) {
    known_.insert(key);
    for (const auto& e : section_.entries)
      if (e.key == key) return &e;
    return nullptr;
  }

  std::vector<const Entry*> all(const std::string& key) {
    known_.insert(key);
    std::vector<const Entry*> out;
    for (const auto& e : section_.entries)
      if (e.key == key) out.push_back(&e);
    return out;
  }

  std::optional<std::string> str(const std::string& key) {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    if (e->value.empty()) invalid(field(key), "empty value");
    return e->value;
  }

  template <class Int>
  std::optional<Int> integer(const std::string& key) {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    Int v{};
    const auto* end = e->value.data() + e->value.size();
    auto [p, ec] = std::from_chars(e->value.data(), end, v);
    if (ec != std::errc() || p != end) invalid(field(key), "expected an integer, got '" + e->value + "'");
    return v;
  }

  std::optional<double> number(const std::string& key) {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    try {
      std::size_t used = 0;
      const double v = std::stod(e->value, &used);
      if (used == e->value.size()) return v;
    } catch (const std::exception&) {
    }
    invalid(field(key), "expected a number, got '" + e->value + "'");
  }

  std::optional<SimTime> seconds(const std::string& key) {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    auto t = parse_seconds(e->value);
    if (!t) invalid(field(key), "expected nonnegative seconds with at most 6 decimals, got '" + e->value + "'");
    return t;
  }

  template <class Enum>
  std::optional<Enum> choice(const std::string& key, const std::map<std::string, Enum>& options) {
    auto v = str(key);
    if (!v) return std::nullopt;
    auto it = options.find(*v);
    if (it == options.end()) {
      std::string names;
      for (const auto& [n, e] : options) names += (names.empty() ? "" : "|") + n;
      invalid(field(key), "expected " + names + ", got '" + *v + "'");
    }
    return it->second;
  }

  void reject_unknown() const {
    for (const auto& e : section_.entries)
      if (!known_.contains(e.key))
        invalid(field(e.key), "unknown key (line " + std::to_string(e.line) + ")");
  }

 private:
  const Section& section_;
  std::string prefix_;
  std::set<std::string> known_;
};

PoolConfig read_pool(const Section& s) {
  PoolConfig p;
  p.pool_id = s.name.substr(5);
  if (p.pool_id.empty()) parse_error(s.line, "empty pool id");
  Reader r(s, "pool." + p.pool_id);

  const auto provider =
      r.choice<ProviderKind>("provider", {{"azure", ProviderKind::AzureSim}, {"ec2", ProviderKind::Ec2Sim}});
  if (!provider) invalid(r.field("provider"), "required");
  p.provider = *provider;

  const auto capacity = r.integer<int>("capacity");
  if (!capacity) invalid(r.field("capacity"), "required");
  if (*capacity < 0) invalid(r.field("capacity"), "must be >= 0");
  p.capacity = *capacity;
  p.priority = r.integer<int>("priority").value_or(0);
  p.price_per_hour = r.number("price_per_hour").value_or(0.0);
  if (p.price_per_hour < 0) invalid(r.field("price_per_hour"), "must be >= 0");
  if (auto v = r.str("region")) p.region = *v;
  if (auto v = r.str("template")) p.vm_template = *v;
  p.network_mode = r.choice<NetworkMode>("network", {{"private", NetworkMode::Private}, {"hybrid", NetworkMode::Hybrid}})
                       .value_or(NetworkMode::Hybrid);
  p.boot_latency = r.seconds("boot_latency_s").value_or(SimTime::zero());
  p.boot_jitter = r.seconds("boot_jitter_s").value_or(SimTime::zero());
  p.install_latency = r.seconds("install_latency_s").value_or(SimTime::zero());
  p.install_flavor =
      r.choice<InstallFlavor>("image", {{"full", InstallFlavor::Full}, {"preconfigured", InstallFlavor::Preconfigured}})
          .value_or(InstallFlavor::Full);
  p.image_config_latency = r.seconds("image_config_latency_s").value_or(SimTime::zero());
  p.billing_quantum = r.seconds("billing_quantum_s").value_or(SimTime::seconds(3600));
  if (p.billing_quantum <= SimTime::zero()) invalid(r.field("billing_quantum_s"), "must be > 0");

  const auto sub = r.str("subscription_id");
  const auto cert = r.str("certificate_token");
  const auto access = r.str("access_key");
  const auto secret = r.str("secret_key");
  const auto storage = r.str("storage");
  const auto service = r.str("service");
  if (p.provider == ProviderKind::AzureSim) {
    if (access || secret) invalid(r.field("access_key"), "not valid for an azure pool");
    p.credentials = AzureCredentials{sub.value_or(""), cert.value_or("")};
    p.storage = storage;
    p.service = service;
  } else {
    if (sub || cert) invalid(r.field("subscription_id"), "not valid for an ec2 pool");
    if (storage || service) invalid(r.field("storage"), "not valid for an ec2 pool");
    p.credentials = Ec2Credentials{access.value_or(""), secret.value_or("")};
  }
  try {
    check_credentials(p);
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedCredentials, r.field("credentials") + ": " + e.what());
  }

  const auto script_name = r.str("script.name");
  const auto script_delay = r.seconds("script.delay_s");
  const auto sets = r.all("script.set");
  if (script_name || script_delay || !sets.empty()) {
    InstallScript script;
    script.name = script_name.value_or(p.pool_id + "-script");
    script.delay = script_delay.value_or(SimTime::zero());
    for (const Entry* e : sets) {
      const auto eq = e->value.find('=');
      if (eq == std::string::npos) invalid(r.field("script.set"), "expected key=value, got '" + e->value + "'");
      script.mutations.emplace_back(trim(std::string_view(e->value).substr(0, eq)),
                                    trim(std::string_view(e->value).substr(eq + 1)));
    }
    try {
      validate_script(script);
    } catch (const Error& e) {
      invalid(r.field("script.set"), e.what());
    }
    p.custom_script = std::move(script);
  }
  r.reject_unknown();
  return p;
}

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
  const auto sections = tokenize(in);
  ExperimentConfig c;
  bool have_app = false;
  std::optional<SimTime> est;

  for (const auto& s : sections) {
    if (s.name.rfind("pool.", 0) == 0) {
      c.pools.push_back(read_pool(s));
      continue;
    }
    Reader r(s, s.name);
    if (s.name == "experiment") {
      c.mode = r.choice<CloudMode>("mode", {{"static", CloudMode::Static}, {"dynamic", CloudMode::Dynamic}})
                   .value_or(CloudMode::Static);
      c.seed = r.integer<std::uint64_t>("seed").value_or(0);
      c.horizon = r.seconds("horizon_s").value_or(c.horizon);
      if (c.horizon <= SimTime::zero()) invalid("experiment.horizon_s", "must be > 0");
    } else if (s.name == "application") {
      have_app = true;
      auto& a = c.application;
      if (auto v = r.str("id")) a.app_id = *v;
      const auto tasks = r.integer<int>("tasks");
      if (!tasks) invalid("application.tasks", "required");
      if (*tasks <= 0) invalid("application.tasks", "must be > 0");
      a.tasks = *tasks;
      const auto d = r.seconds("task_duration_s");
      if (!d) invalid("application.task_duration_s", "required");
      if (*d <= SimTime::zero()) invalid("application.task_duration_s", "must be > 0");
      a.task_duration = *d;
      a.task_jitter = r.seconds("task_jitter_s").value_or(SimTime::zero());
      if (a.task_jitter >= a.task_duration) invalid("application.task_jitter_s", "must be < task_duration_s");
      a.deadline = r.seconds("deadline_s");
      if (a.deadline && *a.deadline <= SimTime::zero()) invalid("application.deadline_s", "must be > 0");
      a.max_retries = r.integer<int>("max_retries").value_or(0);
      if (a.max_retries < 0) invalid("application.max_retries", "must be >= 0");
    } else if (s.name == "scheduler") {
      SchedulerConfig sc;
      const auto algo = r.choice<Algorithm>(
          "algorithm", {{"fixed_queue", Algorithm::FixedQueue}, {"deadline_priority", Algorithm::DeadlinePriority}});
      if (!algo) invalid("scheduler.algorithm", "required");
      sc.algorithm = *algo;
      sc.queue_threshold = r.integer<int>("queue_threshold").value_or(1);
      est = r.seconds("est_task_time_s");
      sc.provision_overhead = r.seconds("provision_overhead_s").value_or(SimTime::zero());
      sc.eval_period = r.seconds("eval_period_s").value_or(sc.eval_period);
      sc.idle_release = r.seconds("idle_release_s").value_or(SimTime::zero());
      if (auto v = r.str("strategy")) c.strategy = *v;
      c.scheduler = sc;
    } else if (s.name == "static") {
      for (const auto& e : s.entries) {
        r.find(e.key);
        int n = 0;
        const auto* end = e.value.data() + e.value.size();
        auto [p, ec] = std::from_chars(e.value.data(), end, n);
        if (ec != std::errc() || p != end || n < 0) invalid("static." + e.key, "expected a worker count >= 0");
        c.static_allocation.emplace_back(e.key, n);
      }
    } else if (s.name == "master") {
      if (auto v = r.str("network_id")) c.master.network_id = *v;
      if (auto v = r.str("private_ip")) c.master.private_ip = *v;
      if (auto v = r.str("public_ip")) c.master.public_ip = *v;
    } else if (s.name == "repository") {
      c.repository.kind =
          r.choice<RepositoryKind>("kind", {{"shared", RepositoryKind::SharedPath}, {"ftp", RepositoryKind::RemoteFtp}})
              .value_or(RepositoryKind::RemoteFtp);
      if (auto v = r.str("address")) c.repository.address = *v;
      if (auto v = r.str("network_id")) c.repository.network_id = *v;
    } else if (s.name == "faults") {
      c.faults.count = r.integer<int>("count").value_or(0);
      if (c.faults.count < 0) invalid("faults.count", "must be >= 0");
      c.faults.window = r.seconds("window_s").value_or(SimTime::zero());
    } else {
      parse_error(s.line, "unknown section [" + s.name + "]");
    }
    r.reject_unknown();
  }

  if (!have_app) invalid("application", "section required");
  if (c.scheduler) c.scheduler->est_task_time = est.value_or(c.application.task_duration);
  validate(c);
  return c;
}

ExperimentConfig parse_config_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_config(in);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  return parse_config(in);
}

void validate(const ExperimentConfig& c) {
  if (c.pools.empty()) invalid("pool", "at least one [pool.<id>] section required");
  std::set<std::string> ids;
  for (const auto& p : c.pools) {
    if (!ids.insert(p.pool_id).second) invalid("pool." + p.pool_id, "duplicate pool");
    if (p.capacity < 0) invalid("pool." + p.pool_id + ".capacity", "must be >= 0");
  }
  if (c.application.tasks <= 0) invalid("application.tasks", "must be > 0");
  if (c.application.task_duration <= SimTime::zero()) invalid("application.task_duration_s", "must be > 0");

  if (c.mode == CloudMode::Static) {
    if (c.static_allocation.empty()) invalid("static", "static mode requires a [static] allocation");
    std::set<std::string> seen;
    for (const auto& [pool, n] : c.static_allocation) {
      if (!ids.contains(pool)) invalid("static." + pool, "unknown pool");
      if (!seen.insert(pool).second) invalid("static." + pool, "duplicate entry");
      for (const auto& p : c.pools)
        if (p.pool_id == pool && n > p.capacity) invalid("static." + pool, "exceeds pool capacity");
    }
  } else {
    if (!c.scheduler) invalid("scheduler.algorithm", "dynamic mode requires a [scheduler] algorithm");
    if (c.scheduler->algorithm == Algorithm::DeadlinePriority && !c.application.deadline)
      invalid("application.deadline_s", "required by deadline_priority");
  }
  if (c.scheduler) {
    try {
      validate(*c.scheduler);
    } catch (const Error& e) {
      invalid("scheduler", e.what());
    }
  }
  try {
    StrategyRegistry::global().make(c.strategy);
  } catch (const Error&) {
    invalid("scheduler.strategy", "unknown strategy '" + c.strategy + "'");
  }
}

}  // namespace mcloud
