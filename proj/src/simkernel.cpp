#include "mcloud/simkernel.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace mcloud {

std::uint64_t SplitMix64::next() {
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 20> kKindNames{{
    {EventKind::AppSubmitted, "AppSubmitted"},
    {EventKind::VmAccepted, "VmAccepted"},
    {EventKind::ProvisionRejected, "ProvisionRejected"},
    {EventKind::VmReady, "VmReady"},
    {EventKind::ProbeFailed, "ProbeFailed"},
    {EventKind::InstallDone, "InstallDone"},
    {EventKind::ConfigDone, "ConfigDone"},
    {EventKind::ContainerStarted, "ContainerStarted"},
    {EventKind::ContainerStopped, "ContainerStopped"},
    {EventKind::Uninstalled, "Uninstalled"},
    {EventKind::TaskDispatched, "TaskDispatched"},
    {EventKind::TaskComplete, "TaskComplete"},
    {EventKind::InjectFault, "InjectFault"},
    {EventKind::NodeFailed, "NodeFailed"},
    {EventKind::EvalProvisioning, "EvalProvisioning"},
    {EventKind::ReleaseRequested, "ReleaseRequested"},
    {EventKind::Terminated, "Terminated"},
    {EventKind::AppCompleted, "AppCompleted"},
    {EventKind::AppFailed, "AppFailed"},
    {EventKind::Custom, "Custom"},
}};

bool clean_token(std::string_view s) { return s.find_first_of(",=\t\n\r") == std::string_view::npos; }

}  // namespace

std::string_view to_string(EventKind k) {
  for (const auto& [kind, name] : kKindNames)
    if (kind == k) return name;
  return "?";
}

std::optional<EventKind> parse_event_kind(std::string_view s) {
  for (const auto& [kind, name] : kKindNames)
    if (name == s) return kind;
  return std::nullopt;
}

Payload::Payload(std::initializer_list<std::pair<const std::string, std::string>> kv) {
  for (const auto& [k, v] : kv) set(k, v);
}

Payload& Payload::set(const std::string& key, std::string value) {
  if (key.empty() || !clean_token(key) || !clean_token(value))
    throw std::invalid_argument("payload token contains a reserved character: " + key);
  kv_[key] = std::move(value);
  return *this;
}

const std::string& Payload::get(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw std::out_of_range("payload has no key " + key);
  return it->second;
}

std::int64_t Payload::get_int(const std::string& key) const {
  const std::string& v = get(key);
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) throw std::invalid_argument("payload " + key + " not an integer");
  return out;
}

SimTime Payload::get_time(const std::string& key) const {
  auto t = parse_seconds(get(key));
  if (!t) throw std::invalid_argument("payload " + key + " not a time");
  return *t;
}

std::string Payload::encode() const {
  std::string out;
  for (const auto& [k, v] : kv_) {
    if (!out.empty()) out += ',';
    out += k;
    out += '=';
    out += v;
  }
  return out;
}

Payload Payload::decode(std::string_view text) {
  Payload p;
  while (!text.empty()) {
    const auto comma = text.find(',');
    std::string_view item = text.substr(0, comma);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::ParseError, "payload item without '=': " + std::string(item));
    p.set(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return p;
}

std::string trace_line(const SimEvent& e) {
  std::string line = format_seconds_fixed(e.time);
  line += '\t';
  line += std::to_string(e.seq);
  line += '\t';
  line += to_string(e.kind);
  line += '\t';
  line += e.payload.encode();
  return line;
}

void export_trace(std::ostream& out, const Trace& trace) {
  for (const auto& e : trace) out << trace_line(e) << '\n';
}

Trace parse_trace(std::istream& in) {
  Trace trace;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fail = [&](const char* why) {
      return Error(ErrorCode::ParseError, "trace line " + std::to_string(lineno) + ": " + why);
    };
    std::array<std::string_view, 4> fields{};
    std::string_view rest = line;
    for (std::size_t i = 0; i < 3; ++i) {
      const auto tab = rest.find('\t');
      if (tab == std::string_view::npos) throw fail("expected 4 tab-separated fields");
      fields[i] = rest.substr(0, tab);
      rest.remove_prefix(tab + 1);
    }
    fields[3] = rest;
    SimEvent e;
    auto t = parse_seconds(fields[0]);
    if (!t) throw fail("bad time");
    e.time = *t;
    auto [p, ec] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), e.seq);
    if (ec != std::errc{} || p != fields[1].data() + fields[1].size()) throw fail("bad seq");
    auto kind = parse_event_kind(fields[2]);
    if (!kind) throw fail("unknown event kind");
    e.kind = *kind;
    try {
      e.payload = Payload::decode(fields[3]);
    } catch (const std::invalid_argument&) {
      throw fail("bad payload");
    }
    trace.push_back(std::move(e));
  }
  return trace;
}

std::string trace_hash(const Trace& trace) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& e : trace) {
    feed(trace_line(e));
    feed("\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t Kernel::schedule(SimTime at, EventKind kind, Payload payload) {
  if (at < now_) {
    throw Error(ErrorCode::TimeTravel,
                "event at " + format_seconds(at) + " s scheduled when now = " + format_seconds(now_) + " s");
  }
  const std::uint64_t seq = next_seq_++;
  queue_.push(SimEvent{at, seq, kind, std::move(payload)});
  live_.insert(seq);
  return seq;
}

bool Kernel::cancel(std::uint64_t event_id) {
  if (live_.erase(event_id) == 0) return false;
  ++cancelled_count_;
  return true;
}

void Kernel::on(EventKind kind, Handler handler) { handlers_[kind].push_back(std::move(handler)); }

void Kernel::add_observer(Handler observer) { observers_.push_back(std::move(observer)); }

Trace Kernel::run_until(std::optional<SimTime> horizon, const std::function<bool(const SimEvent&)>& stop) {
  Trace processed;
  while (!queue_.empty()) {
    if (!live_.contains(queue_.top().seq)) {
      queue_.pop();
      continue;
    }
    if (horizon && queue_.top().time > *horizon) {
      now_ = *horizon;
      return processed;
    }
    SimEvent e = queue_.top();
    queue_.pop();
    live_.erase(e.seq);
    now_ = e.time;
    trace_.push_back(e);
    processed.push_back(e);
    if (auto it = handlers_.find(e.kind); it != handlers_.end()) {
      for (const auto& h : it->second) h(e);
    }
    for (const auto& o : observers_) o(e);
    if (stop && stop(e)) return processed;
  }
  return processed;
}

double Kernel::rand_uniform(double lo, double hi) {
  if (lo == hi) return lo;
  return lo + (hi - lo) * rng_.next_unit();
}

}  // namespace mcloud
