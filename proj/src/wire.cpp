#include "mcloud/wire.hpp"

#include <vector>

#include "mcloud/core.hpp"

namespace mcloud::wire {
namespace {

[[noreturn]] void malformed(const std::string& why) { throw Error(ErrorCode::MalformedDoc, why); }

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    if (c < 0x80) extra = 0;
    else if ((c & 0xE0) == 0xC0 && c >= 0xC2) extra = 1;
    else if ((c & 0xF0) == 0xE0) extra = 2;
    else if ((c & 0xF8) == 0xF0 && c <= 0xF4) extra = 3;
    else return false;
    if (i + extra >= s.size() && extra > 0) return false;
    for (std::size_t k = 1; k <= extra; ++k)
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
    i += extra + 1;
  }
  return true;
}

void check_pair(const std::string& key, const std::string& value) {
  if (key.empty()) malformed("empty key");
  if (key.find_first_of("=\n") != std::string::npos) malformed("key contains '=' or newline: " + key);
  if (value.find('\n') != std::string::npos) malformed("value contains newline for key " + key);
}

void append_body(std::string& out, const Body& body) {
  for (const auto& [k, v] : body) {
    check_pair(k, v);
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
}

/// Splits into lines; the document must end with an empty terminator line and
/// nothing may follow it.
std::vector<std::string_view> split_document(std::string_view text) {
  if (!valid_utf8(text)) malformed("not UTF-8");
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    if (nl == std::string_view::npos) malformed("unterminated line");
    lines.push_back(text.substr(0, nl));
    text.remove_prefix(nl + 1);
  }
  if (lines.empty() || !lines.back().empty()) malformed("missing blank terminator line");
  lines.pop_back();
  for (auto l : lines)
    if (l.empty()) malformed("blank line before terminator");
  return lines;
}

Body parse_body(const std::vector<std::string_view>& lines, std::size_t first) {
  Body body;
  std::string_view prev;
  for (std::size_t i = first; i < lines.size(); ++i) {
    const auto line = lines[i];
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || eq == 0) malformed("bad body line: " + std::string(line));
    const auto key = line.substr(0, eq);
    if (i > first && !(prev < key)) malformed("body keys not strictly ascending at " + std::string(key));
    prev = key;
    body.emplace(std::string(key), std::string(line.substr(eq + 1)));
  }
  return body;
}

}  // namespace

std::string_view to_string(Verb v) {
  switch (v) {
    case Verb::Get: return "GET";
    case Verb::Post: return "POST";
    case Verb::Delete: return "DELETE";
  }
  return "?";
}

std::string encode(const Request& r) {
  if (r.path.empty() || r.path.front() != '/' || r.path.find_first_of(" \n") != std::string::npos)
    malformed("bad path: " + r.path);
  std::string out(to_string(r.verb));
  out += ' ';
  out += r.path;
  out += '\n';
  append_body(out, r.body);
  out += '\n';
  return out;
}

std::string encode(const Response& r) {
  std::string out = r.status == Status::Ok ? "status=OK\n" : "status=ERROR\n";
  if ((r.status == Status::Error) == r.code.empty()) malformed("code must be present exactly for ERROR responses");
  if (!r.code.empty()) {
    check_pair("code", r.code);
    out += "code=" + r.code + '\n';
  }
  if (r.body.contains("status") || r.body.contains("code")) malformed("reserved key in response body");
  append_body(out, r.body);
  out += '\n';
  return out;
}

Request decode_request(std::string_view text) {
  const auto lines = split_document(text);
  if (lines.empty()) malformed("missing request line");
  const auto head = lines.front();
  const auto sp = head.find(' ');
  if (sp == std::string_view::npos) malformed("bad request line");
  const auto verb = head.substr(0, sp);
  Request r;
  if (verb == "GET") r.verb = Verb::Get;
  else if (verb == "POST") r.verb = Verb::Post;
  else if (verb == "DELETE") r.verb = Verb::Delete;
  else malformed("unknown verb: " + std::string(verb));
  r.path = std::string(head.substr(sp + 1));
  if (r.path.empty() || r.path.front() != '/' || r.path.find(' ') != std::string::npos) malformed("bad path");
  r.body = parse_body(lines, 1);
  return r;
}

Response decode_response(std::string_view text) {
  const auto lines = split_document(text);
  if (lines.empty()) malformed("missing status line");
  Response r;
  if (lines[0] == "status=OK") r.status = Status::Ok;
  else if (lines[0] == "status=ERROR") r.status = Status::Error;
  else malformed("bad status line");
  std::size_t first = 1;
  if (lines.size() > 1 && lines[1].starts_with("code=")) {
    r.code = std::string(lines[1].substr(5));
    first = 2;
  }
  if ((r.status == Status::Error) == r.code.empty()) malformed("code must be present exactly for ERROR responses");
  r.body = parse_body(lines, first);
  if (r.body.contains("status") || r.body.contains("code")) malformed("reserved key in response body");
  return r;
}

}  // namespace mcloud::wire
