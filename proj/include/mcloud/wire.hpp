#pragma once

// Canonical key=value wire documents spoken between resource pools and the
// simulated provider backends.
//
//   request  = "VERB <path>\n" *("key=value\n") "\n"
//   response = "status=OK|ERROR\n" ["code=<CODE>\n"] *("key=value\n") "\n"
//
// Body keys are strictly ascending (byte order), unique and non-empty; keys
// carry no '=' and nothing carries a newline. Documents are UTF-8.

#include <map>
#include <string>
#include <string_view>

namespace mcloud::wire {

enum class Verb { Get, Post, Delete };
enum class Status { Ok, Error };

using Body = std::map<std::string, std::string>;

struct Request {
  Verb verb = Verb::Get;
  std::string path;
  Body body;
  bool operator==(const Request&) const = default;
};

struct Response {
  Status status = Status::Ok;
  std::string code;  // empty iff status == Ok
  Body body;
  bool operator==(const Response&) const = default;

  static Response ok(Body body = {}) { return {Status::Ok, {}, std::move(body)}; }
  static Response error(std::string code) { return {Status::Error, std::move(code), {}}; }
};

std::string_view to_string(Verb v);

// Encoders throw Error(MalformedDoc) for documents that cannot be rendered
// canonically (bad keys, newlines in values, code/status mismatch).
std::string encode(const Request& r);
std::string encode(const Response& r);
// Decoders accept only the canonical form and throw Error(MalformedDoc) otherwise.
Request decode_request(std::string_view text);
Response decode_response(std::string_view text);

namespace codes {
inline constexpr std::string_view kAuthFailed = "AUTH_FAILED";
inline constexpr std::string_view kBadRequest = "BAD_REQUEST";
inline constexpr std::string_view kBadRoute = "BAD_ROUTE";
inline constexpr std::string_view kInUse = "IN_USE";
inline constexpr std::string_view kMalformedDoc = "MALFORMED_DOC";
inline constexpr std::string_view kNotFound = "NOT_FOUND";
inline constexpr std::string_view kServiceExists = "SERVICE_EXISTS";
inline constexpr std::string_view kServiceNotFound = "SERVICE_NOT_FOUND";
inline constexpr std::string_view kStorageExists = "STORAGE_EXISTS";
inline constexpr std::string_view kStorageNotFound = "STORAGE_NOT_FOUND";
}  // namespace codes

}  // namespace mcloud::wire
