#include "distill/transport.hpp"

#include <httplib.h>

#include <json.hpp>

#include "distill/errors.hpp"
#include "distill/text.hpp"

namespace distill {
namespace {

/// Compact re-serialization so whitespace and key order cannot break replay.
std::string canonical_body(const std::string& body) {
  if (body.empty()) return body;
  const auto j = nlohmann::json::parse(body, nullptr, false);
  return j.is_discarded() ? body : j.dump();
}

}  // namespace

HttplibTransport::HttplibTransport(const std::string& base_url, std::string bearer_token,
                                   std::chrono::milliseconds timeout)
    : bearer_token_(std::move(bearer_token)), timeout_(timeout) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("endpoint", "endpoint URL needs a scheme: " + base_url);
  }
  const auto path_begin = base_url.find('/', scheme_end + 3);
  scheme_host_port_ = base_url.substr(0, path_begin);
  base_path_ = path_begin == std::string::npos ? "" : base_url.substr(path_begin);
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
}

HttpResponse HttplibTransport::send(const HttpRequest& request) {
  httplib::Client client(scheme_host_port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (!bearer_token_.empty()) {
    headers.emplace("Authorization", "Bearer " + bearer_token_);
  }
  const std::string path = base_path_ + request.path;
  httplib::Result result = request.method == "GET"
                               ? client.Get(path, headers)
                               : client.Post(path, headers, request.body, "application/json");
  HttpResponse response;
  if (!result) {
    response.error = httplib::to_string(result.error());
    return response;
  }
  response.status = result->status;
  response.body = result->body;
  return response;
}

// ---------------------------------------------------------------------------

AuditLog::AuditLog(const std::filesystem::path& dir, std::string credential)
    : path_(dir / "requests.jsonl"), credential_(std::move(credential)) {
  std::filesystem::create_directories(dir);
  out_.open(path_, std::ios::app);
  if (!out_) throw IoError("cannot open audit log " + path_.string());
}

std::string AuditLog::redact(std::string text) const {
  if (credential_.empty()) return text;
  for (auto pos = text.find(credential_); pos != std::string::npos;
       pos = text.find(credential_, pos)) {
    text.replace(pos, credential_.size(), "[REDACTED]");
  }
  return text;
}

void AuditLog::record(const HttpRequest& request, const HttpResponse& response) {
  nlohmann::ordered_json line;
  line["timestamp"] = utc_timestamp_now();
  line["method"] = request.method;
  line["path"] = redact(request.path);
  line["request"] = redact(request.body);
  line["status"] = response.status;
  line["response"] = redact(response.body);
  if (!response.error.empty()) line["error"] = response.error;
  const std::string text = line.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  std::lock_guard lock(mu_);
  out_ << text << '\n';
  out_.flush();
}

HttpResponse AuditingTransport::send(const HttpRequest& request) {
  HttpResponse response = inner_->send(request);
  log_->record(request, response);
  return response;
}

// ---------------------------------------------------------------------------

ReplayTransport::ReplayTransport(const std::filesystem::path& transcript) {
  std::ifstream in(transcript);
  if (!in) throw IoError("cannot open transcript " + transcript.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(lineno, "malformed transcript line");
    HttpResponse r;
    r.status = j.value("status", 0);
    r.body = j.value("response", std::string());
    r.error = j.value("error", std::string());
    // Later exchanges for the same request win, matching the final attempt.
    exchanges_[key(j.value("method", std::string("POST")), j.value("path", std::string()),
                   j.value("request", std::string()))] = std::move(r);
  }
}

std::string ReplayTransport::key(const std::string& method, const std::string& path,
                                 const std::string& body) {
  return method + ' ' + path + '\n' + canonical_body(body);
}

HttpResponse ReplayTransport::send(const HttpRequest& request) {
  const auto it = exchanges_.find(key(request.method, request.path, request.body));
  if (it == exchanges_.end()) {
    throw IntegrityError("no recorded exchange for " + request.method + " " + request.path);
  }
  return it->second;
}

}  // namespace distill
