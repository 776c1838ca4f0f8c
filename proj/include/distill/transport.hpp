#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace distill {

struct HttpRequest {
  std::string method = "POST";
  /// Path (with query) relative to the transport's base URL.
  std::string path;
  std::string body;
};

struct HttpResponse {
  /// 0 when no HTTP status was received (timeout, connection failure).
  int status = 0;
  std::string body;
  std::string error;
};

/// Sends one request. Implementations must be safe for concurrent use.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse send(const HttpRequest& request) = 0;
};

/// Real HTTP(S) transport over cpp-httplib. A fresh connection is used per
/// request so concurrent callers never share socket state.
class HttplibTransport final : public HttpTransport {
 public:
  /// `base_url` like `https://api.openai.com/v1` or `http://127.0.0.1:8080`.
  HttplibTransport(const std::string& base_url, std::string bearer_token,
                   std::chrono::milliseconds timeout);

  HttpResponse send(const HttpRequest& request) override;

 private:
  std::string scheme_host_port_;
  std::string base_path_;
  std::string bearer_token_;
  std::chrono::milliseconds timeout_;
};

/// Appends every exchange to `<dir>/requests.jsonl`. Occurrences of the
/// credential in bodies are replaced with `[REDACTED]`.
class AuditLog {
 public:
  AuditLog(const std::filesystem::path& dir, std::string credential);

  void record(const HttpRequest& request, const HttpResponse& response);
  std::filesystem::path path() const { return path_; }

 private:
  std::string redact(std::string text) const;

  std::mutex mu_;
  std::filesystem::path path_;
  std::ofstream out_;
  std::string credential_;
};

/// Decorator that logs each exchange to an AuditLog.
class AuditingTransport final : public HttpTransport {
 public:
  AuditingTransport(std::shared_ptr<HttpTransport> inner, std::shared_ptr<AuditLog> log)
      : inner_(std::move(inner)), log_(std::move(log)) {}

  HttpResponse send(const HttpRequest& request) override;

 private:
  std::shared_ptr<HttpTransport> inner_;
  std::shared_ptr<AuditLog> log_;
};

/// Serves recorded exchanges from an audit log, keyed on method, path, and
/// the canonicalized JSON request body. Unknown requests throw IntegrityError.
class ReplayTransport final : public HttpTransport {
 public:
  explicit ReplayTransport(const std::filesystem::path& transcript);

  HttpResponse send(const HttpRequest& request) override;
  std::size_t size() const { return exchanges_.size(); }

 private:
  static std::string key(const std::string& method, const std::string& path,
                         const std::string& body);

  std::map<std::string, HttpResponse> exchanges_;
};

}  // namespace distill
