#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "distill/teacher.hpp"
#include "distill/transport.hpp"

namespace httplib {
class Server;
}

namespace distill {

/// Token that makes the default moderation handler flag a text.
inline constexpr std::string_view kToxicSentinel = "[[toxic]]";

/// Programmable in-process teacher speaking the chat/moderation/embedding wire
/// format. Handlers may be replaced before use; counters are thread-safe.
class MockTeacher final : public HttpTransport {
 public:
  using ChatHandler = std::function<std::string(const ChatRequest&)>;
  using FlagHandler = std::function<bool(const std::string&)>;

  MockTeacher();

  HttpResponse send(const HttpRequest& request) override;

  /// Reply content for chat requests. Default: "OK".
  ChatHandler on_chat;
  /// Moderation verdict. Default: text contains kToxicSentinel.
  FlagHandler flag;
  std::size_t embedding_dim = 16;
  /// Artificial handler latency, to make concurrency observable.
  std::chrono::milliseconds latency{0};

  /// Queue statuses returned before normal handling, one per request. 0 means
  /// a simulated timeout.
  void fail_next(std::initializer_list<int> statuses);
  /// Chat requests whose user message contains `needle` fail with `status`.
  void fail_when_contains(std::string needle, int status);

  std::uint64_t calls() const { return calls_.load(); }
  std::uint64_t calls_to(const std::string& path) const;
  int max_concurrent() const { return max_concurrent_.load(); }
  std::vector<ChatRequest> chat_log() const;

 private:
  HttpResponse handle_chat(const std::string& body);
  HttpResponse handle_moderation(const std::string& body);
  HttpResponse handle_embeddings(const std::string& body);

  mutable std::mutex mu_;
  std::deque<int> scripted_;
  std::map<std::string, int> failing_needles_;
  std::map<std::string, std::uint64_t> per_path_;
  std::vector<ChatRequest> chat_log_;
  std::atomic<std::uint64_t> calls_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_concurrent_{0};
};

/// Deterministic unit vector derived from the text's hash.
std::vector<double> hash_embedding(std::string_view text, std::size_t dim);

/// Chat reply body in the chat-completions wire format.
std::string chat_completion_body(const std::string& content);

/// Mock chat behaviour used by the CLI `--mock` flag: instruction prompts get
/// a tagged batch derived from the prompt hash and `seed`; other messages get
/// a short deterministic answer.
MockTeacher::ChatHandler synthetic_teacher(std::uint64_t seed);

/// Serves any transport over loopback HTTP, for integration tests against
/// the real HTTP client.
class LoopbackServer {
 public:
  explicit LoopbackServer(std::shared_ptr<HttpTransport> backend);
  ~LoopbackServer();

  LoopbackServer(const LoopbackServer&) = delete;
  LoopbackServer& operator=(const LoopbackServer&) = delete;

  int port() const { return port_; }
  std::string base_url() const;

 private:
  std::shared_ptr<HttpTransport> backend_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace distill
