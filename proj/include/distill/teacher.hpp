#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "distill/parsegen.hpp"
#include "distill/promptgen.hpp"
#include "distill/transport.hpp"

namespace distill {

/// System message sent ahead of every teacher request.
inline constexpr std::string_view kConciseSystemMessage =
    "You are a helpful assistant, but you must respond the provided instructions "
    "as concise as possible.";

inline constexpr std::string_view kCredentialEnvVar = "LAMINI_API_KEY";

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_backoff{1000};
  double backoff_factor = 2.0;
  std::chrono::milliseconds max_backoff{60000};

  /// Delay after the `failed_attempt`-th failure (1-based):
  /// base * factor^(failed_attempt-1), capped at max_backoff.
  std::chrono::milliseconds backoff_after(int failed_attempt) const;
};

struct TeacherConfig {
  std::string endpoint_url = "https://api.openai.com/v1";
  std::string model_name = "gpt-3.5-turbo";
  std::string embedding_model = "all-mpnet-base-v2";
  std::string moderation_model;  // empty: endpoint default
  std::string credential;
  int max_in_flight = 4;
  RetryPolicy retry;
  std::chrono::milliseconds timeout{60000};
  std::optional<double> temperature;
  std::optional<double> top_p;

  /// Throws ValidationError on a broken invariant.
  void validate() const;
  /// Copy with the credential taken from LAMINI_API_KEY (empty if unset).
  TeacherConfig with_env_credential() const;
};

struct ChatRequest {
  std::string system_message;
  std::string user_message;
  std::optional<double> temperature;
  std::optional<double> top_p;
};

std::string chat_request_body(const std::string& model, const ChatRequest& request);

struct ModerationResult {
  bool flagged = false;
  std::map<std::string, double> category_scores;
};

struct InstructionBatch {
  std::vector<std::string> texts;
  std::size_t shortfall = 0;
  ParsedBatch parsed;
  std::string raw_response;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

Sleeper real_sleeper();

/// HTTP transport for `config`; requires a credential.
std::shared_ptr<HttpTransport> make_http_transport(const TeacherConfig& config);

/// Chat, moderation, and embedding client with retry and a shared in-flight
/// bound. Safe for concurrent use.
class TeacherClient {
 public:
  TeacherClient(TeacherConfig config, std::shared_ptr<HttpTransport> transport,
                Sleeper sleeper = real_sleeper());

  std::string chat_complete(const ChatRequest& request);

  /// Sends `instruction` under the concise system message. Trailing newlines
  /// are stripped from the reply; nothing else is altered.
  std::string generate_response(std::string_view instruction);

  /// Throws BatchParseError when no example parses.
  InstructionBatch generate_instruction_batch(const PromptSpec& spec);

  ModerationResult moderate(std::string_view text);

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts);

  const TeacherConfig& config() const { return config_; }
  /// HTTP attempts issued so far, retries included.
  std::uint64_t attempts_sent() const { return attempts_.load(); }
  std::uint64_t requests_completed() const { return completed_.load(); }

 private:
  /// POSTs with retry; returns the body of the first 2xx response.
  std::string post_with_retry(const std::string& path, const std::string& body);

  TeacherConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleeper_;
  std::unique_ptr<std::counting_semaphore<>> permits_;
  std::atomic<std::uint64_t> attempts_{0};
  std::atomic<std::uint64_t> completed_{0};
};

}  // namespace distill
