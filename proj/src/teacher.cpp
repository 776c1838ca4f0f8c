#include "distill/teacher.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <json.hpp>

#include "distill/errors.hpp"
#include "distill/text.hpp"

namespace distill {
namespace {

using nlohmann::json;

bool is_transient(int status) { return status == 0 || status == 429 || status >= 500; }

json parse_body(const std::string& body, std::string_view what) {
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw IntegrityError("malformed " + std::string(what) + " response body");
  }
  return j;
}

/// Holds one permit for the lifetime of an attempt.
class Permit {
 public:
  explicit Permit(std::counting_semaphore<>& sem) : sem_(sem) { sem_.acquire(); }
  ~Permit() { sem_.release(); }
  Permit(const Permit&) = delete;
  Permit& operator=(const Permit&) = delete;

 private:
  std::counting_semaphore<>& sem_;
};

}  // namespace

std::chrono::milliseconds RetryPolicy::backoff_after(int failed_attempt) const {
  const double scaled = static_cast<double>(base_backoff.count()) *
                        std::pow(backoff_factor, std::max(0, failed_attempt - 1));
  const double capped = std::min(scaled, static_cast<double>(max_backoff.count()));
  return std::chrono::milliseconds(static_cast<std::int64_t>(capped));
}

void TeacherConfig::validate() const {
  if (retry.max_attempts < 1) throw ValidationError("max_attempts", "max_attempts must be >= 1");
  if (!(retry.backoff_factor >= 1.0)) {
    throw ValidationError("backoff_factor", "backoff_factor must be >= 1");
  }
  if (retry.base_backoff.count() < 0) {
    throw ValidationError("base_backoff", "base_backoff must be non-negative");
  }
  if (max_in_flight < 1) throw ValidationError("max_in_flight", "max_in_flight must be >= 1");
  if (timeout.count() <= 0) throw ValidationError("timeout", "timeout must be positive");
  if (model_name.empty()) throw ValidationError("model", "model name is empty");
}

TeacherConfig TeacherConfig::with_env_credential() const {
  TeacherConfig copy = *this;
  const char* key = std::getenv(std::string(kCredentialEnvVar).c_str());
  copy.credential = key ? key : "";
  return copy;
}

std::string chat_request_body(const std::string& model, const ChatRequest& request) {
  nlohmann::ordered_json body;
  body["model"] = model;
  body["messages"] = nlohmann::ordered_json::array();
  if (!request.system_message.empty()) {
    body["messages"].push_back({{"role", "system"}, {"content", request.system_message}});
  }
  body["messages"].push_back({{"role", "user"}, {"content", request.user_message}});
  if (request.temperature) body["temperature"] = *request.temperature;
  if (request.top_p) body["top_p"] = *request.top_p;
  return body.dump();
}

Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::shared_ptr<HttpTransport> make_http_transport(const TeacherConfig& config) {
  if (config.credential.empty()) {
    throw ValidationError("credential", std::string(kCredentialEnvVar) + " is not set");
  }
  return std::make_shared<HttplibTransport>(config.endpoint_url, config.credential,
                                            config.timeout);
}

TeacherClient::TeacherClient(TeacherConfig config, std::shared_ptr<HttpTransport> transport,
                             Sleeper sleeper)
    : config_(std::move(config)), transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
  config_.validate();
  if (!transport_) throw ValidationError("transport", "transport is null");
  permits_ = std::make_unique<std::counting_semaphore<>>(config_.max_in_flight);
}

std::string TeacherClient::post_with_retry(const std::string& path, const std::string& body) {
  const int max_attempts = config_.retry.max_attempts;
  HttpResponse last;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    {
      Permit permit(*permits_);
      ++attempts_;
      last = transport_->send({"POST", path, body});
    }
    if (last.status >= 200 && last.status < 300) {
      ++completed_;
      return last.body;
    }
    if (!is_transient(last.status)) {
      throw PermanentError(last.status, "request to " + path + " failed with status " +
                                            std::to_string(last.status) + ": " + last.body);
    }
    if (attempt < max_attempts) sleeper_(config_.retry.backoff_after(attempt));
  }
  std::string detail = last.status ? "status " + std::to_string(last.status) : last.error;
  throw TransportError(last.status, max_attempts,
                       "request to " + path + " failed after " + std::to_string(max_attempts) +
                           " attempts (" + detail + ")");
}

std::string TeacherClient::chat_complete(const ChatRequest& request) {
  if (request.user_message.empty()) {
    throw ValidationError("user_message", "user message is empty");
  }
  const json j = parse_body(
      post_with_retry("/chat/completions", chat_request_body(config_.model_name, request)),
      "chat completion");
  const auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) {
    throw EmptyResponseError("chat completion has no choices");
  }
  const auto& message = (*choices)[0].value("message", json::object());
  const auto content = message.find("content");
  if (content == message.end() || !content->is_string() ||
      content->get_ref<const std::string&>().empty()) {
    throw EmptyResponseError("chat completion content is empty");
  }
  return content->get<std::string>();
}

std::string TeacherClient::generate_response(std::string_view instruction) {
  if (instruction.empty()) throw ValidationError("instruction", "instruction is empty");
  ChatRequest request{std::string(kConciseSystemMessage), std::string(instruction),
                      config_.temperature, config_.top_p};
  std::string content = chat_complete(request);
  while (!content.empty() && (content.back() == '\n' || content.back() == '\r')) {
    content.pop_back();
  }
  if (content.empty()) throw EmptyResponseError("response is empty after newline strip");
  return content;
}

InstructionBatch TeacherClient::generate_instruction_batch(const PromptSpec& spec) {
  if (spec.requested_batch < 1) throw ValidationError("batch", "requested batch must be >= 1");
  ChatRequest request{std::string(kConciseSystemMessage), spec.rendered_text,
                      config_.temperature, config_.top_p};
  InstructionBatch batch;
  batch.raw_response = chat_complete(request);
  batch.parsed = extract_examples(batch.raw_response,
                                  static_cast<std::size_t>(spec.requested_batch));
  if (batch.parsed.examples.empty()) {
    throw BatchParseError("teacher reply contained no parseable <example> blocks",
                          batch.raw_response);
  }
  batch.texts = batch.parsed.examples;
  batch.shortfall = batch.parsed.shortfall;
  return batch;
}

ModerationResult TeacherClient::moderate(std::string_view text) {
  if (text.empty()) throw ValidationError("text", "moderation input is empty");
  nlohmann::ordered_json body;
  if (!config_.moderation_model.empty()) body["model"] = config_.moderation_model;
  body["input"] = text;
  const json j = parse_body(post_with_retry("/moderations", body.dump()), "moderation");
  const auto results = j.find("results");
  if (results == j.end() || !results->is_array() || results->empty()) {
    throw IntegrityError("moderation response has no results");
  }
  const auto& first = (*results)[0];
  ModerationResult out;
  out.flagged = first.value("flagged", false);
  if (const auto scores = first.find("category_scores");
      scores != first.end() && scores->is_object()) {
    for (const auto& [name, value] : scores->items()) {
      if (value.is_number()) out.category_scores[name] = value.get<double>();
    }
  }
  return out;
}

std::vector<std::vector<double>> TeacherClient::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw ValidationError("texts", "no texts to embed");
  nlohmann::ordered_json body;
  body["model"] = config_.embedding_model;
  body["input"] = texts;
  const json j = parse_body(post_with_retry("/embeddings", body.dump()), "embedding");
  const auto data = j.find("data");
  if (data == j.end() || !data->is_array() || data->size() != texts.size()) {
    throw IntegrityError("embedding response does not have one vector per input");
  }
  std::vector<std::vector<double>> out(texts.size());
  std::vector<bool> filled(texts.size(), false);
  for (std::size_t i = 0; i < data->size(); ++i) {
    const auto& item = (*data)[i];
    const std::size_t index = item.value("index", i);
    if (index >= out.size() || filled[index]) {
      throw IntegrityError("embedding response has a bad or repeated index");
    }
    out[index] = item.at("embedding").get<std::vector<double>>();
    filled[index] = true;
  }
  const std::size_t dim = out.front().size();
  for (const auto& v : out) {
    if (v.size() != dim || dim == 0) {
      throw IntegrityError("embedding dimension mismatch within one batch");
    }
  }
  return out;
}

}  // namespace distill
