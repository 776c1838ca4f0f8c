#include "distill/mock_teacher.hpp"

#include <httplib.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "distill/errors.hpp"
#include "distill/hashing.hpp"
#include "distill/text.hpp"

namespace distill {
namespace {

using nlohmann::json;

HttpResponse json_response(const json& j) { return {200, j.dump(), ""}; }

HttpResponse bad_request(const std::string& msg) {
  return {400, json{{"error", {{"message", msg}}}}.dump(), ""};
}

/// Records peak concurrency for the duration of one handler call.
class InFlight {
 public:
  InFlight(std::atomic<int>& current, std::atomic<int>& peak) : current_(current) {
    const int now = ++current_;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
  }
  ~InFlight() { --current_; }

 private:
  std::atomic<int>& current_;
};

constexpr std::array<std::string_view, 24> kVerbs = {
    "Describe", "Explain",  "List",     "Compare",   "Summarize", "Write",
    "Suggest",  "Outline",  "Identify", "Translate", "Classify",  "Evaluate",
    "Design",   "Propose",  "Rewrite",  "Predict",   "Analyze",   "Name",
    "Define",   "Estimate", "Plan",     "Critique",  "Sketch",    "Rank"};
constexpr std::array<std::string_view, 24> kObjects = {
    "a healthy breakfast", "the water cycle",    "a job interview",   "solar panels",
    "a short poem",        "the stock market",   "a birthday party",  "climate change",
    "a mobile app",        "the French alphabet", "a travel budget",  "ancient Rome",
    "a workout routine",   "recycling habits",   "a science fair",    "public speaking",
    "an email reply",      "machine learning",   "a garden layout",   "time management",
    "a chess opening",     "ocean currents",     "a team meeting",    "renewable energy"};

}  // namespace

MockTeacher::MockTeacher()
    : on_chat([](const ChatRequest&) { return std::string("OK"); }),
      flag([](const std::string& text) { return contains(text, kToxicSentinel); }) {}

void MockTeacher::fail_next(std::initializer_list<int> statuses) {
  std::lock_guard lock(mu_);
  scripted_.insert(scripted_.end(), statuses.begin(), statuses.end());
}

void MockTeacher::fail_when_contains(std::string needle, int status) {
  std::lock_guard lock(mu_);
  failing_needles_[std::move(needle)] = status;
}

std::uint64_t MockTeacher::calls_to(const std::string& path) const {
  std::lock_guard lock(mu_);
  const auto it = per_path_.find(path);
  return it == per_path_.end() ? 0 : it->second;
}

std::vector<ChatRequest> MockTeacher::chat_log() const {
  std::lock_guard lock(mu_);
  return chat_log_;
}

HttpResponse MockTeacher::send(const HttpRequest& request) {
  InFlight guard(in_flight_, max_concurrent_);
  ++calls_;
  std::optional<int> scripted;
  {
    std::lock_guard lock(mu_);
    ++per_path_[request.path];
    if (!scripted_.empty()) {
      scripted = scripted_.front();
      scripted_.pop_front();
    }
  }
  if (latency.count() > 0) std::this_thread::sleep_for(latency);
  if (scripted) {
    if (*scripted == 0) return {0, "", "simulated timeout"};
    return {*scripted, json{{"error", {{"message", "scripted failure"}}}}.dump(), ""};
  }
  if (request.path == "/chat/completions") return handle_chat(request.body);
  if (request.path == "/moderations") return handle_moderation(request.body);
  if (request.path == "/embeddings") return handle_embeddings(request.body);
  return {404, "", ""};
}

HttpResponse MockTeacher::handle_chat(const std::string& body) {
  const auto j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.contains("messages")) return bad_request("bad chat body");
  ChatRequest request;
  for (const auto& m : j["messages"]) {
    const auto role = m.value("role", std::string());
    if (role == "system") request.system_message = m.value("content", std::string());
    if (role == "user") request.user_message = m.value("content", std::string());
  }
  if (j.contains("temperature")) request.temperature = j["temperature"].get<double>();
  if (j.contains("top_p")) request.top_p = j["top_p"].get<double>();
  {
    std::lock_guard lock(mu_);
    chat_log_.push_back(request);
    for (const auto& [needle, status] : failing_needles_) {
      if (contains(request.user_message, needle)) {
        if (status == 0) return {0, "", "simulated timeout"};
        return {status, json{{"error", {{"message", "planted failure"}}}}.dump(), ""};
      }
    }
  }
  return {200, chat_completion_body(on_chat(request)), ""};
}

HttpResponse MockTeacher::handle_moderation(const std::string& body) {
  const auto j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.contains("input")) return bad_request("bad moderation body");
  const std::string text = j["input"].get<std::string>();
  const bool flagged = flag(text);
  const double score = flagged ? 0.99 : 0.01;
  json result = {{"flagged", flagged},
                 {"categories", {{"harassment", flagged}, {"hate", false}}},
                 {"category_scores", {{"harassment", score}, {"hate", 0.0}}}};
  return json_response({{"id", "modr-mock"}, {"results", json::array({result})}});
}

HttpResponse MockTeacher::handle_embeddings(const std::string& body) {
  const auto j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.contains("input")) return bad_request("bad embedding body");
  json data = json::array();
  std::size_t index = 0;
  for (const auto& text : j["input"]) {
    data.push_back({{"object", "embedding"},
                    {"index", index++},
                    {"embedding", hash_embedding(text.get<std::string>(), embedding_dim)}});
  }
  return json_response({{"object", "list"}, {"data", data}});
}

std::vector<double> hash_embedding(std::string_view text, std::size_t dim) {
  std::mt19937_64 rng(fnv1a64(text));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto& x : v) {
    x = normal(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

std::string chat_completion_body(const std::string& content) {
  json j = {{"id", "chatcmpl-mock"},
            {"object", "chat.completion"},
            {"choices", json::array({{{"index", 0},
                                      {"message", {{"role", "assistant"}, {"content", content}}},
                                      {"finish_reason", "stop"}}})}};
  return j.dump();
}

MockTeacher::ChatHandler synthetic_teacher(std::uint64_t seed) {
  return [seed](const ChatRequest& request) {
    const std::string& prompt = request.user_message;
    std::mt19937_64 rng(fnv1a64(prompt) ^ (seed * 0x9E3779B97F4A7C15ULL));
    if (contains(prompt, "<example>")) {
      const int n = contains(prompt, "Generate 10 diverse") ? 10 : 20;
      std::uniform_int_distribution<std::size_t> verb(0, kVerbs.size() - 1);
      std::uniform_int_distribution<std::size_t> object(0, kObjects.size() - 1);
      std::string out;
      for (int i = 0; i < n; ++i) {
        out += "<example>";
        out += kVerbs[verb(rng)];
        out += ' ';
        out += kObjects[object(rng)];
        out += ".</example>\n";
      }
      return out;
    }
    std::uniform_int_distribution<std::size_t> object(0, kObjects.size() - 1);
    return "A concise answer about " + std::string(kObjects[object(rng)]) + ".";
  };
}

// ---------------------------------------------------------------------------

LoopbackServer::LoopbackServer(std::shared_ptr<HttpTransport> backend)
    : backend_(std::move(backend)), server_(std::make_unique<httplib::Server>()) {
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    HttpRequest inner{req.method, req.path, req.body};
    if (req.method == "GET" && !req.params.empty()) {
      std::string query;
      for (const auto& [k, v] : req.params) {
        query += query.empty() ? '?' : '&';
        query += k + "=" + v;
      }
      inner.path += query;
    }
    const HttpResponse out = backend_->send(inner);
    if (out.status == 0) {
      res.status = 504;
      return;
    }
    res.status = out.status;
    res.set_content(out.body, "application/json");
  };
  server_->Post(".*", forward);
  server_->Get(".*", forward);
  port_ = server_->bind_to_any_port("127.0.0.1");
  if (port_ < 0) throw IoError("loopback server could not bind");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

LoopbackServer::~LoopbackServer() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string LoopbackServer::base_url() const {
  return "http://127.0.0.1:" + std::to_string(port_);
}

}  // namespace distill
