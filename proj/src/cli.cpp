#include "distill/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "distill/concurrency.hpp"
#include "distill/corpus.hpp"
#include "distill/diversity.hpp"
#include "distill/errors.hpp"
#include "distill/hashing.hpp"
#include "distill/mock_teacher.hpp"
#include "distill/probes.hpp"
#include "distill/promptgen.hpp"
#include "distill/report.hpp"
#include "distill/teacher.hpp"
#include "distill/topics.hpp"

namespace distill {
namespace {

namespace fs = std::filesystem;

/// Bad flags or missing inputs; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Timestamp recorded on generated records under the mock teacher, so mock
/// runs are byte-for-byte reproducible.
constexpr std::string_view kMockTimestamp = "1970-01-01T00:00:00Z";

struct GlobalOptions {
  std::string endpoint = "https://api.openai.com/v1";
  std::string model = "gpt-3.5-turbo";
  std::string embedding_model = "all-mpnet-base-v2";
  std::uint64_t seed = 42;
  int concurrency = 4;
  std::string audit_dir;
  bool mock = false;
  int max_attempts = 5;
  int base_backoff_ms = 1000;
  double backoff_factor = 2.0;
  int timeout_s = 60;
  std::optional<double> temperature;
  std::optional<double> top_p;
};

/// splitmix64 step; derives independent per-round seeds from the run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

TeacherConfig teacher_config(const GlobalOptions& g) {
  TeacherConfig c;
  c.endpoint_url = g.endpoint;
  c.model_name = g.model;
  c.embedding_model = g.embedding_model;
  c.max_in_flight = g.concurrency;
  c.retry.max_attempts = g.max_attempts;
  c.retry.base_backoff = std::chrono::milliseconds(g.base_backoff_ms);
  c.retry.backoff_factor = g.backoff_factor;
  c.timeout = std::chrono::seconds(g.timeout_s);
  c.temperature = g.temperature;
  c.top_p = g.top_p;
  return c;
}

std::unique_ptr<TeacherClient> make_client(const GlobalOptions& g) {
  TeacherConfig config = teacher_config(g);
  std::shared_ptr<HttpTransport> transport;
  if (g.mock) {
    auto mock = std::make_shared<MockTeacher>();
    mock->on_chat = synthetic_teacher(g.seed);
    transport = mock;
  } else {
    config = config.with_env_credential();
    if (config.credential.empty()) {
      throw UsageError(std::string(kCredentialEnvVar) + " is not set (or pass --mock)");
    }
    transport = make_http_transport(config);
  }
  if (!g.audit_dir.empty()) {
    transport = std::make_shared<AuditingTransport>(
        transport, std::make_shared<AuditLog>(g.audit_dir, config.credential));
  }
  return std::make_unique<TeacherClient>(config, transport);
}

void require_file(const std::string& path, const char* flag) {
  if (!fs::exists(path)) throw UsageError(std::string(flag) + ": no such file " + path);
}

/// Resolved configuration written beside the command's primary output.
void log_config(const CLI::App& app, const std::string& output, std::ostream& err) {
  const auto active = app.get_subcommands();
  const std::string prefix = active.empty() ? "" : active.front()->get_name() + ".";
  std::istringstream in(app.config_to_str(true, false));
  std::ostringstream redacted;
  for (std::string line; std::getline(in, line);) {
    const auto key = line.substr(0, line.find('='));
    if (key.find('.') != std::string::npos && key.rfind(prefix, 0) != 0) continue;
    const bool secret = key.find("key") != std::string::npos ||
                        key.find("credential") != std::string::npos ||
                        key.find("token") != std::string::npos;
    redacted << (secret ? key + "= \"[REDACTED]\"" : line) << '\n';
  }
  if (output.empty()) {
    err << "# resolved config\n" << redacted.str();
    return;
  }
  std::ofstream out(output + ".run.toml", std::ios::trunc);
  out << redacted.str();
}

std::vector<SeedRecord> load_seed_pool(const std::string& path) {
  std::vector<SeedRecord> pool;
  LoadOptions options;
  options.strict = true;
  for (const auto& r : load_jsonl(path, options).records) {
    SeedRecord s;
    s.id = r.id;
    s.instruction = r.instruction;
    s.input = r.input;
    if (const auto task = r.extra.find("task"); task != r.extra.end() && task->is_string()) {
      s.group = task->get<std::string>();
    }
    pool.push_back(std::move(s));
  }
  return pool;
}

SubsetTag generated_subset(SourceFamily family, bool topic_guided) {
  switch (family) {
    case SourceFamily::self_instruct:
      return topic_guided ? SubsetTag::gen_topic_si : SubsetTag::gen_si;
    case SourceFamily::p3: return SubsetTag::gen_p3;
    case SourceFamily::flan: return SubsetTag::gen_flan;
  }
  return SubsetTag::gen_si;
}

// ---------------------------------------------------------------------------

struct HarvestArgs {
  std::string in;
  std::string wiki_api;
  std::size_t limit = 10000;
  std::string out;
};

int cmd_harvest(const HarvestArgs& a, std::ostream& out) {
  std::vector<TopicEntry> entries;
  if (!a.in.empty()) {
    require_file(a.in, "--in");
    entries = ingest_categories(fs::path(a.in));
  } else if (!a.wiki_api.empty()) {
    HttplibTransport transport(a.wiki_api, "", std::chrono::seconds(30));
    entries = fetch_categories(transport, "", a.limit);
  } else {
    throw UsageError("harvest-topics needs --in or --wiki-api");
  }
  const auto kept = filter_topics(entries);
  std::ofstream f(a.out, std::ios::trunc);
  if (!f) throw IoError("cannot write " + a.out);
  write_topic_list(kept, f);
  out << "categories=" << entries.size() << " common_topics=" << kept.size() << '\n';
  return kExitOk;
}

struct GenInstructionArgs {
  std::string family = "self-instruct";
  std::string seeds;
  int rounds = 1;
  std::string topics;
  std::string out;
};

int cmd_gen_instructions(const GlobalOptions& g, const GenInstructionArgs& a,
                         std::ostream& out, std::ostream& err) {
  const SourceFamily family = parse_family(a.family);
  require_file(a.seeds, "--seeds");
  const bool topic_guided = !a.topics.empty();
  if (topic_guided && family != SourceFamily::self_instruct) {
    throw UsageError("--topics is only supported with --family self-instruct");
  }
  std::vector<std::string> topic_pool;
  if (topic_guided) {
    require_file(a.topics, "--topics");
    topic_pool = read_topic_list(a.topics);
  }
  const auto pool = load_seed_pool(a.seeds);
  auto client = make_client(g);

  // Fetch rounds concurrently, merge strictly in round order.
  struct Round {
    PromptSpec spec;
    std::optional<InstructionBatch> batch;
    std::string error;
  };
  std::vector<Round> rounds(static_cast<std::size_t>(a.rounds));
  for_each_concurrent(rounds.size(), static_cast<std::size_t>(g.concurrency),
                      [&](std::size_t r) {
                        Round& round = rounds[r];
                        try {
                          const auto seeds =
                              sample_seeds(pool, family, derive_seed(g.seed, 2 * r));
                          if (topic_guided) {
                            const auto topics =
                                sample_topics(topic_pool, derive_seed(g.seed, 2 * r + 1));
                            round.spec = render_topic_guided(seeds, topics);
                          } else {
                            round.spec = render_example_guided(seeds, batch_size_for(family));
                          }
                          round.batch = client->generate_instruction_batch(round.spec);
                        } catch (const ValidationError&) {
                          throw;
                        } catch (const std::exception& e) {
                          round.error = e.what();
                        }
                      });

  CorpusStore store{fs::path(a.out)};
  std::unordered_set<std::string> keys;
  for (const auto& r : store.snapshot()) keys.insert(dedup_key(r, DedupKey::instruction));

  const SubsetTag subset = generated_subset(family, topic_guided);
  const std::string timestamp = g.mock ? std::string(kMockTimestamp) : utc_timestamp_now();
  std::size_t added = 0, duplicates = 0, shortfall = 0, failed = 0;
  for (const auto& round : rounds) {
    if (!round.batch) {
      ++failed;
      err << "round failed: " << round.error << '\n';
      continue;
    }
    shortfall += round.batch->shortfall;
    const std::string prompt_hash = sha256_hex(round.spec.rendered_text);
    for (const auto& text : round.batch->texts) {
      InstructionRecord rec;
      rec.instruction = text;
      rec.subset = subset;
      if (!keys.insert(dedup_key(rec, DedupKey::instruction)).second) {
        ++duplicates;
        continue;
      }
      rec.id = std::string(to_string(subset)) + "-" +
               sha256_hex(nfc_normalize(trim(text))).substr(0, 16);
      rec.meta.model = g.model;
      rec.meta.timestamp = timestamp;
      rec.meta.prompt_hash = prompt_hash;
      if (round.spec.topics) rec.meta.topics = *round.spec.topics;
      store.append(std::move(rec));
      ++added;
    }
  }
  out << "rounds=" << rounds.size() << " failed=" << failed << " added=" << added
      << " duplicates=" << duplicates << " shortfall=" << shortfall
      << " total=" << store.size() << '\n';
  return failed ? kExitPartialFailure : kExitOk;
}

struct GenResponseArgs {
  std::string in;
  std::string out;
  std::size_t limit = 0;
};

int cmd_gen_responses(const GlobalOptions& g, const GenResponseArgs& a, std::ostream& out,
                      std::ostream& err) {
  require_file(a.in, "--in");
  auto records = load_jsonl(a.in).records;
  const fs::path sidecar = a.out + ".responses.jsonl";

  // Answers from an interrupted run are applied first and never re-queried.
  std::unordered_map<std::string, std::string> answered;
  if (fs::exists(sidecar)) {
    std::ifstream in(sidecar);
    for (std::string line; std::getline(in, line);) {
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("id") || !j.contains("response")) continue;
      answered[j["id"].get<std::string>()] = j["response"].get<std::string>();
    }
  }
  std::vector<std::size_t> pending;
  std::size_t resumed = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].response) continue;
    if (const auto it = answered.find(records[i].id); it != answered.end()) {
      records[i].response = it->second;
      ++resumed;
      continue;
    }
    if (a.limit == 0 || pending.size() < a.limit) pending.push_back(i);
  }

  std::size_t failed = 0;
  if (!pending.empty()) {
    auto client = make_client(g);
    std::ofstream side(sidecar, std::ios::app);
    std::mutex mu;
    for_each_concurrent(pending.size(), static_cast<std::size_t>(g.concurrency),
                        [&](std::size_t k) {
                          auto& rec = records[pending[k]];
                          try {
                            std::string response =
                                client->generate_response(full_instruction(rec));
                            std::lock_guard lock(mu);
                            side << nlohmann::json{{"id", rec.id}, {"response", response}}.dump()
                                 << '\n';
                            side.flush();
                            rec.response = std::move(response);
                          } catch (const std::exception& e) {
                            std::lock_guard lock(mu);
                            ++failed;
                            err << "record " << rec.id << ": " << e.what() << '\n';
                          }
                        });
  }
  save_jsonl(records, a.out);
  out << "queried=" << pending.size() - failed << " failed=" << failed
      << " resumed=" << resumed << " total=" << records.size() << '\n';
  return failed ? kExitPartialFailure : kExitOk;
}

struct StatsArgs {
  std::string in;
  std::string out;
  bool released = false;
  bool lenient = false;
};

int cmd_stats(const StatsArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.in, "--in");
  LoadOptions options;
  options.strict = !a.lenient;
  const LoadResult loaded = a.released ? load_released_jsonl(a.in) : load_jsonl(a.in, options);
  for (const auto& s : loaded.skipped) err << "skipped line " << s.line << ": " << s.reason << '\n';
  const auto stats = compute_stats(loaded.records);
  if (a.out.empty()) {
    write_stats_csv(stats, out);
  } else {
    std::ofstream f(a.out, std::ios::trunc);
    if (!f) throw IoError("cannot write " + a.out);
    write_stats_csv(stats, f);
  }
  return loaded.skipped.empty() ? kExitOk : kExitPartialFailure;
}

struct DiversityArgs {
  std::string in;
  std::size_t window = kDefaultMattrWindow;
  std::string out;
  std::string markdown;
  bool released = false;
  std::size_t embed_sample = 0;
  std::vector<std::string> embed_subsets = {"gen_si", "alpaca", "gen_p3", "p3"};
  std::string cosine_out;
  std::string pca_out;
};

int cmd_diversity(const GlobalOptions& g, const DiversityArgs& a, std::ostream& out) {
  require_file(a.in, "--in");
  if (a.window < 1) throw UsageError("--window must be >= 1");
  const auto records = a.released ? load_released_jsonl(a.in).records : load_jsonl(a.in).records;
  const auto rows = diversity_report(records, a.window);
  if (a.out.empty()) {
    write_diversity_csv(rows, out);
  } else {
    std::ofstream f(a.out, std::ios::trunc);
    write_diversity_csv(rows, f);
  }
  if (!a.markdown.empty()) {
    std::ofstream f(a.markdown, std::ios::trunc);
    write_diversity_markdown(rows, f);
  }
  if (a.embed_sample == 0) return kExitOk;

  auto client = make_client(g);
  std::vector<Vector> all_vectors;
  std::vector<std::string> ids, labels;
  std::ostringstream cos;
  cos << "subset,n,mean_cosine,stddev,pairs,sampled\n";
  for (std::size_t s = 0; s < a.embed_subsets.size(); ++s) {
    const SubsetTag tag = parse_subset(a.embed_subsets[s]);
    const auto sample = sample_records(records, a.embed_sample, derive_seed(g.seed, s), tag);
    if (sample.size() < 2) continue;
    std::vector<Vector> vectors;
    constexpr std::size_t kEmbedBatch = 64;
    for (std::size_t i = 0; i < sample.size(); i += kEmbedBatch) {
      std::vector<std::string> texts;
      for (std::size_t j = i; j < std::min(sample.size(), i + kEmbedBatch); ++j) {
        texts.push_back(full_instruction(sample[j]));
      }
      for (auto& v : client->embed(texts)) vectors.push_back(std::move(v));
    }
    const auto stats = cosine_stats(vectors, g.seed);
    cos << to_string(tag) << ',' << vectors.size() << ',' << std::setprecision(10)
        << stats.mean_pairwise_cosine << ',' << stats.stddev << ',' << stats.pairs << ','
        << (stats.sampled ? "true" : "false") << '\n';
    for (std::size_t i = 0; i < sample.size(); ++i) {
      ids.push_back(sample[i].id);
      labels.emplace_back(to_string(tag));
      all_vectors.push_back(std::move(vectors[i]));
    }
  }
  if (!a.cosine_out.empty()) {
    std::ofstream f(a.cosine_out, std::ios::trunc);
    f << cos.str();
  } else {
    out << cos.str();
  }
  if (!a.pca_out.empty() && all_vectors.size() >= 2) {
    const auto pca = pca_project(all_vectors, 2);
    std::ofstream f(a.pca_out, std::ios::trunc);
    write_pca_csv(pca, ids, labels, f);
  }
  return kExitOk;
}

struct HallucinationArgs {
  std::string questions;
  std::string out;
  bool heuristic = false;
  std::string phrases;
  std::string labels;
  std::string score_out;
  std::string model_label;
};

int cmd_probe_hallucination(const GlobalOptions& g, const HallucinationArgs& a,
                            std::ostream& out, std::ostream& err) {
  std::optional<fs::path> override_path;
  if (!a.questions.empty()) {
    require_file(a.questions, "--questions");
    override_path = a.questions;
  }
  const auto items = load_hallucination_set(override_path);

  std::vector<ProbeResult> existing;
  if (fs::exists(a.out)) {
    // Later lines for the same id supersede earlier ones.
    std::map<int, ProbeResult> latest;
    for (auto& r : load_probe_results(a.out)) latest[r.id] = std::move(r);
    for (auto& [id, r] : latest) existing.push_back(std::move(r));
  }

  HallucinationProbeOptions options;
  options.heuristic = a.heuristic;
  options.workers = static_cast<std::size_t>(g.concurrency);
  if (!a.phrases.empty()) {
    require_file(a.phrases, "--phrases");
    options.refusal_phrases = read_topic_list(a.phrases);
  }
  std::ofstream partial(a.out, std::ios::app);
  options.on_result = [&](const ProbeResult& r) {
    partial << to_json(r).dump() << '\n';
    partial.flush();
  };

  const bool all_done = std::all_of(items.begin(), items.end(), [&](const auto& item) {
    return std::any_of(existing.begin(), existing.end(),
                       [&](const ProbeResult& r) { return r.id == item.id && !r.error; });
  });
  std::unique_ptr<TeacherClient> client = all_done ? nullptr : make_client(g);
  std::vector<ProbeResult> results;
  if (client) {
    results = run_hallucination_probe(*client, items, options, existing);
  } else {
    for (const auto& item : items) {
      for (const auto& r : existing) {
        if (r.id == item.id) results.push_back(r);
      }
    }
  }
  partial.close();
  if (!a.labels.empty()) {
    require_file(a.labels, "--labels");
    apply_label_file(results, a.labels);
  }
  save_probe_results(results, a.out);

  const auto errors = std::count_if(results.begin(), results.end(),
                                    [](const ProbeResult& r) { return r.error.has_value(); });
  const auto labeled = std::count_if(results.begin(), results.end(),
                                     [](const ProbeResult& r) { return r.label.has_value(); });
  out << "results=" << results.size() << " errors=" << errors << " labeled=" << labeled << '\n';

  if (!a.score_out.empty()) {
    if (labeled != static_cast<long>(results.size())) {
      err << "cannot score: " << results.size() - labeled
          << " results are unlabeled; supply --labels or --heuristic\n";
      return kExitPartialFailure;
    }
    const auto score = score_hallucination(results);
    std::ofstream f(a.score_out, std::ios::trunc);
    write_hallucination_csv(a.model_label.empty() ? g.model : a.model_label, score, f);
    if (score.heuristic) err << "note: labels are heuristic, not human judgements\n";
  }
  return errors ? kExitPartialFailure : kExitOk;
}

struct ToxicityArgs {
  std::string prompts;
  std::size_t n = 1000;
  std::string out;
  std::string items;
};

int cmd_probe_toxicity(const GlobalOptions& g, const ToxicityArgs& a, std::ostream& out,
                       std::ostream& err) {
  require_file(a.prompts, "--prompts");
  const auto selection = select_toxicity_prompts(load_scored_prompts(a.prompts), a.n, g.seed);
  for (const auto& w : selection.warnings) err << "warning: " << w << '\n';

  const std::string items_path = a.items.empty() ? a.out + ".items.jsonl" : a.items;
  std::vector<ToxicityOutcome> existing;
  if (fs::exists(items_path)) {
    std::ifstream in(items_path);
    for (std::string line; std::getline(in, line);) {
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) continue;
      existing.push_back(toxicity_outcome_from_json(j));
    }
  }
  ToxicityProbeOptions options;
  options.workers = static_cast<std::size_t>(g.concurrency);
  std::ofstream items(items_path, std::ios::app);
  options.on_outcome = [&](const ToxicityOutcome& o) {
    items << to_json(o).dump() << '\n';
    items.flush();
  };
  auto client = make_client(g);
  const auto report = run_toxicity_probe(*client, selection.prompts, options, existing);
  std::ofstream f(a.out, std::ios::trunc);
  if (!f) throw IoError("cannot write " + a.out);
  write_toxicity_csv(report, f);
  write_toxicity_csv(report, out);
  const auto errors = report.buckets[0].errors + report.buckets[1].errors;
  return errors ? kExitPartialFailure : kExitOk;
}

struct RatingsArgs {
  std::string in;
  std::string out;
};

int cmd_ratings(const RatingsArgs& a, std::ostream& out) {
  require_file(a.in, "--in");
  const auto summary = summarize_ratings(ingest_ratings(fs::path(a.in)));
  if (a.out.empty()) {
    write_ratings_csv(summary, out);
  } else {
    std::ofstream f(a.out, std::ios::trunc);
    write_ratings_csv(summary, f);
  }
  return kExitOk;
}

struct ReportArgs {
  std::string stats, diversity, hallucination, toxicity, ratings, out;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
  ReportInputs inputs;
  auto set = [](std::optional<fs::path>& slot, const std::string& path, const char* flag) {
    if (path.empty()) return;
    require_file(path, flag);
    slot = path;
  };
  set(inputs.stats, a.stats, "--stats");
  set(inputs.diversity, a.diversity, "--diversity");
  set(inputs.hallucination, a.hallucination, "--hallucination");
  set(inputs.toxicity, a.toxicity, "--toxicity");
  set(inputs.ratings, a.ratings, "--ratings");
  if (inputs.empty()) throw UsageError("report needs at least one input CSV");
  if (a.out.empty()) {
    write_report(inputs, out);
  } else {
    std::ofstream f(a.out, std::ios::trunc);
    write_report(inputs, f);
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Instruction-corpus distillation toolkit", "distill"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file; flags override its values");

  GlobalOptions g;
  app.add_option("--endpoint", g.endpoint, "Chat-completions base URL")->capture_default_str();
  app.add_option("--model", g.model, "Teacher model name")->capture_default_str();
  app.add_option("--embedding-model", g.embedding_model)->capture_default_str();
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--concurrency", g.concurrency, "Maximum requests in flight")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--audit-dir", g.audit_dir, "Log request/response bodies here");
  app.add_flag("--mock", g.mock, "Use the built-in deterministic mock teacher");
  app.add_option("--max-attempts", g.max_attempts)->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--base-backoff-ms", g.base_backoff_ms)->check(CLI::NonNegativeNumber)->capture_default_str();
  app.add_option("--backoff-factor", g.backoff_factor)->check(CLI::Range(1.0, 1e6))->capture_default_str();
  app.add_option("--timeout-s", g.timeout_s)->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--temperature", g.temperature, "Sampling temperature (endpoint default if unset)");
  app.add_option("--top-p", g.top_p, "Nucleus sampling (endpoint default if unset)");

  HarvestArgs harvest;
  auto* harvest_cmd = app.add_subcommand("harvest-topics", "Filter Wikipedia categories into a topic pool");
  auto* harvest_in = harvest_cmd->add_option("--in", harvest.in, "TSV dump: title, subcategories, pages");
  harvest_cmd->add_option("--wiki-api", harvest.wiki_api, "MediaWiki api.php URL")->excludes(harvest_in);
  harvest_cmd->add_option("--limit", harvest.limit, "Categories to fetch from the API")->capture_default_str();
  harvest_cmd->add_option("--out", harvest.out, "Topic list, one per line")->required();

  GenInstructionArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-instructions", "Generate instructions from seed examples");
  gen_cmd->add_option("--family", gen.family)
      ->check(CLI::IsMember({"self-instruct", "p3", "flan"}))
      ->capture_default_str();
  gen_cmd->add_option("--seeds", gen.seeds, "Seed pool (corpus JSONL)")->required();
  gen_cmd->add_option("--rounds", gen.rounds, "Prompt/parse rounds")->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--topics", gen.topics, "Topic list; enables topic-guided prompts");
  gen_cmd->add_option("--out", gen.out, "Corpus JSONL to append to")->required();

  GenResponseArgs resp;
  auto* resp_cmd = app.add_subcommand("gen-responses", "Fill missing responses (resumable)");
  resp_cmd->add_option("--in", resp.in)->required();
  resp_cmd->add_option("--out", resp.out)->required();
  resp_cmd->add_option("--limit", resp.limit, "Query at most this many records (0 = all)");

  StatsArgs stats;
  auto* stats_cmd = app.add_subcommand("stats", "Per-subset corpus statistics as CSV");
  stats_cmd->add_option("--in", stats.in)->required();
  stats_cmd->add_option("--out", stats.out);
  stats_cmd->add_flag("--released", stats.released, "Input uses the released dataset layout");
  stats_cmd->add_flag("--lenient", stats.lenient, "Skip malformed lines instead of aborting");

  DiversityArgs div;
  auto* div_cmd = app.add_subcommand("diversity", "MATTR per subset and embedding statistics");
  div_cmd->add_option("--in", div.in)->required();
  div_cmd->add_option("--window", div.window)->capture_default_str();
  div_cmd->add_option("--out", div.out, "CSV output");
  div_cmd->add_option("--markdown", div.markdown, "Markdown table output");
  div_cmd->add_flag("--released", div.released);
  div_cmd->add_option("--embed-sample", div.embed_sample, "Instructions sampled per subset for embeddings (0 = skip)");
  div_cmd->add_option("--embed-subsets", div.embed_subsets)->capture_default_str();
  div_cmd->add_option("--cosine-out", div.cosine_out);
  div_cmd->add_option("--pca-out", div.pca_out);

  HallucinationArgs hal;
  auto* hal_cmd = app.add_subcommand("probe-hallucination", "Ask the 40 hallucination questions");
  hal_cmd->add_option("--questions", hal.questions, "Override CSV: id,category,question");
  hal_cmd->add_option("--out", hal.out, "Results JSONL (resumed if present)")->required();
  hal_cmd->add_flag("--heuristic", hal.heuristic, "Label by refusal-phrase matching");
  hal_cmd->add_option("--phrases", hal.phrases, "Refusal phrases, one per line");
  hal_cmd->add_option("--labels", hal.labels, "Human labels CSV: id,label");
  hal_cmd->add_option("--score-out", hal.score_out, "Hallucination count CSV");
  hal_cmd->add_option("--model-label", hal.model_label, "Row name in the score CSV");

  ToxicityArgs tox;
  auto* tox_cmd = app.add_subcommand("probe-toxicity", "Completion toxicity on scored prompts");
  tox_cmd->add_option("--prompts", tox.prompts, "Scored prompt JSONL")->required();
  tox_cmd->add_option("--n", tox.n, "Prompts per bucket")->capture_default_str();
  tox_cmd->add_option("--out", tox.out, "bucket,total,flagged,errors CSV")->required();
  tox_cmd->add_option("--items", tox.items, "Per-prompt outcomes JSONL (default: <out>.items.jsonl)");

  RatingsArgs rat;
  auto* rat_cmd = app.add_subcommand("ratings", "Summarize A-D human ratings");
  rat_cmd->add_option("--in", rat.in)->required();
  rat_cmd->add_option("--out", rat.out);

  ReportArgs rep;
  auto* rep_cmd = app.add_subcommand("report", "Combine emitted CSVs into one Markdown report");
  rep_cmd->add_option("--stats", rep.stats);
  rep_cmd->add_option("--diversity", rep.diversity);
  rep_cmd->add_option("--hallucination", rep.hallucination);
  rep_cmd->add_option("--toxicity", rep.toxicity);
  rep_cmd->add_option("--ratings", rep.ratings);
  rep_cmd->add_option("--out", rep.out);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (harvest_cmd->parsed()) {
      log_config(app, harvest.out, err);
      return cmd_harvest(harvest, out);
    }
    if (gen_cmd->parsed()) {
      log_config(app, gen.out, err);
      return cmd_gen_instructions(g, gen, out, err);
    }
    if (resp_cmd->parsed()) {
      log_config(app, resp.out, err);
      return cmd_gen_responses(g, resp, out, err);
    }
    if (stats_cmd->parsed()) {
      log_config(app, stats.out, err);
      return cmd_stats(stats, out, err);
    }
    if (div_cmd->parsed()) {
      log_config(app, div.out, err);
      return cmd_diversity(g, div, out);
    }
    if (hal_cmd->parsed()) {
      log_config(app, hal.out, err);
      return cmd_probe_hallucination(g, hal, out, err);
    }
    if (tox_cmd->parsed()) {
      log_config(app, tox.out, err);
      return cmd_probe_toxicity(g, tox, out, err);
    }
    if (rat_cmd->parsed()) {
      log_config(app, rat.out, err);
      return cmd_ratings(rat, out);
    }
    if (rep_cmd->parsed()) {
      if (rep.stats.empty() && rep.diversity.empty() && rep.hallucination.empty() &&
          rep.toxicity.empty() && rep.ratings.empty()) {
        throw UsageError("report needs at least one of --stats, --diversity, "
                         "--hallucination, --toxicity, --ratings");
      }
      log_config(app, rep.out, err);
      return cmd_report(rep, out);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitPartialFailure;
  }
  return kExitUsage;
}

}  // namespace distill
