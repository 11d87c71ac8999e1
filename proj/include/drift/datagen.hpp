#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "drift/bucketing.hpp"
#include "drift/chunking.hpp"
#include "drift/error.hpp"
#include "drift/instructions.hpp"
#include "drift/records.hpp"
#include "drift/tokenizer.hpp"

namespace drift {

/// Text-in, text-out completion endpoint used for QA synthesis and judging.
class GenClient {
 public:
  virtual ~GenClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
  virtual std::string name() const = 0;
};

/// Wraps a callable; handy for tests and fixtures.
class FunctionClient : public GenClient {
 public:
  using Fn = std::function<std::string(const std::string&)>;
  explicit FunctionClient(Fn fn, std::string name = "function") : fn_(std::move(fn)), name_(std::move(name)) {}
  std::string complete(const std::string& prompt) override {
    ++calls;
    return fn_(prompt);
  }
  std::string name() const override { return name_; }
  std::atomic<int> calls{0};

 private:
  Fn fn_;
  std::string name_;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

/// Text between "<label>: " and the next "\n\n" inside a filled prompt.
inline std::string field_after(std::string_view prompt, std::string_view label, std::string_view stop = "\n\n") {
  const auto at = prompt.rfind(std::string(label) + ": ");
  if (at == std::string_view::npos) return {};
  const auto b = at + label.size() + 2;
  const auto e = prompt.find(stop, b);
  return std::string(prompt.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b));
}

inline std::vector<std::string> sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t b = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
      auto s = trim(text.substr(b, i + 1 - b));
      if (!s.empty()) out.push_back(std::move(s));
      b = i + 1;
    }
  }
  if (auto tail = trim(text.substr(std::min(b, text.size()))); !tail.empty()) out.push_back(std::move(tail));
  return out;
}

inline std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace detail

/// Curly quotes become straight quotes and whitespace runs become one space.
inline std::string normalize_for_match(std::string_view s) {
  std::string out;
  bool space = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (c == 0xE2 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x80) {
      const auto d = static_cast<unsigned char>(s[i + 2]);
      if (d == 0x98 || d == 0x99 || d == 0x9C || d == 0x9D) {
        if (space && !out.empty()) out.push_back(' ');
        space = false;
        out.push_back(d <= 0x99 ? '\'' : '"');
        i += 2;
        continue;
      }
    }
    if (std::isspace(c)) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

/// Every sentence of the evidence occurs in the document after normalization.
inline bool evidence_contained(std::string_view document, std::string_view evidence) {
  const auto doc = normalize_for_match(document);
  const auto ev = detail::sentences(evidence);
  if (ev.empty()) return false;
  return std::all_of(ev.begin(), ev.end(),
                     [&](const std::string& s) { return doc.find(normalize_for_match(s)) != std::string::npos; });
}

inline std::size_t default_num_slices(TokenCount tokens) {
  return static_cast<std::size_t>(std::max<TokenCount>(1, ceil_div(tokens, 1024)));
}

/// Cuts the document into `num_slices` token spans of equal length (the last
/// absorbs the remainder) and returns one chosen uniformly by `seed`.
inline Document sample_slice(const Document& doc, std::size_t num_slices, std::uint64_t seed, const Tokenizer& tok) {
  require(num_slices >= 1, ErrorKind::InvalidArgument, "num_slices must be >= 1");
  if (num_slices == 1) return doc;
  const auto ids = tok.encode(doc.text);
  std::mt19937_64 rng(seed);
  const auto k = std::uniform_int_distribution<std::size_t>(0, num_slices - 1)(rng);
  const std::size_t len = ids.size() / num_slices;
  const std::size_t b = k * len;
  const std::size_t e = k + 1 == num_slices ? ids.size() : b + len;
  const std::span<const TokenId> span(ids.data() + b, e - b);
  return {tok.decode(span), static_cast<TokenCount>(e - b)};
}

inline QuestionType random_question_type(std::mt19937_64& rng) {
  static constexpr QuestionType kTypes[] = {QuestionType::MultipleChoice, QuestionType::TrueFalse,
                                            QuestionType::ShortAnswer};
  return kTypes[std::uniform_int_distribution<int>(0, 2)(rng)];
}

inline std::string qa_prompt(std::string_view context, QuestionType qtype) {
  return unescape_braces(
      format(templates::kGenerateQa, {{"question_type", prompt_name(qtype)}, {"context", context}}));
}

inline std::string judge_prompt(const QARecord& rec) {
  return format(templates::kJudge, {{"question", rec.question}, {"evidence", rec.evidence}, {"answer", rec.answer}});
}

/// Pulls the first JSON object out of a generator response and reads the
/// three required string fields.
inline QARecord parse_qa_response(std::string_view response) {
  const auto b = response.find('{');
  const auto e = response.rfind('}');
  require(b != std::string_view::npos && e != std::string_view::npos && e > b, ErrorKind::ParseError,
          "response has no JSON object");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(response.substr(b, e - b + 1));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::ParseError, std::string("response is not valid JSON: ") + ex.what());
  }
  QARecord r;
  for (const char* key : {"question", "answer", "evidence"}) {
    require(j.is_object() && j.contains(key) && j[key].is_string(), ErrorKind::ParseError,
            std::string("response lacks string field '") + key + "'");
  }
  r.question = j["question"].get<std::string>();
  r.answer = j["answer"].get<std::string>();
  r.evidence = j["evidence"].get<std::string>();
  return r;
}

/// Fills the generation prompt for `context`, queries the client and parses
/// the reply. The record's document is the context itself.
inline QARecord generate_qa(GenClient& client, const Document& context, QuestionType qtype) {
  std::string reply;
  try {
    reply = client.complete(qa_prompt(context.text, qtype));
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::ClientError, e.what());
  }
  auto r = parse_qa_response(reply);
  r.document = context.text;
  r.question_type = qtype;
  r.token_count = context.token_count;
  return r;
}

struct FilterResult {
  bool accepted = false;
  std::string reason;  // "ok", "empty", "fidelity" or "judge"
};

inline bool parse_verdict(std::string_view reply) {
  const auto v = detail::lower(detail::trim(reply));
  if (v == "true") return true;
  if (v == "false") return false;
  throw Error(ErrorKind::JudgeUnparseable, "judge replied '" + std::string(reply.substr(0, 80)) + "'");
}

/// Structural checks first; only records that pass them reach the judge.
inline FilterResult filter_qa(GenClient& judge, const QARecord& rec) {
  if (detail::trim(rec.question).empty() || detail::trim(rec.answer).empty() || detail::trim(rec.evidence).empty())
    return {false, "empty"};
  if (!evidence_contained(rec.document, rec.evidence)) return {false, "fidelity"};
  return parse_verdict(judge.complete(judge_prompt(rec))) ? FilterResult{true, "ok"} : FilterResult{false, "judge"};
}

/// Offline generator: turns one sentence of the context into a cloze-style
/// question whose answer is the sentence's final word.
class ClozeGenerator : public GenClient {
 public:
  explicit ClozeGenerator(std::uint64_t seed = 0) : rng_(seed) {}

  std::string complete(const std::string& prompt) override {
    const auto context = detail::field_after(prompt, "Context", "\n\nYour output:");
    const auto type = detail::field_after(prompt, "The question should be of the type", ".\n\n");
    std::vector<std::string> usable;
    for (auto& s : detail::sentences(context))
      if (detail::words(s).size() >= 4 && s.back() == '.') usable.push_back(s);
    if (usable.empty()) return "I cannot generate a question for this context.";
    std::lock_guard lock(mu_);
    const auto& s = usable[std::uniform_int_distribution<std::size_t>(0, usable.size() - 1)(rng_)];
    const auto w = detail::words(s);
    const std::string answer = w.back();
    const std::string blank = s.substr(0, s.rfind(answer)) + "___.";
    nlohmann::json out;
    out["evidence"] = s;
    if (type == "true/false") {
      out["question"] = "True or false: " + s;
      out["answer"] = "True";
    } else if (type == "multiple choice") {
      std::vector<std::string> options = {answer};
      for (const auto& other : usable) {
        const auto ow = detail::words(other).back();
        if (options.size() < 4 && std::find(options.begin(), options.end(), ow) == options.end()) options.push_back(ow);
      }
      std::shuffle(options.begin(), options.end(), rng_);
      std::string q = "Which word completes the sentence? " + blank;
      for (std::size_t i = 0; i < options.size(); ++i) q += std::string(" (") + char('A' + i) + ") " + options[i];
      out["question"] = q;
      out["answer"] = answer;
    } else {
      out["question"] = "Complete the sentence: " + blank;
      out["answer"] = answer;
    }
    return "json\n" + out.dump(4);
  }
  std::string name() const override { return "cloze"; }

 private:
  std::mt19937_64 rng_;
  std::mutex mu_;
};

/// Offline judge: true when every number and every answer word of three or
/// more letters (other than true/false/yes/no) appears in the evidence, and
/// the question shares a four-letter word stem with it.
class RuleJudge : public GenClient {
 public:
  std::string complete(const std::string& prompt) override {
    const auto question = detail::field_after(prompt, "Question", "\n\nEvidence: ");
    const auto evidence = detail::field_after(prompt, "Evidence", "\n\nAnswer: ");
    const auto answer = detail::field_after(prompt, "Answer", "\n\nPlease respond");
    const auto ev = detail::lower(evidence);
    const auto ev_words = detail::words(ev);
    auto has = [&](const std::string& w) { return std::find(ev_words.begin(), ev_words.end(), w) != ev_words.end(); };
    bool ok = !ev_words.empty();
    for (const auto& w : detail::words(detail::lower(answer))) {
      const bool numeric = std::isdigit(static_cast<unsigned char>(w[0]));
      if (w == "true" || w == "false" || w == "yes" || w == "no" || (w.size() < 3 && !numeric)) continue;
      ok = ok && has(w);
    }
    bool shared = false;
    for (const auto& w : detail::words(detail::lower(question))) {
      if (w.size() < 4) continue;
      for (const auto& e : ev_words)
        if (e.size() >= 4 && e.compare(0, 4, w, 0, 4) == 0) shared = true;
    }
    return ok && shared ? "true" : "false";
  }
  std::string name() const override { return "rule-judge"; }
};

struct RawDocument {
  std::string doc_id;
  std::string text;
};

struct CorpusConfig {
  /// Accepted records wanted per bucket (keyed by "lo-hi"); buckets not
  /// listed take every eligible document once.
  std::map<std::string, std::size_t> targets;
  double train = 0.8, val = 0.1, test = 0.1;
  std::uint64_t seed = 0;
  int max_attempts = 3;
  std::size_t concurrency = 1;
};

struct CorpusStats {
  std::string range;
  Split split;
  TokenCount total_tokens = 0;
  std::size_t samples = 0;
};

struct Corpus {
  std::vector<QARecord> records;
  std::vector<CorpusStats> stats;
  std::vector<std::string> warnings;
  std::map<std::string, std::size_t> rejected;  // reason -> count
};

/// Assigns splits per document so no doc_id crosses splits. Counts follow
/// the ratios with largest-remainder rounding over the shuffled id list.
inline std::map<std::string, Split> assign_splits(std::vector<std::string> doc_ids, const CorpusConfig& cfg) {
  std::sort(doc_ids.begin(), doc_ids.end());
  doc_ids.erase(std::unique(doc_ids.begin(), doc_ids.end()), doc_ids.end());
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(doc_ids.begin(), doc_ids.end(), rng);
  const double n = static_cast<double>(doc_ids.size());
  const double want[] = {cfg.train * n, cfg.val * n, cfg.test * n};
  std::size_t cnt[3];
  std::size_t used = 0;
  for (int i = 0; i < 3; ++i) used += cnt[i] = static_cast<std::size_t>(std::floor(want[i]));
  std::vector<int> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return want[a] - std::floor(want[a]) > want[b] - std::floor(want[b]); });
  for (std::size_t k = 0; used < doc_ids.size(); ++k, ++used) ++cnt[order[k % 3]];
  std::map<std::string, Split> out;
  std::size_t i = 0;
  for (int s = 0; s < 3; ++s)
    for (std::size_t j = 0; j < cnt[s]; ++j) out[doc_ids[i++]] = static_cast<Split>(s);
  return out;
}

/// One QA job: document, slice seed and question type are fixed up front so
/// the outcome does not depend on scheduling.
struct QaJob {
  std::size_t doc;
  std::uint64_t seed;
  QuestionType qtype;
};

inline Corpus build_corpus(const std::vector<RawDocument>& docs, GenClient& generator, GenClient& judge,
                           const Tokenizer& tok, const BucketTable& table, const CorpusConfig& cfg = {}) {
  require(std::abs(cfg.train + cfg.val + cfg.test - 1.0) < 1e-9, ErrorKind::ConfigError, "split ratios must sum to 1");
  Corpus corpus;
  std::mt19937_64 rng(cfg.seed);

  std::map<std::size_t, std::vector<std::size_t>> by_bucket;
  std::vector<TokenCount> counts(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    counts[i] = static_cast<TokenCount>(tok.count(docs[i].text));
    if (counts[i] > table.max_tokens()) {
      corpus.warnings.push_back("document " + docs[i].doc_id + " exceeds the bucket table; skipped");
      continue;
    }
    by_bucket[table.index_of(counts[i])].push_back(i);
  }

  std::vector<QaJob> jobs;
  for (auto& [bi, members] : by_bucket) {
    const auto name = to_string(table.ranges()[bi]);
    std::shuffle(members.begin(), members.end(), rng);
    const auto it = cfg.targets.find(name);
    const std::size_t want = it == cfg.targets.end() ? members.size() : it->second;
    if (want > members.size())
      corpus.warnings.push_back("InsufficientData: bucket " + name + " has " + std::to_string(members.size()) +
                                " documents for " + std::to_string(want) + " records; reusing with new slices");
    for (std::size_t k = 0; k < want; ++k) jobs.push_back({members[k % members.size()], rng(), random_question_type(rng)});
  }

  std::vector<std::optional<QARecord>> results(jobs.size());
  std::vector<std::string> reasons(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const auto& job = jobs[j];
      const auto& raw = docs[job.doc];
      const Document full{raw.text, counts[job.doc]};
      std::mt19937_64 local(job.seed);
      for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        const auto ctx = sample_slice(full, default_num_slices(full.token_count), local(), tok);
        try {
          auto rec = generate_qa(generator, ctx, job.qtype);
          const auto verdict = filter_qa(judge, rec);
          if (!verdict.accepted) {
            reasons[j] = verdict.reason;
            continue;
          }
          rec.doc_id = raw.doc_id;
          rec.document = raw.text;
          rec.token_count = full.token_count;
          rec.bucket = bucket_of(full.token_count, table);
          results[j] = std::move(rec);
          break;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::ParseError && e.kind() != ErrorKind::ClientError &&
              e.kind() != ErrorKind::JudgeUnparseable)
            throw;
          reasons[j] = std::string(to_string(e.kind()));
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::max<std::size_t>(1, cfg.concurrency); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<std::string> ids;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (results[j]) {
      ids.push_back(results[j]->doc_id);
      corpus.records.push_back(std::move(*results[j]));
    } else {
      ++corpus.rejected[reasons[j].empty() ? "unknown" : reasons[j]];
    }
  }
  const auto splits = assign_splits(ids, cfg);
  for (auto& r : corpus.records) r.split = splits.at(r.doc_id);

  for (const auto& b : table.ranges()) {
    for (Split s : {Split::Train, Split::Val, Split::Test}) {
      CorpusStats st{to_string(b), s, 0, 0};
      for (const auto& r : corpus.records) {
        if (r.bucket == b && r.split == s) {
          st.total_tokens += r.token_count;
          ++st.samples;
        }
      }
      if (st.samples) corpus.stats.push_back(st);
    }
  }
  return corpus;
}

inline void write_records_jsonl(const std::filesystem::path& path, const std::vector<QARecord>& records) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::IoError, "cannot write " + path.string());
  for (const auto& r : records) os << r.to_json().dump() << '\n';
}

inline std::vector<QARecord> read_records_jsonl(const std::filesystem::path& path, const Tokenizer* tok = nullptr) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorKind::IoError, "cannot read " + path.string());
  std::vector<QARecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(QARecord::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
    if (tok) out.back().token_count = static_cast<TokenCount>(tok->count(out.back().document));
  }
  return out;
}

inline void write_stats_csv(const std::filesystem::path& path, const std::vector<CorpusStats>& stats) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::IoError, "cannot write " + path.string());
  os << "token_range,split,total_tokens,samples\n";
  for (const auto& s : stats) os << s.range << ',' << to_string(s.split) << ',' << s.total_tokens << ',' << s.samples << '\n';
}

}  // namespace drift
