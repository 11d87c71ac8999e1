#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "drift/datagen.hpp"
#include "drift/metrics.hpp"
#include "drift/synth.hpp"
#include "drift/training.hpp"

namespace drift {

struct ReconReport {
  double bleu = 0, rouge1 = 0, rouge2 = 0, rougeL = 0;
  double exact = 0;  // fraction of documents reproduced verbatim
  std::size_t n_samples = 0;
  std::vector<std::string> outputs;

  nlohmann::json to_json() const {
    return {{"bleu", bleu}, {"rouge1", rouge1}, {"rouge2", rouge2}, {"rougeL", rougeL},
            {"exact", exact}, {"n_samples", n_samples}};
  }
};

/// Scores predictions against references: corpus BLEU, mean per-pair ROUGE.
inline ReconReport score_texts(const std::vector<std::string>& preds, const std::vector<std::string>& refs) {
  ReconReport r;
  r.n_samples = preds.size();
  r.bleu = metrics::corpus_bleu(preds, refs);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    r.rouge1 += metrics::rouge_n(preds[i], refs[i], 1);
    r.rouge2 += metrics::rouge_n(preds[i], refs[i], 2);
    r.rougeL += metrics::rouge_l(preds[i], refs[i]);
    r.exact += preds[i] == refs[i] ? 1.0 : 0.0;
  }
  const auto n = static_cast<double>(preds.size());
  r.rouge1 /= n;
  r.rouge2 /= n;
  r.rougeL /= n;
  r.exact /= n;
  r.outputs = preds;
  return r;
}

/// Static compression of the whole document followed by greedy decoding of
/// the reconstruction prompt.
inline std::string reconstruct(DriftStack& s, const Document& doc,
                               const CompressionSpec& spec = CompressionSpec::static_default(),
                               std::size_t max_new = 0) {
  LatentSequence seq;
  seq.blocks.push_back(compress_static(s.knowledge, doc, spec, s.table));
  const auto facts = project(s.projector, s.reasoner, seq);
  const auto a = assemble_reconstruction(s.reasoner, facts);
  if (max_new == 0) max_new = s.reasoner.tokenizer.count(doc.text) + 8;
  return s.reasoner.tokenizer.decode(generate(s.reasoner, a.input, max_new));
}

inline ReconReport eval_reconstruction(DriftStack& s, const std::vector<Document>& docs,
                                       const CompressionSpec& spec = CompressionSpec::static_default()) {
  require(!docs.empty(), ErrorKind::EmptyInput, "no documents to evaluate");
  std::vector<std::string> preds, refs;
  for (const auto& d : docs) {
    preds.push_back(reconstruct(s, d, spec));
    refs.push_back(d.text);
  }
  return score_texts(preds, refs);
}

/// Query-aware evidence reconstruction (the decoding side of the DC task).
inline std::string reconstruct_evidence(DriftStack& s, const QARecord& rec,
                                        const CompressionSpec& spec = CompressionSpec::dynamic_default(),
                                        std::size_t max_new = 64) {
  LatentSequence seq;
  seq.blocks.push_back(
      compress_dynamic(s.knowledge, Document::from_text(rec.document, s.knowledge.tokenizer), rec.question, spec, s.table));
  const auto facts = project(s.projector, s.reasoner, seq);
  return s.reasoner.tokenizer.decode(generate(s.reasoner, assemble_reconstruction(s.reasoner, facts).input, max_new));
}

struct AnswerOptions {
  CompressionSpec spec = CompressionSpec::dynamic_default();
  OverlapConfig chunking{};
  std::size_t parallelism = 1;
  std::size_t max_new = 64;
};

struct AnswerTrace {
  std::string answer;
  TokenCount xi = 0;
  std::size_t chunks = 0;
  std::size_t reasoner_input = 0;
};

/// Full inference path: chunk, compress against the question, project,
/// assemble and decode greedily.
inline AnswerTrace answer_question(DriftStack& s, const std::string& document, const std::string& question,
                                   const AnswerOptions& opt = {}) {
  const auto doc = Document::from_text(document, s.knowledge.tokenizer);
  const auto seq = compress_document(s.knowledge, doc, question, opt.spec, opt.chunking, s.table, opt.parallelism);
  const auto facts = project(s.projector, s.reasoner, seq);
  const auto a = assemble_answer(s.reasoner, facts, question, std::nullopt);
  AnswerTrace t;
  t.xi = seq.total_xi();
  t.chunks = seq.blocks.size();
  t.reasoner_input = a.input.length();
  t.answer = s.reasoner.tokenizer.decode(generate(s.reasoner, a.input, opt.max_new));
  return t;
}

enum class Scorer { ExactMatch, Judge };

struct QaReport {
  double accuracy = 0;
  std::size_t n = 0;
  std::size_t unparseable = 0;
  std::vector<std::string> outputs;

  nlohmann::json to_json() const { return {{"accuracy", accuracy}, {"n", n}, {"unparseable", unparseable}}; }
};

/// Accuracy of greedy answers. With the judge scorer the gold evidence is the
/// reference and an unparseable verdict counts as wrong.
inline QaReport eval_qa(DriftStack& s, const std::vector<QARecord>& records, Scorer scorer = Scorer::ExactMatch,
                        GenClient* judge = nullptr, const AnswerOptions& opt = {}) {
  require(!records.empty(), ErrorKind::EmptyInput, "no QA records to evaluate");
  require(scorer == Scorer::ExactMatch || judge, ErrorKind::ConfigError, "judge scorer needs a client");
  QaReport r;
  r.n = records.size();
  std::size_t correct = 0;
  for (const auto& rec : records) {
    const auto out = answer_question(s, rec.document, rec.question, opt).answer;
    r.outputs.push_back(out);
    if (scorer == Scorer::ExactMatch) {
      correct += metrics::exact_match(out, rec.answer) ? 1 : 0;
      continue;
    }
    QARecord probe = rec;
    probe.answer = out;
    try {
      correct += parse_verdict(judge->complete(judge_prompt(probe))) ? 1 : 0;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::JudgeUnparseable) throw;
      ++r.unparseable;
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n);
  return r;
}

// ---- time to first token ----

enum class TtftMode { FullContext, Drift };

inline std::string to_string(TtftMode m) { return m == TtftMode::FullContext ? "full_context" : "drift"; }

struct TtftConfig {
  CompressionSpec spec = CompressionSpec::dynamic_default();
  OverlapConfig chunking{1024, 64, 0};
  std::size_t parallelism = 1;
  int warmup = 1;
  int repetitions = 3;
  std::string question = "What is the document about?";
};

struct TtftRow {
  TokenCount length = 0;
  TtftMode mode = TtftMode::Drift;
  double seconds = std::numeric_limits<double>::quiet_NaN();
  std::size_t reasoner_input = 0;
  std::string status = "ok";
};

/// Text of exactly `n` tokens under `tok`, made of generated articles.
inline Document synthetic_document(const Tokenizer& tok, TokenCount n, std::uint64_t seed = 7) {
  synth::Generator g(seed);
  TokenIds ids;
  int k = 0;
  while (static_cast<TokenCount>(ids.size()) < n) {
    const auto more = tok.encode((ids.empty() ? "" : "\n\n") + g.article("s" + std::to_string(k++)).text);
    ids.insert(ids.end(), more.begin(), more.end());
  }
  // Cut on a token boundary and re-encode until the count is stable.
  ids.resize(static_cast<std::size_t>(n));
  std::string text = tok.decode(ids);
  while (static_cast<TokenCount>(tok.count(text)) > n) text.pop_back();
  return {text, static_cast<TokenCount>(tok.count(text))};
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Median wall time from receiving the document and question to the first
/// generated token, after `warmup` untimed runs.
inline TtftRow measure_ttft_one(DriftStack& s, const Document& doc, TtftMode mode, const TtftConfig& cfg) {
  TtftRow row;
  row.length = doc.token_count;
  row.mode = mode;
  auto once = [&] {
    if (mode == TtftMode::FullContext) {
      const auto a = assemble_answer(s.reasoner, Background{doc.text}, 1, cfg.question, std::nullopt);
      row.reasoner_input = a.input.length();
      require(a.input.length() < static_cast<std::size_t>(s.reasoner.net.config().max_positions),
              ErrorKind::ContextOverflow,
              "input of " + std::to_string(a.input.length()) + " tokens exceeds the reasoner window");
      generate(s.reasoner, a.input, 1);
    } else {
      const auto seq = compress_document(s.knowledge, doc, cfg.question, cfg.spec, cfg.chunking, s.table,
                                         cfg.parallelism);
      const auto facts = project(s.projector, s.reasoner, seq);
      const auto a = assemble_answer(s.reasoner, facts, cfg.question, std::nullopt);
      row.reasoner_input = a.input.length();
      generate(s.reasoner, a.input, 1);
    }
  };
  try {
    for (int i = 0; i < cfg.warmup; ++i) once();
    std::vector<double> times;
    for (int i = 0; i < std::max(1, cfg.repetitions); ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      once();
      times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    row.seconds = median(times);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ContextOverflow) throw;
    row.status = "context_overflow";
  }
  return row;
}

inline std::vector<TtftRow> measure_ttft(DriftStack& s, const std::vector<TokenCount>& lengths, TtftMode mode,
                                         const TtftConfig& cfg = {}) {
  std::vector<TtftRow> rows;
  for (auto n : lengths) rows.push_back(measure_ttft_one(s, synthetic_document(s.knowledge.tokenizer, n), mode, cfg));
  return rows;
}

inline void write_ttft_csv(const std::filesystem::path& path, const std::vector<TtftRow>& rows) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::IoError, "cannot write " + path.string());
  os << "length,mode,seconds,reasoner_input,status\n";
  for (const auto& r : rows)
    os << r.length << ',' << to_string(r.mode) << ',' << r.seconds << ',' << r.reasoner_input << ',' << r.status
       << '\n';
}

// ---- latent/explicit consistency ----

/// Mean over rows of KL(P_i || Q_i) for row-stochastic matrices, in double.
inline double mean_kl(const Mat& P, const Mat& Q) {
  require(P.rows() == Q.rows() && P.cols() == Q.cols(), ErrorKind::LengthMismatch,
          "distribution sets differ: " + std::to_string(P.rows()) + " vs " + std::to_string(Q.rows()) + " positions");
  require(P.rows() > 0, ErrorKind::EmptyInput, "no positions to compare");
  double total = 0.0;
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    double kl = 0.0;
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
      const double p = P(i, j), q = Q(i, j);
      if (p > 0.0) kl += p * (std::log(p) - std::log(std::max(q, 1e-300)));
    }
    total += std::max(kl, 0.0);
  }
  return total / static_cast<double>(P.rows());
}

inline std::vector<std::int64_t> masked_positions(const TargetMask& mask) {
  std::vector<std::int64_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] != kNoTarget) out.push_back(static_cast<std::int64_t>(i));
  return out;
}

/// KL between the reasoner's next-token distributions at the teacher-forced
/// answer positions, conditioned on fact embeddings versus on the evidence
/// text in the same answer template. No gradients are recorded.
inline double compute_med(CausalLM& reasoner, const FactEmbeddings& facts, const std::string& evidence,
                          const std::string& question, const TokenIds& answer) {
  const auto latent = assemble_answer(reasoner, Background{&facts}, facts.paragraphs, question, answer);
  const auto explicit_ = assemble_answer(reasoner, Background{evidence}, facts.paragraphs, question, answer);
  const auto pl = masked_positions(latent.mask);
  const auto pe = masked_positions(explicit_.mask);
  require(pl.size() == pe.size(), ErrorKind::LengthMismatch, "answer position sets differ");
  return mean_kl(next_token_probs(reasoner, latent.input, pl), next_token_probs(reasoner, explicit_.input, pe));
}

inline double compute_med(DriftStack& s, const QARecord& rec,
                          const CompressionSpec& spec = CompressionSpec::dynamic_default()) {
  LatentSequence seq;
  seq.blocks.push_back(
      compress_dynamic(s.knowledge, Document::from_text(rec.document, s.knowledge.tokenizer), rec.question, spec, s.table));
  const auto facts = project(s.projector, s.reasoner, seq);
  return compute_med(s.reasoner, facts, rec.evidence, rec.question, with_eos(s.reasoner.tokenize(rec.answer)));
}

struct MedTrace {
  std::vector<std::pair<std::int64_t, double>> steps;
};

/// Training hook that appends the mean M_ED over `probes` every `every` steps.
inline std::function<void(const TrainState&, DriftStack&)> med_logger(std::vector<QARecord> probes, std::int64_t every,
                                                                      MedTrace& trace,
                                                                      CompressionSpec spec = CompressionSpec::dynamic_default()) {
  return [probes = std::move(probes), every, &trace, spec](const TrainState& st, DriftStack& s) {
    if (probes.empty() || every <= 0 || st.step % every != 0) return;
    double total = 0.0;
    for (const auto& r : probes) total += compute_med(s, r, spec);
    trace.steps.emplace_back(st.step, total / static_cast<double>(probes.size()));
  };
}

inline void write_med_csv(const std::filesystem::path& path, const MedTrace& trace) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::IoError, "cannot write " + path.string());
  os << "step,med\n";
  for (const auto& [step, v] : trace.steps) os << step << ',' << v << '\n';
}

}  // namespace drift
