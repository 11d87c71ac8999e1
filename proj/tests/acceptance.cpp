// End-to-end acceptance run. Prints one PASS/FAIL line per criterion; pass
// criterion numbers as arguments to run a subset.
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "drift/datagen.hpp"
#include "drift/evaluation.hpp"
#include "drift/synth.hpp"
#include "drift/toy.hpp"
#include "fixtures.hpp"

using namespace drift;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::string> articles(std::uint64_t seed, int n, const std::string& prefix = "a") {
  synth::Generator g(seed);
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(g.article(prefix + std::to_string(i)).text);
  return out;
}

/// Article text cut to exactly n tokens of `m`'s tokenizer.
std::string text_of_tokens(const CausalLM& m, TokenCount n, std::uint64_t seed) {
  synth::Generator g(seed);
  std::string s;
  while (static_cast<TokenCount>(m.tokenizer.count(s)) < n) s += (s.empty() ? "" : " ") + g.article("t").text;
  auto ids = m.tokenize(s);
  ids.resize(static_cast<std::size_t>(n));
  return m.tokenizer.decode(ids);
}

/// Toy pair whose reasoner has been pretrained as a plain language model on
/// articles disjoint from every evaluation document.
DriftStack pretrained_stack() {
  const auto corpus = articles(101, 600, "pre");
  ToyConfig cfg;
  cfg.knowledge_positions = 512;
  cfg.reasoner_positions = 512;
  auto s = make_toy_stack(corpus, cfg);
  lm_pretrain(s.reasoner, corpus, 2000, 3e-3f, 128, 5);
  return s;
}

/// Fresh copy of the pretrained pair, shared through a checkpoint on disk.
DriftStack base_stack() {
  static const std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() / "drift-acceptance-base";
    std::filesystem::remove_all(d);
    save_stack(d, pretrained_stack());
    return d;
  }();
  return load_stack(dir);
}

/// Optimizer loop over single-example steps, mirroring the curriculum
/// without its range bookkeeping.
std::vector<float> overfit(DriftStack& s, const StageConfig& cfg, const std::vector<QARecord>& data) {
  apply_freeze(s, cfg);
  s.zero_grad();
  AdamW opt = make_optimizer(s, cfg.optimizer);
  const WarmupSchedule sched{cfg.optimizer.lr, cfg.steps_per_range, cfg.optimizer.warmup_frac};
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  std::vector<float> losses;
  for (std::int64_t k = 0; k < cfg.steps_per_range; ++k) {
    double total = 0;
    for (int b = 0; b < cfg.optimizer.effective_batch; ++b) {
      if (cursor == order.size()) {
        order.resize(data.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      total += objective_step(s, cfg.objective, data[order[cursor++]], cfg.compression);
    }
    opt.step(sched.lr(k), 1.0f / static_cast<float>(cfg.optimizer.effective_batch));
    s.zero_grad();
    losses.push_back(static_cast<float>(total / cfg.optimizer.effective_batch));
  }
  return losses;
}

// ---- criteria ----

Outcome bucket_arithmetic() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto table = BucketTable::default_table();
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<TokenCount> dn(1, 8192), dc(1, 512);
  int bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const TokenCount n = dn(rng), c = dc(rng);
    TokenCount b = 128;
    while (b < n) b *= 2;
    const TokenCount expect = (b + c - 1) / c;
    const TokenCount xi = xi_bucket(n, c, table);
    const Bucket bk = bucket_of(n, table);
    bool ok = xi == expect && bk.upper == b && n <= bk.upper && (n > bk.lower || bk.lower == 64) && xi >= 1 &&
              xi * c >= bk.upper && (xi - 1) * c < bk.upper && xi >= xi_uniform(n, c);
    if (n < 8192) ok = ok && xi_bucket(n + 1, c, table) >= xi;
    if (c > 1) ok = ok && xi_bucket(n, c - 1, table) >= xi;
    bad += !ok;
  }
  bool overflow = false;
  try {
    xi_bucket(8193, 8, table);
  } catch (const Error& e) {
    overflow = e.kind() == ErrorKind::OutOfRange;
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && overflow && secs < 10.0,
          "10000 pairs, " + std::to_string(bad) + " mismatches, " + fmt(secs, 3) + " s"};
}

Outcome shape_law() {
  const auto corpus = articles(7, 300);
  ToyConfig cfg;
  cfg.width = 32;
  cfg.reasoner_width = 32;
  cfg.knowledge_positions = 7000 + 2 * 1024 + 512;
  cfg.reasoner_positions = 1024 + 512;
  auto s = make_toy_stack(corpus, cfg);
  const std::vector<TokenCount> lengths = {100, 520, 7000}, ratios = {8, 32, 128};
  const std::vector<std::vector<Eigen::Index>> expect = {{16, 4, 1}, {128, 32, 8}, {1024, 256, 64}};
  auto count = [&](std::string_view t) { return static_cast<std::size_t>(s.reasoner.tokenize(t).size()); };
  const std::string rec_t(templates::kReconstruct), slot = "{compressed_information}";
  const auto rp = rec_t.find(slot);
  const std::size_t rec_instr = count(rec_t.substr(0, rp)) + count(rec_t.substr(rp + slot.size()));

  int bad = 0;
  std::ostringstream rows;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const auto doc = Document::from_text(text_of_tokens(s.knowledge, lengths[i], 10 + i), s.knowledge.tokenizer);
    bad += doc.token_count != lengths[i];
    for (std::size_t j = 0; j < ratios.size(); ++j) {
      LatentSequence seq;
      seq.blocks.push_back(compress_static(s.knowledge, doc, {ratios[j], CompressionMode::Static}, s.table));
      const auto n = seq.blocks[0].values.rows();
      rows << (i || j ? "/" : "") << n;
      bad += n != expect[i][j];
      const auto a = assemble_reconstruction(s.reasoner, project(s.projector, s.reasoner, seq));
      bad += a.input.length() != rec_instr + static_cast<std::size_t>(n);
    }
  }

  // Chunked dynamic path: instruction + sum of per-chunk xi + separators + question.
  const auto doc = Document::from_text(text_of_tokens(s.knowledge, 7000, 12), s.knowledge.tokenizer);
  const std::string q = "Who founded the town?";
  const OverlapConfig cc{1024, 64, 32};
  const auto chunks = overlapping_split(doc, cc, s.knowledge.tokenizer);
  std::string ans_t(templates::kAnswer);
  auto fill = [&](const std::string& key, const std::string& v) {
    const auto p = ans_t.find("{" + key + "}");
    ans_t.replace(p, key.size() + 2, v);
  };
  fill("num", std::to_string(chunks.size()));
  fill("answer_prefix", std::string(templates::kAnswerPrefix));
  const auto cp = ans_t.find(slot);
  const auto qp = ans_t.find("{question}");
  const std::size_t ans_instr = count(ans_t.substr(0, cp)) +
                                count(ans_t.substr(cp + slot.size(), qp - cp - slot.size())) +
                                count(ans_t.substr(qp + std::string_view("{question}").size()));
  for (TokenCount c : ratios) {
    const auto seq = compress_document(s.knowledge, doc, q, CompressionSpec::dynamic(c), cc, s.table);
    std::size_t xi_prime = (chunks.size() - 1) * count(kChunkSeparator);
    for (const auto& ch : chunks.chunks) {
      TokenCount b = 128;
      while (b < ch.token_count) b *= 2;
      xi_prime += static_cast<std::size_t>((b + c - 1) / c);
    }
    const auto a = assemble_answer(s.reasoner, project(s.projector, s.reasoner, seq), q, std::nullopt);
    bad += a.input.length() != ans_instr + xi_prime + count(q);
  }
  return {bad == 0, "rows " + rows.str() + ", " + std::to_string(chunks.size()) + "-chunk answer input checked, " +
                        std::to_string(bad) + " mismatches"};
}

Outcome gradient_routing() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto corpus = articles(8, 300);
  ToyConfig cfg;
  cfg.knowledge_positions = 512;
  cfg.reasoner_positions = 512;
  auto s = make_toy_stack(corpus, cfg);
  synth::Generator g(80);
  const auto a = g.article("r");
  auto rec = fixtures::from_fact(a, a.facts[1]);
  rec.token_count = static_cast<TokenCount>(s.knowledge.tokenizer.count(rec.document));
  rec.bucket = bucket_of(rec.token_count, s.table);
  bool ok = true;
  std::ostringstream d;
  for (Objective o : {Objective::Lfrp, Objective::QaftDc, Objective::QaftQa}) {
    const auto stage = StageConfig::defaults(o);
    apply_freeze(s, stage);
    s.zero_grad();
    objective_step(s, o, rec, stage.compression);
    double frozen = 0, trainable_min = 1e300;
    std::map<std::string, double> group;
    s.for_each_group([&](const std::string& name, Parameter& p) {
      if (p.trainable) group[name] += p.grad_norm();
      else frozen += p.grad_norm();
    });
    for (const auto& [name, v] : group) {
      trainable_min = std::min(trainable_min, v);
      if (v == 0.0) d << "no gradient in " << name << ", ";
    }
    double reasoner = 0;
    s.reasoner.net.for_each_parameter([&](std::string_view, Parameter& p) { reasoner += p.grad_norm(); });
    const bool reasoner_ok = stage.freeze == FreezePolicy::ReasonerFrozen ? reasoner == 0.0 : reasoner > 0.0;
    ok = ok && frozen == 0.0 && trainable_min > 0.0 && reasoner_ok;
    d << to_string(o) << ": frozen " << frozen << ", reasoner " << fmt(reasoner, 4) << "; ";
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 120.0, d.str() + fmt(secs) + " s"};
}

Outcome lfrp_overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  DriftStack s = base_stack();
  std::vector<QARecord> data;
  std::vector<Document> docs;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 32; ++i) {
    const auto n = std::uniform_int_distribution<TokenCount>(65, 128)(rng);
    QARecord r;
    r.doc_id = "lfrp" + std::to_string(i);
    r.document = text_of_tokens(s.knowledge, n, 500 + static_cast<std::uint64_t>(i));
    docs.push_back(Document::from_text(r.document, s.knowledge.tokenizer));
    r.token_count = docs.back().token_count;
    r.bucket = bucket_of(r.token_count, s.table);
    data.push_back(r);
  }
  const CompressionSpec spec{8, CompressionMode::Static};
  const auto before = eval_reconstruction(s, docs, spec);

  StageConfig cfg = StageConfig::defaults(Objective::Lfrp);
  cfg.ranges = {{64, 128}};
  cfg.steps_per_range = 2000;
  cfg.optimizer.effective_batch = 4;
  cfg.optimizer.lr = 1e-3f;
  cfg.knowledge_policy = TrainPolicy::Full;
  cfg.seed = 9;
  CurriculumOptions opts;
  opts.dropout = false;
  const auto st = run_curriculum({cfg}, s, data, opts);
  const auto after = eval_reconstruction(s, docs, spec);
  const double secs = seconds_since(t0);
  const bool ok = after.exact >= 0.9 && after.rougeL >= 95.0 && before.rougeL < 10.0 && secs < 1800.0;
  return {ok, "before R-L " + fmt(before.rougeL) + "; after " + std::to_string(st.step) + " steps: loss " +
                  fmt(st.loss_history.back().loss, 3) + ", exact " + fmt(100 * after.exact, 1) + "%, R-L " +
                  fmt(after.rougeL) + ", BLEU " + fmt(after.bleu) + "; " + fmt(secs, 0) + " s"};
}

/// Records from single articles whose chosen fact sentence is short.
std::vector<QARecord> short_fact_records(const DriftStack& s, std::uint64_t seed, std::size_t n,
                                         std::size_t max_evidence_tokens) {
  synth::Generator g(seed);
  std::vector<QARecord> out;
  while (out.size() < n) {
    const auto a = g.article("f" + std::to_string(out.size()));
    for (std::size_t k = a.facts.size(); k-- > 0;) {
      if (s.reasoner.tokenize(a.facts[k].sentence).size() > max_evidence_tokens) continue;
      auto r = fixtures::from_fact(a, a.facts[k]);
      r.token_count = static_cast<TokenCount>(s.knowledge.tokenizer.count(r.document));
      r.bucket = bucket_of(r.token_count, s.table);
      out.push_back(r);
      break;
    }
  }
  return out;
}

Outcome qaft_dc_overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  DriftStack s = base_stack();
  const auto data = short_fact_records(s, 600, 16, 10);
  StageConfig cfg = StageConfig::defaults(Objective::QaftDc);
  cfg.compression = CompressionSpec::dynamic(32);
  cfg.steps_per_range = 6000;
  cfg.optimizer.effective_batch = 4;
  cfg.optimizer.lr = 3e-3f;
  cfg.knowledge_policy = TrainPolicy::Full;
  cfg.seed = 10;
  const auto losses = overfit(s, cfg, data);
  int hits = 0;
  for (const auto& r : data) hits += metrics::exact_match(reconstruct_evidence(s, r, cfg.compression, 16), r.evidence);
  const double secs = seconds_since(t0);
  const double rate = hits / static_cast<double>(data.size());
  return {rate >= 0.9 && secs < 1200.0, std::to_string(hits) + "/16 evidence verbatim, final loss " +
                                            fmt(losses.back(), 3) + ", " + fmt(secs, 0) + " s"};
}

Outcome qaft_qa_overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  DriftStack s = base_stack();
  const auto data = short_fact_records(s, 700, 16, 64);
  StageConfig cfg = StageConfig::defaults(Objective::QaftQa);
  cfg.compression = CompressionSpec::dynamic(32);
  cfg.steps_per_range = 3000;
  cfg.optimizer.effective_batch = 4;
  cfg.optimizer.lr = 2e-3f;
  cfg.knowledge_policy = TrainPolicy::Full;
  cfg.reasoner_policy = TrainPolicy::Adapter;
  cfg.seed = 11;
  const auto losses = overfit(s, cfg, data);
  s.knowledge.net.set_policy(TrainPolicy::Frozen);
  const AnswerOptions opt{cfg.compression, {1024, 64, 0}, 1, 12};
  const auto rep = eval_qa(s, data, Scorer::ExactMatch, nullptr, opt);
  const double secs = seconds_since(t0);
  return {rep.accuracy >= 0.9 && secs < 1200.0, fmt(100 * rep.accuracy, 1) + "% exact, final loss " +
                                                    fmt(losses.back(), 3) + ", " + fmt(secs, 0) + " s"};
}

Outcome med_correctness() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(0.01f, 1.0f);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Mat P(6, 9), Q(6, 9);
    for (Mat* m : {&P, &Q}) {
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = u(rng);
      for (Eigen::Index i = 0; i < m->rows(); ++i) m->row(i) /= m->row(i).sum();
    }
    double oracle = 0;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 9; ++j) oracle += double(P(i, j)) * std::log(double(P(i, j)) / double(Q(i, j)));
    worst = std::max(worst, std::abs(mean_kl(P, Q) - oracle / 6));
  }

  const auto corpus = articles(13, 300);
  ToyConfig cfg;
  cfg.width = 32;
  cfg.reasoner_width = 32;
  cfg.knowledge_positions = 512;
  cfg.reasoner_positions = 512;
  auto s = make_toy_stack(corpus, cfg);
  synth::Generator g(130);
  std::mt19937_64 pick(1);
  double min_med = 1e300;
  for (int i = 0; i < 100; ++i) {
    const auto a = g.article("m" + std::to_string(i));
    const auto& f = a.facts[std::uniform_int_distribution<std::size_t>(0, a.facts.size() - 1)(pick)];
    min_med = std::min(min_med, compute_med(s, fixtures::from_fact(a, f)));
  }

  auto run = [&](bool log) {
    auto t = make_toy_stack(corpus, cfg);
    synth::Generator dg(131);
    std::vector<QARecord> data;
    for (int i = 0; i < 4; ++i) {
      const auto a = dg.article("l" + std::to_string(i));
      auto r = fixtures::from_fact(a, a.facts[0]);
      r.token_count = static_cast<TokenCount>(t.knowledge.tokenizer.count(r.document));
      r.bucket = bucket_of(r.token_count, t.table);
      data.push_back(r);
    }
    StageConfig st = StageConfig::defaults(Objective::Lfrp);
    st.ranges = {{64, 128}};
    st.steps_per_range = 8;
    st.optimizer.effective_batch = 2;
    st.optimizer.lr = 1e-3f;
    MedTrace trace;
    CurriculumOptions opts;
    if (log) opts.on_step = med_logger({data[0], data[1]}, 2, trace);
    std::vector<float> losses;
    for (const auto& p : run_curriculum({st}, t, data, opts).loss_history) losses.push_back(p.loss);
    return std::make_pair(losses, trace.steps.size());
  };
  const auto [plain, none] = run(false);
  const auto [logged, points] = run(true);
  const bool identical = plain.size() == logged.size() &&
                         std::memcmp(plain.data(), logged.data(), plain.size() * sizeof(float)) == 0;
  return {worst <= 1e-6 && min_med >= 0.0 && identical && points == 4 && none == 0,
          "KL oracle max err " + fmt(worst * 1e9, 3) + "e-9, min M_ED over 100 pairs " + fmt(min_med, 5) +
              ", losses with/without logging " + (identical ? "bitwise identical" : "DIFFER") + " (" +
              std::to_string(points) + " trace points)"};
}

Outcome ttft_scaling() {
  const auto corpus = articles(14, 300);
  ToyConfig cfg;
  cfg.knowledge_positions = 1024 + 512;
  cfg.reasoner_positions = 8192 + 512;
  auto s = make_toy_stack(corpus, cfg);
  TtftConfig tc;
  tc.spec = CompressionSpec::dynamic(32);
  tc.chunking = {1024, 64, 32};
  tc.warmup = 1;
  tc.repetitions = 3;
  const std::vector<TokenCount> lengths = {8192, 16384, 32768, 65536};
  auto full = measure_ttft(s, lengths, TtftMode::FullContext, tc);
  auto drift = measure_ttft(s, lengths, TtftMode::Drift, tc);
  std::vector<TtftRow> rows = full;
  rows.insert(rows.end(), drift.begin(), drift.end());
  write_ttft_csv("acceptance_ttft.csv", rows);

  bool ok = true;
  double worst_ratio = 1e300;
  for (const auto& r : drift) {
    const double ratio = double(r.length) / double(r.reasoner_input);
    worst_ratio = std::min(worst_ratio, ratio);
    ok = ok && r.status == "ok" && ratio >= 16.0;
  }
  std::ptrdiff_t last = -1;
  for (std::size_t i = 0; i < full.size(); ++i)
    if (full[i].status == "ok") last = static_cast<std::ptrdiff_t>(i);
  std::string cmp = "full context never fit";
  if (last >= 0) {
    const auto& f = full[static_cast<std::size_t>(last)];
    const auto& d = drift[static_cast<std::size_t>(last)];
    ok = ok && d.seconds < f.seconds;
    cmp = "at " + std::to_string(f.length) + " tokens drift " + fmt(d.seconds, 3) + " s vs full " + fmt(f.seconds, 3) +
          " s";
  } else {
    ok = false;
  }
  return {ok, "min compression of reasoner input " + fmt(worst_ratio, 1) + "x, " + cmp +
                  ", curve in acceptance_ttft.csv"};
}

Outcome data_pipeline() {
  RuleJudge judge;
  int separated = 0;
  const auto fx = fixtures::adversarial();
  for (const auto& item : fx) separated += filter_qa(judge, item.record).accepted == item.good;

  synth::Generator g(15);
  std::vector<RawDocument> docs;
  std::vector<std::string> texts;
  for (int i = 0; i < 50; ++i) {
    docs.push_back({"doc" + std::to_string(i), g.article("d" + std::to_string(i)).text});
    texts.push_back(docs.back().text);
  }
  const auto tok = Tokenizer::build(texts, 1000, 2);
  const auto table = BucketTable::default_table();
  CorpusConfig cc;
  cc.seed = 5;
  auto build = [&] {
    ClozeGenerator gen(cc.seed);
    RuleJudge j;
    return build_corpus(docs, gen, j, tok, table, cc);
  };
  const auto a = build(), b = build();
  std::map<Split, std::set<std::string>> ids;
  for (const auto& r : a.records) ids[r.split].insert(r.doc_id);
  bool disjoint = true;
  std::map<std::string, int> seen;
  for (const auto& [sp, set] : ids)
    for (const auto& id : set) disjoint = disjoint && ++seen[id] == 1;
  bool same = a.records.size() == b.records.size();
  for (std::size_t i = 0; same && i < a.records.size(); ++i) same = a.records[i].to_json() == b.records[i].to_json();
  const auto n_tr = ids[Split::Train].size(), n_va = ids[Split::Val].size(), n_te = ids[Split::Test].size();
  const bool ratio = n_tr == 40 && n_va == 5 && n_te == 5;
  return {separated == 20 && disjoint && same && ratio,
          std::to_string(separated) + "/20 adversarial separated; docs per split " + std::to_string(n_tr) + ":" +
              std::to_string(n_va) + ":" + std::to_string(n_te) + ", " + (disjoint ? "disjoint" : "OVERLAP") + ", " +
              (same ? "deterministic" : "NOT deterministic")};
}

Outcome multi_context() {
  const auto corpus = articles(16, 300);
  ToyConfig cfg;
  cfg.knowledge_positions = 1024;
  auto s = make_toy_stack(corpus, cfg);
  const auto spec = CompressionSpec::dynamic(32);
  const std::string q = "When was it founded?";
  const auto one = Document::from_text(text_of_tokens(s.knowledge, 400, 160), s.knowledge.tokenizer);
  const auto seq1 = compress_document(s.knowledge, one, q, spec, {512, 32, 32}, s.table);
  const bool k1 = seq1.blocks.size() == 1 && seq1.blocks[0].values == compress_dynamic(s.knowledge, one, q, spec).values;

  const auto three = Document::from_text(text_of_tokens(s.knowledge, 1300, 161), s.knowledge.tokenizer);
  const OverlapConfig cc{512, 32, 32};
  const auto seq = compress_document(s.knowledge, three, q, spec, cc, s.table, 1);
  const auto par = compress_document(s.knowledge, three, q, spec, cc, s.table, 3);
  bool k3 = seq.blocks.size() == 3 && par.blocks.size() == 3;
  for (std::size_t i = 0; k3 && i < 3; ++i)
    k3 = seq.blocks[i].values == par.blocks[i].values && par.blocks[i].chunk_index == i;
  return {k1 && k3, std::string("K=1 ") + (k1 ? "bitwise equal" : "DIFFERS") + ", K=" +
                        std::to_string(seq.blocks.size()) + " parallel vs sequential " +
                        (k3 ? "blockwise equal" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"bucket arithmetic", bucket_arithmetic},
      {"shape law end-to-end", shape_law},
      {"gradient routing", gradient_routing},
      {"LFRP overfit", lfrp_overfit},
      {"QAFT-DC overfit", qaft_dc_overfit},
      {"QAFT-QA overfit", qaft_qa_overfit},
      {"M_ED correctness", med_correctness},
      {"TTFT scaling", ttft_scaling},
      {"data pipeline", data_pipeline},
      {"multi-context equivalence", multi_context},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "[" << id << "] " << criteria[i].first << ": " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail << ")"
              << std::endl;
  }
  return failed ? 1 : 0;
}
