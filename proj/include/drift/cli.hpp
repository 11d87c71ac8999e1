#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "drift/config.hpp"
#include "drift/evaluation.hpp"
#include "drift/http_client.hpp"
#include "drift/synth.hpp"

namespace drift::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kRuntime = 1, kUsage = 2, kConfig = 3 };

/// Streams and the resolved config for one invocation.
struct Context {
  RunConfig cfg;
  std::ostream& out;
  std::ostream& err;

  void log(std::string_view level, std::string_view event, json fields = json::object()) const {
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    fields["ts"] = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
    fields["level"] = level;
    fields["event"] = event;
    err << fields.dump() << '\n';
  }

  json meta() const { return {{"config_hash", cfg.hash()}, {"code_version", DRIFT_VERSION}}; }

  fs::path stack_dir() const { return cfg.models_dir() / "current"; }
  fs::path runs_dir() const { return cfg.work_dir / "runs"; }
  fs::path reports_dir() const { return cfg.work_dir / "reports"; }

  DriftStack load() const {
    require(fs::exists(stack_dir()), ErrorKind::ConfigError,
            "no models under " + stack_dir().string() + "; run build-data first");
    auto s = load_stack(stack_dir(), cfg.knowledge_id, cfg.reasoner_id);
    s.table = cfg.table();
    return s;
  }

  void save(const DriftStack& s, const std::string& produced_by) const {
    save_stack(stack_dir(), s);
    auto m = meta();
    m["produced_by"] = produced_by;
    m["knowledge_model"] = s.knowledge.model_id;
    m["reasoner_model"] = s.reasoner.model_id;
    write_json(stack_dir() / "manifest.json", m);
  }

  static void write_json(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorKind::IoError, "cannot write " + path.string());
    os << j.dump(2) << '\n';
  }
};

inline std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::ConfigError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline std::vector<QARecord> load_records(const Context& ctx, const fs::path& path, const Tokenizer& tok,
                                          std::size_t limit) {
  require(fs::exists(path), ErrorKind::ConfigError, "data file " + path.string() + " does not exist");
  auto recs = read_records_jsonl(path, &tok);
  if (limit && recs.size() > limit) recs.resize(limit);
  ctx.log("info", "records_loaded", {{"path", path.string()}, {"count", recs.size()}});
  return recs;
}

inline std::unique_ptr<GenClient> make_client(const RunConfig& cfg, bool judge) {
  const std::string& kind = judge ? cfg.judge : cfg.generator;
  if (kind == "http") {
    HttpClientConfig h;
    h.host = cfg.http_host;
    h.port = cfg.http_port;
    h.model = cfg.http_model;
    h.apply_env();
    return std::make_unique<HttpClient>(h);
  }
  if (judge) return std::make_unique<RuleJudge>();
  return std::make_unique<ClozeGenerator>(cfg.seed);
}

// ---- subcommands ----

struct BuildDataArgs {
  std::string corpus;
  std::size_t synthetic = 0;
  int max_articles = 24;
};

inline int build_data(Context& ctx, const BuildDataArgs& a) {
  const auto& cfg = ctx.cfg;
  std::vector<RawDocument> docs;
  if (!a.corpus.empty()) {
    require(fs::is_directory(a.corpus), ErrorKind::ConfigError, "corpus directory " + a.corpus + " does not exist");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a.corpus))
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) docs.push_back({f.stem().string(), read_text(f)});
  } else {
    require(a.synthetic > 0, ErrorKind::ConfigError, "build-data needs --corpus or --synthetic");
    synth::Generator g(cfg.seed);
    std::mt19937_64 rng(cfg.seed + 1);
    std::uniform_int_distribution<int> n_articles(1, std::max(1, a.max_articles));
    for (std::size_t i = 0; i < a.synthetic; ++i) {
      const std::string id = "doc" + std::to_string(i);
      docs.push_back({id, g.document(static_cast<std::size_t>(n_articles(rng)), id)});
    }
  }
  require(!docs.empty(), ErrorKind::ConfigError, "corpus is empty");
  ctx.log("info", "corpus_loaded", {{"documents", docs.size()}});

  if (!fs::exists(ctx.stack_dir())) {
    std::vector<std::string> texts;
    for (const auto& d : docs) texts.push_back(d.text);
    auto toy = cfg.toy;
    toy.seed = cfg.seed + 1;
    ctx.save(make_toy_stack(texts, toy), "build-data");
    ctx.log("info", "stack_initialized", {{"dir", ctx.stack_dir().string()}});
  }
  const auto stack = ctx.load();

  auto gen = make_client(cfg, false);
  auto judge = make_client(cfg, true);
  CorpusConfig cc;
  cc.targets = cfg.targets;
  cc.train = cfg.train;
  cc.val = cfg.val;
  cc.test = cfg.test;
  cc.seed = cfg.seed;
  cc.concurrency = cfg.concurrency;
  const auto corpus = build_corpus(docs, *gen, *judge, stack.knowledge.tokenizer, stack.table, cc);
  for (const auto& w : corpus.warnings) ctx.log("warn", "datagen", {{"message", w}});

  const auto dir = cfg.data_dir();
  fs::create_directories(dir);
  write_records_jsonl(dir / "records.jsonl", corpus.records);
  std::map<Split, std::vector<QARecord>> by_split;
  for (const auto& r : corpus.records) by_split[r.split].push_back(r);
  for (Split sp : {Split::Train, Split::Val, Split::Test})
    write_records_jsonl(dir / (to_string(sp) + ".jsonl"), by_split[sp]);
  write_stats_csv(dir / "stats.csv", corpus.stats);
  auto m = ctx.meta();
  m["documents"] = docs.size();
  m["records"] = corpus.records.size();
  m["rejected"] = corpus.rejected;
  m["warnings"] = corpus.warnings;
  m["generator"] = gen->name();
  m["judge"] = judge->name();
  Context::write_json(dir / "manifest.json", m);
  ctx.log("info", "corpus_written",
          {{"dir", dir.string()}, {"records", corpus.records.size()}, {"rejected", corpus.rejected}});
  return kOk;
}

struct TrainArgs {
  std::string data;
  std::int64_t steps = 0;
  std::int64_t log_every = 10;
};

inline int train(Context& ctx, Objective objective, const TrainArgs& a) {
  const auto& cfg = ctx.cfg;
  StageConfig stage = objective == Objective::Lfrp     ? cfg.lfrp
                      : objective == Objective::QaftDc ? cfg.qaft_dc
                                                       : cfg.qaft_qa;
  if (a.steps > 0) stage.steps_per_range = a.steps;
  stage.validate();
  auto s = ctx.load();
  const fs::path data = a.data.empty() ? cfg.data_dir() / "train.jsonl" : fs::path(a.data);
  const auto recs = load_records(ctx, data, s.knowledge.tokenizer, 0);

  const std::string name = to_string(objective);
  CurriculumOptions opts;
  opts.out_dir = ctx.runs_dir() / name;
  opts.config_hash = cfg.hash();
  opts.on_step = [&](const TrainState& st, DriftStack&) {
    const auto& p = st.loss_history.back();
    if (a.log_every > 0 && (st.step == 1 || st.step % a.log_every == 0))
      ctx.log("info", "step", {{"stage", name}, {"step", p.step}, {"range", p.range}, {"loss", p.loss}});
  };
  TrainState st;
  st.stage = stage;
  st = run_curriculum(st, s, recs, opts);
  ctx.save(s, name);
  auto m = ctx.meta();
  m["stage"] = stage.to_json();
  m["steps"] = st.step;
  m["checkpoints"] = st.checkpoints;
  m["final_loss"] = st.loss_history.empty() ? 0.0f : st.loss_history.back().loss;
  Context::write_json(opts.out_dir / "manifest.json", m);
  ctx.log("info", "stage_done", {{"stage", name}, {"steps", st.step}, {"checkpoints", st.checkpoints.size()}});
  return kOk;
}

struct CompressArgs {
  std::string doc, question, out;
  TokenCount ratio = 0;
};

inline int compress(Context& ctx, const CompressArgs& a) {
  const auto& cfg = ctx.cfg;
  auto s = ctx.load();
  const auto doc = Document::from_text(read_text(a.doc), s.knowledge.tokenizer);
  LatentSequence seq;
  CompressionSpec spec;
  if (a.question.empty()) {
    spec = {a.ratio ? a.ratio : cfg.static_ratio, CompressionMode::Static};
    seq.blocks.push_back(compress_static(s.knowledge, doc, spec, s.table));
  } else {
    spec = CompressionSpec::dynamic(a.ratio ? a.ratio : cfg.dynamic_ratio);
    seq = compress_document(s.knowledge, doc, a.question, spec, cfg.chunking, s.table, cfg.parallelism);
  }
  const fs::path out = a.out.empty() ? fs::path(a.doc).replace_extension(".latents") : fs::path(a.out);
  {
    std::ofstream os(out, std::ios::binary);
    require(static_cast<bool>(os), ErrorKind::IoError, "cannot write " + out.string());
    write_latents(os, seq);
  }
  auto m = ctx.meta();
  m["mode"] = to_string(spec.mode);
  m["ratio"] = spec.ratio;
  m["document_tokens"] = doc.token_count;
  m["blocks"] = seq.blocks.size();
  m["xi"] = seq.total_xi();
  m["width"] = seq.width();
  m["model_hash"] = model_hash(s.knowledge);
  if (seq.blocks.size() == 1) m["cache_key"] = cache_key(m["model_hash"].get<std::string>(), doc.text, a.question, spec);
  Context::write_json(fs::path(out.string() + ".json"), m);
  ctx.out << json{{"latents", out.string()}, {"xi", seq.total_xi()}, {"blocks", seq.blocks.size()}}.dump() << '\n';
  return kOk;
}

struct InferArgs {
  std::string doc, question;
  TokenCount ratio = 0;
  std::size_t max_new = 64;
};

inline int infer(Context& ctx, const InferArgs& a) {
  const auto& cfg = ctx.cfg;
  require(!a.question.empty(), ErrorKind::ConfigError, "infer needs a question");
  auto s = ctx.load();
  AnswerOptions opt{CompressionSpec::dynamic(a.ratio ? a.ratio : cfg.dynamic_ratio), cfg.chunking, cfg.parallelism,
                    a.max_new};
  const auto t = answer_question(s, read_text(a.doc), a.question, opt);
  ctx.out << t.answer << '\n';
  ctx.out << "xi=" << t.xi << " input_length=" << t.reasoner_input << " chunks=" << t.chunks << '\n';
  ctx.log("info", "infer", {{"xi", t.xi}, {"input_length", t.reasoner_input}, {"chunks", t.chunks}});
  return kOk;
}

struct EvalArgs {
  std::string data, out, scorer = "exact";
  TokenCount ratio = 0;
  std::size_t limit = 0;
};

inline int eval_recon(Context& ctx, const EvalArgs& a) {
  const auto& cfg = ctx.cfg;
  auto s = ctx.load();
  const auto recs = load_records(ctx, a.data.empty() ? cfg.data_dir() / "test.jsonl" : fs::path(a.data),
                                 s.knowledge.tokenizer, 0);
  std::vector<Document> docs;
  std::set<std::string> seen;
  for (const auto& r : recs) {
    if (!seen.insert(r.doc_id).second) continue;
    docs.push_back(Document::from_text(r.document, s.knowledge.tokenizer));
    if (a.limit && docs.size() == a.limit) break;
  }
  const CompressionSpec spec{a.ratio ? a.ratio : cfg.static_ratio, CompressionMode::Static};
  const auto rep = eval_reconstruction(s, docs, spec);
  auto j = ctx.meta();
  j["report"] = rep.to_json();
  j["ratio"] = spec.ratio;
  Context::write_json(a.out.empty() ? ctx.reports_dir() / "recon.json" : fs::path(a.out), j);
  ctx.out << rep.to_json().dump() << '\n';
  return kOk;
}

inline int eval_qa_cmd(Context& ctx, const EvalArgs& a) {
  const auto& cfg = ctx.cfg;
  require(a.scorer == "exact" || a.scorer == "judge", ErrorKind::ConfigError, "scorer must be exact or judge");
  auto s = ctx.load();
  const auto recs = load_records(ctx, a.data.empty() ? cfg.data_dir() / "test.jsonl" : fs::path(a.data),
                                 s.knowledge.tokenizer, a.limit);
  std::unique_ptr<GenClient> judge;
  if (a.scorer == "judge") judge = make_client(cfg, true);
  const AnswerOptions opt{CompressionSpec::dynamic(a.ratio ? a.ratio : cfg.dynamic_ratio), cfg.chunking,
                          cfg.parallelism, 64};
  const auto rep = eval_qa(s, recs, judge ? Scorer::Judge : Scorer::ExactMatch, judge.get(), opt);
  auto j = ctx.meta();
  j["report"] = rep.to_json();
  j["scorer"] = a.scorer;
  j["ratio"] = opt.spec.ratio;
  Context::write_json(a.out.empty() ? ctx.reports_dir() / "qa.json" : fs::path(a.out), j);
  ctx.out << rep.to_json().dump() << '\n';
  return kOk;
}

/// Log-log line chart of seconds against input length, one series per mode.
inline std::string ttft_svg(const std::vector<TtftRow>& rows) {
  const double W = 640, H = 400, pad = 56;
  double xmin = 1e300, xmax = 0, ymin = 1e300, ymax = 0;
  for (const auto& r : rows) {
    if (r.status != "ok") continue;
    xmin = std::min(xmin, double(r.length));
    xmax = std::max(xmax, double(r.length));
    ymin = std::min(ymin, r.seconds);
    ymax = std::max(ymax, r.seconds);
  }
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">TTFT (s) vs input tokens</text>\n";
  if (xmax <= 0) return os.str() + "</svg>\n";
  auto lx = [&](double v) { return std::log(v); };
  const double x0 = lx(xmin), x1 = std::max(lx(xmax), x0 + 1e-9), y0 = lx(ymin), y1 = std::max(lx(ymax), y0 + 1e-9);
  auto px = [&](double v) { return pad + (lx(v) - x0) / (x1 - x0) * (W - 2 * pad); };
  auto py = [&](double v) { return H - pad - (lx(v) - y0) / (y1 - y0) * (H - 2 * pad); };
  os << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\"" << H - pad
     << "\" stroke=\"black\"/>\n<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << H - pad
     << "\" stroke=\"black\"/>\n";
  const char* colors[] = {"#c0392b", "#2471a3"};
  int series = 0;
  for (TtftMode mode : {TtftMode::FullContext, TtftMode::Drift}) {
    std::string pts;
    for (const auto& r : rows) {
      if (r.mode != mode || r.status != "ok") continue;
      pts += std::to_string(px(r.length)) + "," + std::to_string(py(r.seconds)) + " ";
      os << "<text x=\"" << px(r.length) << "\" y=\"" << H - pad + 16 << "\" font-size=\"10\" text-anchor=\"middle\">"
         << r.length << "</text>\n";
    }
    if (!pts.empty())
      os << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << colors[series] << "\" points=\"" << pts
         << "\"/>\n";
    os << "<text x=\"" << W - pad - 90 << "\" y=\"" << pad + 16 * series << "\" font-size=\"12\" fill=\""
       << colors[series] << "\">" << to_string(mode) << "</text>\n";
    ++series;
  }
  os << "</svg>\n";
  return os.str();
}

struct BenchArgs {
  std::vector<TokenCount> lengths{8192, 16384, 32768, 65536};
  std::string mode = "both", out, svg;
  TokenCount ratio = 0;
  int repetitions = 3;
};

inline int bench_ttft(Context& ctx, const BenchArgs& a) {
  const auto& cfg = ctx.cfg;
  require(a.mode == "both" || a.mode == "full" || a.mode == "drift", ErrorKind::ConfigError,
          "mode must be full, drift or both");
  auto s = ctx.load();
  TtftConfig tc;
  tc.spec = CompressionSpec::dynamic(a.ratio ? a.ratio : cfg.dynamic_ratio);
  tc.chunking = cfg.chunking;
  tc.parallelism = cfg.parallelism;
  tc.repetitions = a.repetitions;
  std::vector<TtftRow> rows;
  for (TtftMode m : {TtftMode::FullContext, TtftMode::Drift}) {
    if (a.mode != "both" && (a.mode == "full") != (m == TtftMode::FullContext)) continue;
    for (auto& r : measure_ttft(s, a.lengths, m, tc)) {
      ctx.log("info", "ttft", {{"mode", to_string(r.mode)}, {"length", r.length}, {"seconds", r.seconds},
                               {"reasoner_input", r.reasoner_input}, {"status", r.status}});
      rows.push_back(r);
    }
  }
  const fs::path out = a.out.empty() ? ctx.reports_dir() / "ttft.csv" : fs::path(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_ttft_csv(out, rows);
  Context::write_json(fs::path(out.string() + ".json"), ctx.meta());
  if (!a.svg.empty()) std::ofstream(a.svg) << ttft_svg(rows);
  ctx.out << json{{"csv", out.string()}, {"rows", rows.size()}}.dump() << '\n';
  return kOk;
}

struct MedArgs {
  std::string stage = "qaft_qa", data, out;
  std::size_t limit = 8;
};

inline int med_trace(Context& ctx, const MedArgs& a) {
  const auto& cfg = ctx.cfg;
  const auto dir = ctx.runs_dir() / a.stage;
  require(fs::is_directory(dir), ErrorKind::ConfigError, "no checkpoints under " + dir.string());
  std::vector<std::pair<std::int64_t, fs::path>> ckpts;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_directory() || !fs::exists(e.path() / "manifest.json")) continue;
    ckpts.emplace_back(read_json(e.path() / "manifest.json").at("step").get<std::int64_t>(), e.path());
  }
  require(!ckpts.empty(), ErrorKind::ConfigError, "no checkpoints under " + dir.string());
  std::sort(ckpts.begin(), ckpts.end());
  const auto spec = CompressionSpec::dynamic(cfg.dynamic_ratio);
  MedTrace trace;
  std::vector<QARecord> probes;
  for (const auto& [step, path] : ckpts) {
    auto s = load_stack(path, cfg.knowledge_id, cfg.reasoner_id);
    s.table = cfg.table();
    if (probes.empty())
      probes = load_records(ctx, a.data.empty() ? cfg.data_dir() / "val.jsonl" : fs::path(a.data),
                            s.knowledge.tokenizer, a.limit);
    require(!probes.empty(), ErrorKind::EmptyInput, "no probe records");
    double total = 0.0;
    for (const auto& r : probes) total += compute_med(s, r, spec);
    trace.steps.emplace_back(step, total / static_cast<double>(probes.size()));
    ctx.log("info", "med", {{"checkpoint", path.filename().string()}, {"step", step}, {"med", trace.steps.back().second}});
  }
  const fs::path out = a.out.empty() ? ctx.reports_dir() / ("med-" + a.stage + ".csv") : fs::path(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_med_csv(out, trace);
  Context::write_json(fs::path(out.string() + ".json"), ctx.meta());
  ctx.out << json{{"csv", out.string()}, {"points", trace.steps.size()}}.dump() << '\n';
  return kOk;
}

// ---- entry point ----

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Compress long documents into implicit fact tokens for a reasoning model."};
  app.set_version_flag("--version", std::string(DRIFT_VERSION));
  app.require_subcommand(1, 1);
  std::string config_path, work_dir;
  std::optional<std::uint64_t> seed;
  std::optional<TokenCount> chunk_size;
  std::optional<std::size_t> parallelism;
  app.add_option("-c,--config", config_path, "JSON run configuration");
  app.add_option("--work-dir", work_dir, "Override the working directory");
  app.add_option("--seed", seed, "Override the global seed");
  app.add_option("--chunk-size", chunk_size, "Override the chunk size");
  app.add_option("--parallelism", parallelism, "Override chunk compression parallelism");

  BuildDataArgs bd;
  auto* c_bd = app.add_subcommand("build-data", "Generate and filter the QA corpus");
  c_bd->add_option("--corpus", bd.corpus, "Directory of .txt documents");
  c_bd->add_option("--synthetic", bd.synthetic, "Generate this many synthetic documents");
  c_bd->add_option("--max-articles", bd.max_articles, "Articles per synthetic document, at most");

  TrainArgs tr;
  std::vector<std::pair<CLI::App*, Objective>> trainers;
  for (auto [name, o] : {std::pair{"train-lfrp", Objective::Lfrp}, std::pair{"train-qaft-dc", Objective::QaftDc},
                         std::pair{"train-qaft-qa", Objective::QaftQa}}) {
    auto* c = app.add_subcommand(name, "Run the " + to_string(o) + " curriculum");
    c->add_option("--data", tr.data, "Training records (JSONL)");
    c->add_option("--steps", tr.steps, "Override steps per range");
    c->add_option("--log-every", tr.log_every, "Log the loss every N steps");
    trainers.emplace_back(c, o);
  }

  CompressArgs cp;
  auto* c_cp = app.add_subcommand("compress", "Compress a document into fact tokens");
  c_cp->add_option("--doc", cp.doc, "Document text file")->required();
  c_cp->add_option("--question", cp.question, "Query for dynamic compression; static when empty");
  c_cp->add_option("--ratio", cp.ratio, "Compression ratio");
  c_cp->add_option("-o,--out", cp.out, "Latent artifact path");

  InferArgs in;
  auto* c_in = app.add_subcommand("infer", "Answer a question about a document");
  c_in->add_option("--doc", in.doc, "Document text file")->required();
  c_in->add_option("--question", in.question, "Question")->required();
  c_in->add_option("--ratio", in.ratio, "Compression ratio");
  c_in->add_option("--max-new", in.max_new, "Maximum answer tokens");

  EvalArgs er, eq;
  auto* c_er = app.add_subcommand("eval-recon", "BLEU/ROUGE of static reconstruction");
  c_er->add_option("--data", er.data, "Records (JSONL); documents are deduplicated by doc_id");
  c_er->add_option("--ratio", er.ratio, "Compression ratio");
  c_er->add_option("--limit", er.limit, "Evaluate at most N documents");
  c_er->add_option("-o,--out", er.out, "Report path");
  auto* c_eq = app.add_subcommand("eval-qa", "QA accuracy");
  c_eq->add_option("--data", eq.data, "Records (JSONL)");
  c_eq->add_option("--scorer", eq.scorer, "exact or judge");
  c_eq->add_option("--ratio", eq.ratio, "Compression ratio");
  c_eq->add_option("--limit", eq.limit, "Evaluate at most N records");
  c_eq->add_option("-o,--out", eq.out, "Report path");

  BenchArgs bt;
  auto* c_bt = app.add_subcommand("bench-ttft", "Time to first token against input length");
  c_bt->add_option("--lengths", bt.lengths, "Document lengths in tokens")->delimiter(',');
  c_bt->add_option("--mode", bt.mode, "full, drift or both");
  c_bt->add_option("--ratio", bt.ratio, "Compression ratio");
  c_bt->add_option("--repetitions", bt.repetitions, "Timed repetitions per length");
  c_bt->add_option("-o,--out", bt.out, "CSV path");
  c_bt->add_option("--svg", bt.svg, "Also draw the curves to this SVG file");

  MedArgs md;
  auto* c_md = app.add_subcommand("med-trace", "M_ED over a stage's checkpoints");
  c_md->add_option("--stage", md.stage, "lfrp, qaft_dc or qaft_qa");
  c_md->add_option("--data", md.data, "Probe records (JSONL)");
  c_md->add_option("--limit", md.limit, "Probe records to use");
  c_md->add_option("-o,--out", md.out, "CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << DRIFT_VERSION << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << json{{"level", "error"}, {"category", "UsageError"}, {"message", e.what()}}.dump() << '\n';
    return kUsage;
  }

  auto fail = [&](std::string_view category, std::string_view kind, std::string_view msg, int code) {
    err << json{{"level", "error"}, {"category", category}, {"kind", kind}, {"message", msg}}.dump() << '\n';
    return code;
  };
  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    if (!work_dir.empty()) cfg.work_dir = work_dir;
    if (seed) cfg.seed = *seed;
    if (chunk_size) cfg.chunking.chunk_size = *chunk_size;
    if (parallelism) cfg.parallelism = *parallelism;
    cfg.validate();
    Context ctx{cfg, out, err};
    ctx.log("info", "start", {{"command", app.get_subcommands().front()->get_name()}, {"config_hash", cfg.hash()}});
    if (*c_bd) return build_data(ctx, bd);
    for (auto [c, o] : trainers)
      if (*c) return train(ctx, o, tr);
    if (*c_cp) return compress(ctx, cp);
    if (*c_in) return infer(ctx, in);
    if (*c_er) return eval_recon(ctx, er);
    if (*c_eq) return eval_qa_cmd(ctx, eq);
    if (*c_bt) return bench_ttft(ctx, bt);
    if (*c_md) return med_trace(ctx, md);
    return kUsage;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) return fail("ConfigError", to_string(e.kind()), e.message(), kConfig);
    return fail("RuntimeFailure", to_string(e.kind()), e.message(), kRuntime);
  } catch (const std::exception& e) {
    return fail("RuntimeFailure", "Exception", e.what(), kRuntime);
  }
}

}  // namespace drift::cli
