#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drift/checkpoint.hpp"
#include "drift/compression.hpp"
#include "drift/optim.hpp"
#include "drift/projection.hpp"
#include "drift/records.hpp"

namespace drift {

/// Knowledge model, reasoner and projector trained and served together.
struct DriftStack {
  CausalLM knowledge;
  CausalLM reasoner;
  Projector projector;
  BucketTable table = BucketTable::default_table();

  void zero_grad() {
    knowledge.net.zero_grad();
    reasoner.net.zero_grad();
    projector.zero_grad();
  }

  template <typename Fn>
  void for_each_group(Fn&& fn) {
    knowledge.net.for_each_parameter([&](std::string_view g, Parameter& p) { fn("knowledge." + std::string(g), p); });
    reasoner.net.for_each_parameter([&](std::string_view g, Parameter& p) { fn("reasoner." + std::string(g), p); });
    projector.for_each_parameter([&](std::string_view, Parameter& p) { fn(std::string("projector"), p); });
  }
};

enum class Objective { Lfrp, QaftDc, QaftQa };

inline std::string to_string(Objective o) {
  switch (o) {
    case Objective::Lfrp: return "lfrp";
    case Objective::QaftDc: return "qaft_dc";
    case Objective::QaftQa: return "qaft_qa";
  }
  return "?";
}

inline Objective objective_from_string(std::string_view s) {
  if (s == "lfrp") return Objective::Lfrp;
  if (s == "qaft_dc") return Objective::QaftDc;
  if (s == "qaft_qa") return Objective::QaftQa;
  throw Error(ErrorKind::ConfigError, "unknown objective '" + std::string(s) + "'");
}

enum class FreezePolicy { ReasonerFrozen, AllTrainable };

inline std::string to_string(FreezePolicy f) {
  return f == FreezePolicy::ReasonerFrozen ? "reasoner_frozen" : "all_trainable";
}

inline FreezePolicy freeze_from_string(std::string_view s) {
  if (s == "reasoner_frozen") return FreezePolicy::ReasonerFrozen;
  if (s == "all_trainable") return FreezePolicy::AllTrainable;
  throw Error(ErrorKind::ConfigError, "unknown freeze policy '" + std::string(s) + "'");
}

struct OptimizerConfig {
  float lr = 1e-4f;
  int effective_batch = 128;
  float warmup_frac = 0.03f;
  float weight_decay = 0.0f;
  float clip_norm = 1.0f;
};

struct StageConfig {
  Objective objective = Objective::Lfrp;
  CompressionSpec compression = CompressionSpec::static_default();
  FreezePolicy freeze = FreezePolicy::ReasonerFrozen;
  std::vector<Bucket> ranges;
  OptimizerConfig optimizer;
  std::int64_t steps_per_range = 100;
  /// How the knowledge model trains: adapter plus the compression row, or
  /// every weight (toy models).
  TrainPolicy knowledge_policy = TrainPolicy::Adapter;
  /// How the reasoner trains when the stage unfreezes it.
  TrainPolicy reasoner_policy = TrainPolicy::Adapter;
  std::uint64_t seed = 0;

  static std::vector<Bucket> lfrp_ranges() { return {{64, 128}, {128, 256}, {256, 512}, {512, 1024}}; }
  static std::vector<Bucket> qaft_ranges() { return {{1024, 2048}, {2048, 4096}, {4096, 8192}}; }

  static StageConfig defaults(Objective o) {
    StageConfig s;
    s.objective = o;
    if (o == Objective::Lfrp) {
      s.compression = CompressionSpec::static_default();
      s.ranges = lfrp_ranges();
    } else {
      s.compression = CompressionSpec::dynamic_default();
      s.ranges = qaft_ranges();
    }
    s.freeze = o == Objective::QaftQa ? FreezePolicy::AllTrainable : FreezePolicy::ReasonerFrozen;
    return s;
  }

  void validate() const {
    compression.validate();
    const bool wants_frozen = objective != Objective::QaftQa;
    require((freeze == FreezePolicy::ReasonerFrozen) == wants_frozen, ErrorKind::ConfigError,
            to_string(objective) + " requires " + (wants_frozen ? "reasoner_frozen" : "all_trainable"));
    require(objective == Objective::Lfrp ? compression.mode == CompressionMode::Static
                                         : compression.mode == CompressionMode::Dynamic,
            ErrorKind::ConfigError, to_string(objective) + " uses the wrong compression mode");
    require(!ranges.empty(), ErrorKind::ConfigError, "stage has no curriculum ranges");
    const auto allowed = objective == Objective::Lfrp ? lfrp_ranges() : qaft_ranges();
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      require(std::find(allowed.begin(), allowed.end(), ranges[i]) != allowed.end(), ErrorKind::ConfigError,
              "range " + to_string(ranges[i]) + " not allowed for " + to_string(objective));
      if (i) require(ranges[i].upper > ranges[i - 1].upper, ErrorKind::ConfigError, "ranges must ascend");
    }
    require(steps_per_range >= 1, ErrorKind::ConfigError, "steps_per_range must be >= 1");
    require(optimizer.effective_batch >= 1, ErrorKind::ConfigError, "effective_batch must be >= 1");
    require(optimizer.lr > 0.0f, ErrorKind::ConfigError, "lr must be positive");
  }

  nlohmann::json to_json() const {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& b : ranges) r.push_back({b.lower, b.upper});
    return {{"objective", to_string(objective)},
            {"ratio", compression.ratio},
            {"mode", to_string(compression.mode)},
            {"freeze", to_string(freeze)},
            {"ranges", r},
            {"lr", optimizer.lr},
            {"effective_batch", optimizer.effective_batch},
            {"warmup_frac", optimizer.warmup_frac},
            {"weight_decay", optimizer.weight_decay},
            {"clip_norm", optimizer.clip_norm},
            {"steps_per_range", steps_per_range},
            {"knowledge_policy", to_string(knowledge_policy)},
            {"reasoner_policy", to_string(reasoner_policy)},
            {"seed", seed}};
  }

  static StageConfig from_json(const nlohmann::json& j) {
    try {
      StageConfig s = defaults(objective_from_string(j.at("objective").get<std::string>()));
      if (j.contains("ratio") || j.contains("mode"))
        s.compression = {j.value("ratio", s.compression.ratio),
                         j.contains("mode") ? compression_mode_from_string(j.at("mode").get<std::string>())
                                            : s.compression.mode};
      if (j.contains("freeze")) s.freeze = freeze_from_string(j.at("freeze").get<std::string>());
      if (j.contains("ranges")) {
        s.ranges.clear();
        for (const auto& b : j.at("ranges")) s.ranges.push_back({b.at(0).get<TokenCount>(), b.at(1).get<TokenCount>()});
      }
      s.optimizer.lr = j.value("lr", s.optimizer.lr);
      s.optimizer.effective_batch = j.value("effective_batch", s.optimizer.effective_batch);
      s.optimizer.warmup_frac = j.value("warmup_frac", s.optimizer.warmup_frac);
      s.optimizer.weight_decay = j.value("weight_decay", s.optimizer.weight_decay);
      s.optimizer.clip_norm = j.value("clip_norm", s.optimizer.clip_norm);
      s.steps_per_range = j.value("steps_per_range", s.steps_per_range);
      if (j.contains("knowledge_policy"))
        s.knowledge_policy = train_policy_from_string(j.at("knowledge_policy").get<std::string>());
      if (j.contains("reasoner_policy"))
        s.reasoner_policy = train_policy_from_string(j.at("reasoner_policy").get<std::string>());
      s.seed = j.value("seed", s.seed);
      return s;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ConfigError, std::string("bad stage config: ") + e.what());
    }
  }
};

/// Sets trainable flags for a stage. The knowledge model and projector
/// always train; the reasoner only when the stage unfreezes it.
inline void apply_freeze(DriftStack& s, const StageConfig& cfg) {
  s.knowledge.net.set_policy(cfg.knowledge_policy);
  s.projector.set_trainable(true);
  s.reasoner.net.set_policy(cfg.freeze == FreezePolicy::ReasonerFrozen ? TrainPolicy::Frozen : cfg.reasoner_policy);
}

/// Optimizer over exactly the trainable parameters of the stack.
inline AdamW make_optimizer(DriftStack& s, const OptimizerConfig& cfg) {
  AdamW opt({cfg.lr, 0.9f, 0.999f, 1e-8f, cfg.weight_decay, cfg.clip_norm});
  s.for_each_group([&](const std::string&, Parameter& p) {
    if (p.trainable) opt.add(p);
  });
  return opt;
}

// Loss graphs. Each builds the full pipeline on `tape` and returns the mean
// NLL over the target positions.

inline Var lfrp_loss(Tape& tape, DriftStack& s, const Document& doc, const CompressionSpec& spec,
                     std::mt19937_64* rng = nullptr) {
  const auto prompt = static_prompt(s.knowledge, doc, spec, s.table);
  const Var latent = compress(tape, s.knowledge, prompt, rng);
  const Var blocks[] = {latent};
  const auto facts = project(tape, s.projector, s.reasoner, blocks);
  const auto a = assemble_reconstruction(s.reasoner, facts, with_eos(s.reasoner.tokenize(doc.text)));
  return nll_loss(tape, s.reasoner, a.input, a.mask, rng);
}

inline Var qaft_dc_loss(Tape& tape, DriftStack& s, const QARecord& rec, const CompressionSpec& spec,
                        std::mt19937_64* rng = nullptr) {
  require(!rec.evidence.empty(), ErrorKind::MissingEvidence, "record " + rec.doc_id + " has no evidence");
  const auto doc = Document::from_text(rec.document, s.knowledge.tokenizer);
  const auto prompt = dynamic_prompt(s.knowledge, doc, rec.question, spec, s.table);
  const Var latent = compress(tape, s.knowledge, prompt, rng);
  const Var blocks[] = {latent};
  const auto facts = project(tape, s.projector, s.reasoner, blocks);
  const auto a = assemble_reconstruction(s.reasoner, facts, with_eos(s.reasoner.tokenize(rec.evidence)));
  return nll_loss(tape, s.reasoner, a.input, a.mask, rng);
}

inline Var qaft_qa_loss(Tape& tape, DriftStack& s, const QARecord& rec, const CompressionSpec& spec,
                        std::mt19937_64* rng = nullptr) {
  require(!rec.answer.empty(), ErrorKind::MissingAnswer, "record " + rec.doc_id + " has no answer");
  const auto doc = Document::from_text(rec.document, s.knowledge.tokenizer);
  const auto prompt = dynamic_prompt(s.knowledge, doc, rec.question, spec, s.table);
  const Var latent = compress(tape, s.knowledge, prompt, rng);
  const Var blocks[] = {latent};
  const auto facts = project(tape, s.projector, s.reasoner, blocks);
  const auto a = assemble_answer(s.reasoner, facts, rec.question, with_eos(s.reasoner.tokenize(rec.answer)));
  return nll_loss(tape, s.reasoner, a.input, a.mask, rng);
}

// Single-example steps: forward plus backward (gradients accumulate into the
// trainable parameters). Returns the loss value.

inline float lfrp_step(DriftStack& s, const Document& doc, const CompressionSpec& spec = CompressionSpec::static_default(),
                       std::mt19937_64* rng = nullptr) {
  Tape tape;
  const Var loss = lfrp_loss(tape, s, doc, spec, rng);
  tape.backward(loss);
  return loss.value()(0, 0);
}

inline float qaft_dc_step(DriftStack& s, const QARecord& rec,
                          const CompressionSpec& spec = CompressionSpec::dynamic_default(),
                          std::mt19937_64* rng = nullptr) {
  Tape tape;
  const Var loss = qaft_dc_loss(tape, s, rec, spec, rng);
  tape.backward(loss);
  return loss.value()(0, 0);
}

inline float qaft_qa_step(DriftStack& s, const QARecord& rec,
                          const CompressionSpec& spec = CompressionSpec::dynamic_default(),
                          std::mt19937_64* rng = nullptr) {
  Tape tape;
  const Var loss = qaft_qa_loss(tape, s, rec, spec, rng);
  tape.backward(loss);
  return loss.value()(0, 0);
}

inline float objective_step(DriftStack& s, Objective o, const QARecord& rec, const CompressionSpec& spec,
                            std::mt19937_64* rng = nullptr) {
  switch (o) {
    case Objective::Lfrp: return lfrp_step(s, Document::from_text(rec.document, s.knowledge.tokenizer), spec, rng);
    case Objective::QaftDc: return qaft_dc_step(s, rec, spec, rng);
    case Objective::QaftQa: return qaft_qa_step(s, rec, spec, rng);
  }
  return 0.0f;
}

struct LossPoint {
  std::int64_t step = 0;
  std::string range;
  float loss = 0.0f;
};

struct TrainState {
  StageConfig stage;
  std::size_t range_index = 0;
  std::int64_t step = 0;
  std::vector<LossPoint> loss_history;
  std::vector<std::string> checkpoints;
};

struct CurriculumOptions {
  /// Output root for per-range checkpoints and the loss CSV; empty keeps
  /// everything in memory (checkpoint names are still recorded).
  std::filesystem::path out_dir;
  /// Recorded in every manifest.
  std::string config_hash;
  /// Called after every optimizer step with read-only access to the stack.
  std::function<void(const TrainState&, DriftStack&)> on_step;
  /// Adapter dropout during training.
  bool dropout = true;
};

inline bool in_range(const Bucket& record_bucket, const Bucket& range) {
  return record_bucket.lower >= range.lower && record_bucket.upper <= range.upper;
}

inline void write_loss_csv(const std::filesystem::path& path, const std::vector<LossPoint>& points) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::IoError, "cannot write " + path.string());
  os << "step,range,loss\n";
  for (const auto& p : points) os << p.step << ',' << p.range << ',' << p.loss << '\n';
}

inline void write_stage_manifest(const std::filesystem::path& dir, const DriftStack& s, const TrainState& st,
                                 const std::string& config_hash) {
  nlohmann::json m = {{"stage", st.stage.to_json()},
                      {"range", to_string(st.stage.ranges[st.range_index])},
                      {"range_index", st.range_index},
                      {"step", st.step},
                      {"seed", st.stage.seed},
                      {"config_hash", config_hash},
                      {"code_version", DRIFT_VERSION},
                      {"knowledge_model", s.knowledge.model_id},
                      {"reasoner_model", s.reasoner.model_id},
                      {"compression_token_id", s.knowledge.compression_token().value_or(-1)},
                      {"knowledge_width", s.knowledge.hidden_width()},
                      {"reasoner_width", s.reasoner.hidden_width()},
                      {"projector", s.projector.config_json()}};
  std::ofstream(dir / "manifest.json") << m.dump(2);
}

inline void save_stack(const std::filesystem::path& dir, const DriftStack& s) {
  save_model(dir, s.knowledge);
  save_model(dir, s.reasoner);
  save_projector(dir, s.projector);
}

inline DriftStack load_stack(const std::filesystem::path& dir, const std::string& knowledge_id = "knowledge",
                             const std::string& reasoner_id = "reasoner") {
  return {load_model(dir, knowledge_id), load_model(dir, reasoner_id), load_projector(dir),
          BucketTable::default_table()};
}

/// Runs the stage's curriculum: ranges in ascending order, each consuming
/// only records whose bucket lies inside it, for `steps_per_range` optimizer
/// steps. A checkpoint is emitted at every range boundary.
inline TrainState run_curriculum(TrainState state, DriftStack& s, const std::vector<QARecord>& data,
                                 const CurriculumOptions& opts = {}) {
  const auto& cfg = state.stage;
  cfg.validate();
  apply_freeze(s, cfg);
  s.zero_grad();
  std::mt19937_64 sampler(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0xd1b54a32d192ed03ULL);
  if (!opts.out_dir.empty()) std::filesystem::create_directories(opts.out_dir);

  for (; state.range_index < cfg.ranges.size(); ++state.range_index) {
    const Bucket range = cfg.ranges[state.range_index];
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (in_range(data[i].bucket, range)) pool.push_back(i);
    require(!pool.empty(), ErrorKind::EmptyRange, "no records in range " + to_string(range));

    AdamW opt = make_optimizer(s, cfg.optimizer);
    const WarmupSchedule sched{cfg.optimizer.lr, cfg.steps_per_range, cfg.optimizer.warmup_frac};
    const auto batch = static_cast<std::size_t>(cfg.optimizer.effective_batch);
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    for (std::int64_t k = 0; k < cfg.steps_per_range; ++k) {
      double total = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        if (cursor == order.size()) {  // reshuffle each pass over the range
          order = pool;
          std::shuffle(order.begin(), order.end(), sampler);
          cursor = 0;
        }
        total += objective_step(s, cfg.objective, data[order[cursor++]], cfg.compression,
                                opts.dropout ? &dropout_rng : nullptr);
      }
      opt.step(sched.lr(k), 1.0f / static_cast<float>(batch));
      s.zero_grad();
      ++state.step;
      state.loss_history.push_back({state.step, to_string(range), static_cast<float>(total / static_cast<double>(batch))});
      if (opts.on_step) opts.on_step(state, s);
    }

    const std::string name = "range-" + std::to_string(state.range_index) + "-" + std::to_string(range.lower) + "-" +
                             std::to_string(range.upper);
    if (!opts.out_dir.empty()) {
      const auto dir = opts.out_dir / name;
      save_stack(dir, s);
      write_stage_manifest(dir, s, state, opts.config_hash);
      write_loss_csv(opts.out_dir / "loss.csv", state.loss_history);
      state.checkpoints.push_back(dir.string());
    } else {
      state.checkpoints.push_back(name);
    }
  }
  return state;
}

}  // namespace drift
