#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "drift/autograd.hpp"
#include "drift/tokenizer.hpp"

namespace drift {

struct TransformerConfig {
  int vocab = 0;  // LM-head / base embedding rows
  int width = 64;
  int layers = 2;
  int heads = 4;
  int ffn_mult = 4;
  int max_positions = 1024;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"vocab", vocab}, {"width", width}, {"layers", layers}, {"heads", heads},
            {"ffn_mult", ffn_mult}, {"max_positions", max_positions}, {"seed", seed}};
  }
  static TransformerConfig from_json(const nlohmann::json& j) {
    TransformerConfig c;
    c.vocab = j.at("vocab").get<int>();
    c.width = j.at("width").get<int>();
    c.layers = j.at("layers").get<int>();
    c.heads = j.at("heads").get<int>();
    c.ffn_mult = j.value("ffn_mult", 4);
    c.max_positions = j.at("max_positions").get<int>();
    c.seed = j.value("seed", std::uint64_t{0});
    return c;
  }
};

/// Low-rank adapter settings for the attention query and value projections.
struct AdapterConfig {
  int rank = 16;
  float alpha = 32.0f;
  float dropout = 0.05f;

  float scaling() const { return alpha / static_cast<float>(rank); }

  nlohmann::json to_json() const { return {{"rank", rank}, {"alpha", alpha}, {"dropout", dropout}}; }
  static AdapterConfig from_json(const nlohmann::json& j) {
    return {j.value("rank", 16), j.value("alpha", 32.0f), j.value("dropout", 0.05f)};
  }
};

/// Which parameter groups accept gradients.
enum class TrainPolicy {
  Frozen,   // nothing
  Full,     // every group
  Adapter,  // low-rank adapters plus added special-token rows
};

inline std::string_view to_string(TrainPolicy p) {
  switch (p) {
    case TrainPolicy::Frozen: return "frozen";
    case TrainPolicy::Full: return "full";
    case TrainPolicy::Adapter: return "adapter";
  }
  return "?";
}

inline TrainPolicy train_policy_from_string(std::string_view s) {
  if (s == "frozen") return TrainPolicy::Frozen;
  if (s == "full") return TrainPolicy::Full;
  if (s == "adapter") return TrainPolicy::Adapter;
  throw Error(ErrorKind::InvalidArgument, "unknown train policy '" + std::string(s) + "'");
}

/// One segment of a model input: token ids (embedded by the model's own
/// table), rows living on the current tape (gradients flow back into them), or
/// plain precomputed rows.
using Segment = std::variant<TokenIds, Var, Mat>;

/// Ordered generation context mixing token and embedding segments.
struct MixedInput {
  std::vector<Segment> segments;

  MixedInput& tokens(TokenIds ids) {
    segments.emplace_back(std::move(ids));
    return *this;
  }
  MixedInput& rows(Var v) {
    segments.emplace_back(v);
    return *this;
  }
  MixedInput& rows(Mat m) {
    segments.emplace_back(std::move(m));
    return *this;
  }

  std::size_t length() const {
    std::size_t n = 0;
    for (const auto& s : segments) {
      if (auto* ids = std::get_if<TokenIds>(&s)) n += ids->size();
      else if (auto* v = std::get_if<Var>(&s)) n += static_cast<std::size_t>(v->rows());
      else n += static_cast<std::size_t>(std::get<Mat>(s).rows());
    }
    return n;
  }
};

/// Pre-norm decoder-only transformer with learned absolute positions.
class TransformerLM {
 public:
  struct Layer {
    Parameter ln1_g, ln1_b, wq, wk, wv, bq, bk, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
    // Adapter: delta_q = drop(h) A_q B_q * scaling, same for v.
    Parameter aq, bq_up, av, bv_up;
  };

  TransformerLM() = default;

  explicit TransformerLM(const TransformerConfig& cfg, std::optional<AdapterConfig> adapter = std::nullopt)
      : cfg_(cfg), adapter_(adapter) {
    require(cfg.vocab > 0 && cfg.width > 0 && cfg.layers > 0 && cfg.max_positions > 0,
            ErrorKind::InvalidArgument, "transformer config has a non-positive size");
    require(cfg.width % cfg.heads == 0, ErrorKind::InvalidArgument, "width must divide by heads");
    std::mt19937_64 rng(cfg.seed);
    const int d = cfg.width, f = cfg.width * cfg.ffn_mult;
    const float std_in = 0.02f;
    const float std_out = 0.02f / std::sqrt(2.0f * static_cast<float>(cfg.layers));
    tok_ = Parameter("embed.tokens", normal(cfg.vocab, d, std_in, rng));
    added_ = Parameter("added.tokens", Mat(0, d));
    pos_ = Parameter("embed.positions", normal(cfg.max_positions, d, std_in, rng));
    layers_.resize(static_cast<std::size_t>(cfg.layers));
    for (int l = 0; l < cfg.layers; ++l) {
      auto& L = layers_[static_cast<std::size_t>(l)];
      const std::string p = "blocks." + std::to_string(l) + ".";
      L.ln1_g = Parameter(p + "ln1.g", Mat::Ones(1, d));
      L.ln1_b = Parameter(p + "ln1.b", Mat::Zero(1, d));
      L.wq = Parameter(p + "attn.wq", normal(d, d, std_in, rng));
      L.wk = Parameter(p + "attn.wk", normal(d, d, std_in, rng));
      L.wv = Parameter(p + "attn.wv", normal(d, d, std_in, rng));
      L.bq = Parameter(p + "attn.bq", Mat::Zero(1, d));
      L.bk = Parameter(p + "attn.bk", Mat::Zero(1, d));
      L.bv = Parameter(p + "attn.bv", Mat::Zero(1, d));
      L.wo = Parameter(p + "attn.wo", normal(d, d, std_out, rng));
      L.bo = Parameter(p + "attn.bo", Mat::Zero(1, d));
      L.ln2_g = Parameter(p + "ln2.g", Mat::Ones(1, d));
      L.ln2_b = Parameter(p + "ln2.b", Mat::Zero(1, d));
      L.w1 = Parameter(p + "mlp.w1", normal(d, f, std_in, rng));
      L.b1 = Parameter(p + "mlp.b1", Mat::Zero(1, f));
      L.w2 = Parameter(p + "mlp.w2", normal(f, d, std_out, rng));
      L.b2 = Parameter(p + "mlp.b2", Mat::Zero(1, d));
      if (adapter_) {
        const int r = adapter_->rank;
        const std::string a = "adapter." + std::to_string(l) + ".";
        const float std_a = 1.0f / std::sqrt(static_cast<float>(d));
        L.aq = Parameter(a + "q.down", normal(d, r, std_a, rng));
        L.bq_up = Parameter(a + "q.up", Mat::Zero(r, d));
        L.av = Parameter(a + "v.down", normal(d, r, std_a, rng));
        L.bv_up = Parameter(a + "v.up", Mat::Zero(r, d));
      }
    }
    lnf_g_ = Parameter("final.ln.g", Mat::Ones(1, d));
    lnf_b_ = Parameter("final.ln.b", Mat::Zero(1, d));
    head_ = Parameter("head.weight", normal(d, cfg.vocab, std_in, rng));
    set_policy(TrainPolicy::Full);
  }

  TransformerLM(const TransformerLM&) = delete;
  TransformerLM& operator=(const TransformerLM&) = delete;
  TransformerLM(TransformerLM&&) = default;
  TransformerLM& operator=(TransformerLM&&) = default;

  const TransformerConfig& config() const noexcept { return cfg_; }
  const std::optional<AdapterConfig>& adapter() const noexcept { return adapter_; }
  int width() const noexcept { return cfg_.width; }
  Eigen::Index added_rows() const noexcept { return added_.value.rows(); }

  /// Appends one trainable embedding row for a newly registered token.
  void add_embedding_row(std::mt19937_64& rng) {
    Mat grown(added_.value.rows() + 1, cfg_.width);
    grown.topRows(added_.value.rows()) = added_.value;
    grown.bottomRows(1) = normal(1, cfg_.width, 0.02f, rng);
    added_.value = std::move(grown);
    added_.zero_grad();
  }

  /// Visits every parameter with its group name: "embed", "added", "blocks",
  /// "head" or "adapter".
  template <typename Fn>
  void for_each_parameter(Fn&& fn) {
    fn("embed", tok_);
    fn("embed", pos_);
    fn("added", added_);
    for (auto& L : layers_) {
      for (Parameter* p : {&L.ln1_g, &L.ln1_b, &L.wq, &L.wk, &L.wv, &L.bq, &L.bk, &L.bv, &L.wo, &L.bo,
                           &L.ln2_g, &L.ln2_b, &L.w1, &L.b1, &L.w2, &L.b2})
        fn("blocks", *p);
      if (adapter_)
        for (Parameter* p : {&L.aq, &L.bq_up, &L.av, &L.bv_up}) fn("adapter", *p);
    }
    fn("blocks", lnf_g_);
    fn("blocks", lnf_b_);
    fn("head", head_);
  }

  template <typename Fn>
  void for_each_parameter(Fn&& fn) const {
    const_cast<TransformerLM*>(this)->for_each_parameter(
        [&](std::string_view g, Parameter& p) { fn(g, static_cast<const Parameter&>(p)); });
  }

  void set_policy(TrainPolicy policy) {
    require(policy != TrainPolicy::Adapter || adapter_.has_value(), ErrorKind::InvalidArgument,
            "adapter policy on a model without adapters");
    policy_ = policy;
    for_each_parameter([&](std::string_view group, Parameter& p) {
      switch (policy) {
        case TrainPolicy::Frozen: p.trainable = false; break;
        case TrainPolicy::Full: p.trainable = true; break;
        case TrainPolicy::Adapter: p.trainable = (group == "adapter" || group == "added"); break;
      }
      if (p.value.size() == 0) p.trainable = false;
      p.zero_grad();
    });
  }
  TrainPolicy policy() const noexcept { return policy_; }

  void zero_grad() {
    for_each_parameter([](std::string_view, Parameter& p) { p.zero_grad(); });
  }

  /// Final-layer (post final norm) hidden states, one row per input position.
  /// `rng` drives adapter dropout; pass nullptr for deterministic evaluation.
  Var forward(Tape& tape, const MixedInput& input, std::mt19937_64* rng = nullptr) {
    const auto T = static_cast<Eigen::Index>(input.length());
    require(T > 0, ErrorKind::EmptyInput, "empty model input");
    require(T <= cfg_.max_positions, ErrorKind::ContextOverflow,
            "input of " + std::to_string(T) + " positions exceeds max_positions " +
                std::to_string(cfg_.max_positions));

    std::vector<Var> parts;
    std::optional<Var> table;
    for (const auto& seg : input.segments) {
      if (auto* ids = std::get_if<TokenIds>(&seg)) {
        if (ids->empty()) continue;
        if (!table) {
          Var base = tape.param(tok_);
          if (added_.value.rows() > 0) {
            const Var both[] = {base, tape.param(added_)};
            table = ops::concat_rows(both);
          } else {
            table = base;
          }
        }
        parts.push_back(ops::embedding(*table, *ids));
      } else if (auto* v = std::get_if<Var>(&seg)) {
        require(v->tape == &tape, ErrorKind::InvalidArgument, "embedding segment lives on another tape");
        require(v->cols() == cfg_.width, ErrorKind::WidthMismatch,
                "embedding segment width " + std::to_string(v->cols()) + " != model width " +
                    std::to_string(cfg_.width));
        if (v->rows() > 0) parts.push_back(*v);
      } else {
        const auto& m = std::get<Mat>(seg);
        require(m.cols() == cfg_.width, ErrorKind::WidthMismatch, "embedding segment width mismatch");
        if (m.rows() > 0) parts.push_back(tape.constant(m));
      }
    }
    Var x = parts.size() == 1 ? parts[0] : ops::concat_rows(parts);
    x = ops::add(x, ops::slice_rows(tape.param(pos_), 0, T));

    const float drop = adapter_ ? adapter_->dropout : 0.0f;
    for (auto& L : layers_) {
      Var h = ops::layer_norm(x, tape.param(L.ln1_g), tape.param(L.ln1_b));
      Var q = ops::add_row(ops::matmul(h, tape.param(L.wq)), tape.param(L.bq));
      Var k = ops::add_row(ops::matmul(h, tape.param(L.wk)), tape.param(L.bk));
      Var v = ops::add_row(ops::matmul(h, tape.param(L.wv)), tape.param(L.bv));
      if (adapter_) {
        Var hd = rng ? ops::dropout(h, drop, *rng) : h;
        const float s = adapter_->scaling();
        q = ops::add(q, ops::scale(ops::matmul(ops::matmul(hd, tape.param(L.aq)), tape.param(L.bq_up)), s));
        v = ops::add(v, ops::scale(ops::matmul(ops::matmul(hd, tape.param(L.av)), tape.param(L.bv_up)), s));
      }
      Var a = ops::causal_attention(q, k, v, cfg_.heads);
      x = ops::add(x, ops::add_row(ops::matmul(a, tape.param(L.wo)), tape.param(L.bo)));
      Var h2 = ops::layer_norm(x, tape.param(L.ln2_g), tape.param(L.ln2_b));
      Var m = ops::gelu(ops::add_row(ops::matmul(h2, tape.param(L.w1)), tape.param(L.b1)));
      x = ops::add(x, ops::add_row(ops::matmul(m, tape.param(L.w2)), tape.param(L.b2)));
    }
    return ops::layer_norm(x, tape.param(lnf_g_), tape.param(lnf_b_));
  }

  /// Next-token logits over the base vocabulary for the given hidden rows.
  Var logits(Tape& tape, Var hidden) { return ops::matmul(hidden, tape.param(head_)); }

  /// Embedding-table lookup without a tape.
  Mat embed_tokens(std::span<const TokenId> ids) const {
    Mat out(static_cast<Eigen::Index>(ids.size()), cfg_.width);
    const auto base = tok_.value.rows();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto id = ids[i];
      require(id >= 0 && id < base + added_.value.rows(), ErrorKind::IndexOutOfRange,
              "token id " + std::to_string(id) + " outside embedding table");
      out.row(static_cast<Eigen::Index>(i)) = id < base ? tok_.value.row(id) : added_.value.row(id - base);
    }
    return out;
  }

  const Parameter& token_table() const noexcept { return tok_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_parameter([&](std::string_view, const Parameter& p) { n += static_cast<std::size_t>(p.value.size()); });
    return n;
  }

  /// Grows the position table (new rows random). Used when a checkpoint is
  /// reused with a longer context window.
  void resize_positions(int max_positions, std::uint64_t seed) {
    if (max_positions <= cfg_.max_positions) return;
    std::mt19937_64 rng(seed);
    Mat grown(max_positions, cfg_.width);
    grown.topRows(cfg_.max_positions) = pos_.value;
    grown.bottomRows(max_positions - cfg_.max_positions) =
        normal(max_positions - cfg_.max_positions, cfg_.width, 0.02f, rng);
    pos_.value = std::move(grown);
    pos_.zero_grad();
    cfg_.max_positions = max_positions;
  }

  static Mat normal(Eigen::Index r, Eigen::Index c, float stddev, std::mt19937_64& rng) {
    std::normal_distribution<float> dist(0.0f, stddev);
    Mat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
  }

 private:
  TransformerConfig cfg_;
  std::optional<AdapterConfig> adapter_;
  TrainPolicy policy_ = TrainPolicy::Full;
  Parameter tok_, added_, pos_;
  std::vector<Layer> layers_;
  Parameter lnf_g_, lnf_b_, head_;
};

}  // namespace drift
