#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drift/compression.hpp"
#include "drift/instructions.hpp"
#include "drift/model.hpp"

namespace drift {

inline constexpr std::string_view kChunkSeparator = "\n\n";

/// Three affine layers with GELU in between, applied to each latent row
/// independently. Maps knowledge width d to reasoner width d_rea.
class Projector {
 public:
  Projector() = default;

  Projector(int in_width, int out_width, std::uint64_t seed)
      : in_(in_width), hidden_(std::max(in_width, out_width)), out_(out_width) {
    require(in_width >= 1 && out_width >= 1, ErrorKind::InvalidArgument, "projector widths must be >= 1");
    std::mt19937_64 rng(seed);
    w1_ = {"proj.w1", TransformerLM::normal(in_, hidden_, 1.0f / std::sqrt(static_cast<float>(in_)), rng)};
    b1_ = {"proj.b1", Mat::Zero(1, hidden_)};
    w2_ = {"proj.w2", TransformerLM::normal(hidden_, hidden_, 1.0f / std::sqrt(static_cast<float>(hidden_)), rng)};
    b2_ = {"proj.b2", Mat::Zero(1, hidden_)};
    // Near-zero output layer: initial fact embeddings are small.
    w3_ = {"proj.w3", TransformerLM::normal(hidden_, out_, 0.02f / std::sqrt(static_cast<float>(hidden_)), rng)};
    b3_ = {"proj.b3", Mat::Zero(1, out_)};
  }

  int in_width() const noexcept { return in_; }
  int hidden_width() const noexcept { return hidden_; }
  int out_width() const noexcept { return out_; }

  Var forward(Tape& tape, Var rows) {
    require(rows.cols() == in_, ErrorKind::WidthMismatch,
            "latent width " + std::to_string(rows.cols()) + " != projector input width " + std::to_string(in_));
    Var h = ops::gelu(ops::add_row(ops::matmul(rows, tape.param(w1_)), tape.param(b1_)));
    h = ops::gelu(ops::add_row(ops::matmul(h, tape.param(w2_)), tape.param(b2_)));
    return ops::add_row(ops::matmul(h, tape.param(w3_)), tape.param(b3_));
  }

  Mat apply(const Mat& rows) {
    Tape tape(false);
    return forward(tape, tape.constant(rows)).value();
  }

  template <typename Fn>
  void for_each_parameter(Fn&& fn) {
    for (Parameter* p : {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_}) fn(std::string_view("projector"), *p);
  }
  template <typename Fn>
  void for_each_parameter(Fn&& fn) const {
    const_cast<Projector*>(this)->for_each_parameter(
        [&](std::string_view g, Parameter& p) { fn(g, static_cast<const Parameter&>(p)); });
  }

  void set_trainable(bool on) {
    for_each_parameter([&](std::string_view, Parameter& p) { p.trainable = on; });
  }
  void zero_grad() {
    for_each_parameter([](std::string_view, Parameter& p) { p.zero_grad(); });
  }

  nlohmann::json config_json() const { return {{"in", in_}, {"hidden", hidden_}, {"out", out_}}; }

 private:
  int in_ = 0, hidden_ = 0, out_ = 0;
  Parameter w1_, b1_, w2_, b2_, w3_, b3_;
};

/// Projected fact rows ready for the reasoner: blocks joined by the
/// reasoner's own separator tokens. Separator ids stay token segments so the
/// reasoner embeds them itself.
struct FactEmbeddings {
  std::vector<Segment> segments;
  /// Position (within the fact span) of each separator's first row.
  std::vector<std::int64_t> boundary_indices;
  std::size_t paragraphs = 0;

  std::size_t rows() const {
    MixedInput m{segments};
    return m.length();
  }
};

inline TokenIds separator_tokens(const CausalLM& reasoner) { return reasoner.tokenize(kChunkSeparator); }

/// Graph version: one Var per latent block, each projected row-wise.
inline FactEmbeddings project(Tape& tape, Projector& p, const CausalLM& reasoner, std::span<const Var> blocks) {
  require(!blocks.empty(), ErrorKind::InvalidArgument, "no latent blocks to project");
  FactEmbeddings out;
  const auto sep = separator_tokens(reasoner);
  std::int64_t at = 0;
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    if (j > 0) {
      out.boundary_indices.push_back(at);
      out.segments.emplace_back(sep);
      at += static_cast<std::int64_t>(sep.size());
    }
    Var e = p.forward(tape, blocks[j]);
    at += e.rows();
    out.segments.emplace_back(e);
  }
  out.paragraphs = blocks.size();
  return out;
}

/// Inference version over a stored latent sequence.
inline FactEmbeddings project(Projector& p, const CausalLM& reasoner, const LatentSequence& seq) {
  require(!seq.blocks.empty(), ErrorKind::InvalidArgument, "no latent blocks to project");
  FactEmbeddings out;
  const auto sep = separator_tokens(reasoner);
  std::int64_t at = 0;
  for (std::size_t j = 0; j < seq.blocks.size(); ++j) {
    require(seq.blocks[j].values.cols() == p.in_width(), ErrorKind::WidthMismatch,
            "latent width " + std::to_string(seq.blocks[j].values.cols()) + " != projector input width " +
                std::to_string(p.in_width()));
    if (j > 0) {
      out.boundary_indices.push_back(at);
      out.segments.emplace_back(sep);
      at += static_cast<std::int64_t>(sep.size());
    }
    Mat e = p.apply(seq.blocks[j].values);
    at += e.rows();
    out.segments.emplace_back(std::move(e));
  }
  out.paragraphs = seq.blocks.size();
  return out;
}

/// Materializes every fact row (separators via the reasoner's table).
inline Mat fact_rows(const CausalLM& reasoner, const FactEmbeddings& facts) {
  Mat out(static_cast<Eigen::Index>(facts.rows()), reasoner.hidden_width());
  Eigen::Index r = 0;
  for (const auto& s : facts.segments) {
    Mat m;
    if (auto* ids = std::get_if<TokenIds>(&s)) m = reasoner.net.embed_tokens(*ids);
    else if (auto* v = std::get_if<Var>(&s)) m = v->value();
    else m = std::get<Mat>(s);
    out.middleRows(r, m.rows()) = m;
    r += m.rows();
  }
  return out;
}

/// Reasoner input plus per-position next-token targets.
struct Assembled {
  MixedInput input;
  TargetMask mask;
  /// Tokens contributed by instruction text (excluding facts, question, target).
  std::size_t instruction_tokens = 0;
  std::size_t fact_rows = 0;
  std::size_t question_tokens = 0;
  std::size_t target_tokens = 0;
};

namespace detail {

inline void append_facts(Assembled& a, const FactEmbeddings& facts) {
  for (const auto& s : facts.segments) a.input.segments.push_back(s);
  a.fact_rows += facts.rows();
}

inline void append_instruction(Assembled& a, const CausalLM& reasoner, std::string_view text) {
  auto ids = reasoner.tokenize(text);
  a.instruction_tokens += ids.size();
  a.input.tokens(std::move(ids));
}

// Targets are appended as input tokens; position i predicts token i+1.
inline void append_target(Assembled& a, const TokenIds& target) {
  const std::size_t start = a.input.length();
  a.input.tokens(target);
  a.mask.assign(a.input.length(), kNoTarget);
  for (std::size_t k = 0; k < target.size(); ++k) a.mask[start + k - 1] = target[k];
  a.target_tokens = target.size();
}

}  // namespace detail

/// [I_rec prefix][facts][I_rec suffix][target]; the mask covers the target.
inline Assembled assemble_reconstruction(const CausalLM& reasoner, const FactEmbeddings& facts,
                                         const TokenIds& target) {
  require(!target.empty(), ErrorKind::InvalidArgument, "reconstruction target is empty");
  const auto parts = split_at(templates::kReconstruct, "compressed_information");
  Assembled a;
  detail::append_instruction(a, reasoner, parts.prefix);
  detail::append_facts(a, facts);
  detail::append_instruction(a, reasoner, parts.suffix);
  detail::append_target(a, target);
  return a;
}

/// Inference form: the same prefix with no target and an empty mask.
inline Assembled assemble_reconstruction(const CausalLM& reasoner, const FactEmbeddings& facts) {
  const auto parts = split_at(templates::kReconstruct, "compressed_information");
  Assembled a;
  detail::append_instruction(a, reasoner, parts.prefix);
  detail::append_facts(a, facts);
  detail::append_instruction(a, reasoner, parts.suffix);
  a.mask.assign(a.input.length(), kNoTarget);
  return a;
}

/// Background content for the answer template: either fact embeddings or
/// explicit text (the explicit-evidence branch of the consistency probe).
using Background = std::variant<const FactEmbeddings*, std::string>;

inline Assembled assemble_answer(const CausalLM& reasoner, const Background& background, std::size_t paragraphs,
                                 std::string_view question, const std::optional<TokenIds>& answer,
                                 std::string_view answer_prefix = templates::kAnswerPrefix) {
  require(question.find_first_not_of(" \t\r\n") != std::string_view::npos, ErrorKind::EmptyQuery,
          "question is empty");
  const auto filled = format(templates::kAnswer, {{"num", std::to_string(paragraphs)},
                                                  {"answer_prefix", answer_prefix},
                                                  {"compressed_information", "{compressed_information}"},
                                                  {"question", "{question}"}});
  const auto outer = split_at(filled, "compressed_information");
  const auto inner = split_at(outer.suffix, "question");
  Assembled a;
  detail::append_instruction(a, reasoner, outer.prefix);
  if (const auto* f = std::get_if<const FactEmbeddings*>(&background)) {
    detail::append_facts(a, **f);
  } else {
    auto ids = reasoner.tokenize(std::get<std::string>(background));
    a.fact_rows += ids.size();
    a.input.tokens(std::move(ids));
  }
  detail::append_instruction(a, reasoner, inner.prefix);
  auto q = reasoner.tokenize(question);
  a.question_tokens = q.size();
  a.input.tokens(std::move(q));
  detail::append_instruction(a, reasoner, inner.suffix);
  if (answer) {
    require(!answer->empty(), ErrorKind::MissingAnswer, "answer is empty");
    detail::append_target(a, *answer);
  } else {
    a.mask.assign(a.input.length(), kNoTarget);
  }
  return a;
}

inline Assembled assemble_answer(const CausalLM& reasoner, const FactEmbeddings& facts, std::string_view question,
                                 const std::optional<TokenIds>& answer) {
  return assemble_answer(reasoner, Background{&facts}, facts.paragraphs, question, answer);
}

/// Appends end-of-sequence so greedy decoding learns where to stop.
inline TokenIds with_eos(TokenIds ids) {
  ids.push_back(Tokenizer::kEos);
  return ids;
}

}  // namespace drift
