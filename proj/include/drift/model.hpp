#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "drift/tokenizer.hpp"
#include "drift/transformer.hpp"

namespace drift {

inline constexpr std::string_view kCompressionLiteral = "<|CPS|>";
inline constexpr TokenId kNoTarget = -1;

/// A causal LM together with its own tokenizer. Cross-model traffic is always
/// embedding rows; token ids never leave the model that produced them.
struct CausalLM {
  std::string model_id;
  Tokenizer tokenizer;
  TransformerLM net;

  CausalLM() = default;
  CausalLM(std::string id, Tokenizer tok, const TransformerConfig& cfg,
           std::optional<AdapterConfig> adapter = std::nullopt)
      : model_id(std::move(id)), tokenizer(std::move(tok)), net(with_vocab(cfg, tokenizer), adapter) {}

  int hidden_width() const noexcept { return net.width(); }

  std::optional<TokenId> compression_token() const { return tokenizer.special_id(kCompressionLiteral); }

  TokenIds tokenize(std::string_view text) const { return tokenizer.encode(text); }

 private:
  static TransformerConfig with_vocab(TransformerConfig cfg, const Tokenizer& tok) {
    cfg.vocab = static_cast<int>(tok.base_vocab_size());
    return cfg;
  }
};

/// Registers `literal` as a single input token with its own trainable
/// embedding row. Re-registering returns the existing id.
inline TokenId register_compression_token(CausalLM& model, const std::string& literal = std::string(kCompressionLiteral)) {
  if (auto id = model.tokenizer.special_id(literal)) return *id;
  const TokenId id = model.tokenizer.add_special(literal);
  std::mt19937_64 rng(model.net.config().seed ^ 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(id));
  model.net.add_embedding_row(rng);
  return id;
}

/// Per-position next-token targets aligned with a MixedInput; `kNoTarget`
/// marks positions outside the loss.
using TargetMask = std::vector<TokenId>;

inline std::size_t mask_count(const TargetMask& mask) {
  std::size_t n = 0;
  for (auto t : mask) n += (t != kNoTarget);
  return n;
}

/// Graph version: rows of the final hidden states at `positions`.
inline Var last_hidden_at(Tape& tape, CausalLM& model, const MixedInput& input,
                          std::span<const std::int64_t> positions, std::mt19937_64* rng = nullptr) {
  const auto T = static_cast<std::int64_t>(input.length());
  for (auto p : positions)
    require(p >= 0 && p < T, ErrorKind::IndexOutOfRange,
            "position " + std::to_string(p) + " outside input of length " + std::to_string(T));
  Var h = model.net.forward(tape, input, rng);
  return ops::gather_rows(h, positions);
}

/// Deterministic evaluation without gradient tracking.
inline Mat last_hidden_at(CausalLM& model, const MixedInput& input, std::span<const std::int64_t> positions) {
  Tape tape(false);
  return last_hidden_at(tape, model, input, positions).value();
}

/// Mean negative log-likelihood over the masked positions.
inline Var nll_loss(Tape& tape, CausalLM& model, const MixedInput& input, const TargetMask& targets,
                    std::mt19937_64* rng = nullptr) {
  require(targets.size() == input.length(), ErrorKind::LengthMismatch,
          "target mask length " + std::to_string(targets.size()) + " != input length " +
              std::to_string(input.length()));
  std::vector<std::int64_t> rows;
  TokenIds ids;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] == kNoTarget) continue;
    rows.push_back(static_cast<std::int64_t>(i));
    ids.push_back(targets[i]);
  }
  require(!rows.empty(), ErrorKind::EmptyMask, "no position is marked for the loss");
  Var h = model.net.forward(tape, input, rng);
  Var sel = ops::gather_rows(h, rows);
  return ops::cross_entropy(model.net.logits(tape, sel), ids);
}

/// Next-token distribution (softmax over the base vocabulary) at every
/// masked position, evaluated without gradients.
inline Mat next_token_probs(CausalLM& model, const MixedInput& input, std::span<const std::int64_t> positions) {
  Tape tape(false);
  Var h = last_hidden_at(tape, model, input, positions);
  return softmax_rows(model.net.logits(tape, h).value());
}

/// Greedy continuation of `input`; stops after `max_new` tokens or at
/// end-of-sequence (which is not included in the result).
inline TokenIds generate(CausalLM& model, const MixedInput& input, std::size_t max_new) {
  require(max_new >= 1, ErrorKind::InvalidArgument, "max_new must be >= 1");
  MixedInput ctx = input;
  TokenIds out;
  ctx.segments.emplace_back(TokenIds{});
  auto& tail = std::get<TokenIds>(ctx.segments.back());
  for (std::size_t step = 0; step < max_new; ++step) {
    const auto T = static_cast<std::int64_t>(ctx.length());
    if (T >= model.net.config().max_positions) break;
    Tape tape(false);
    const std::int64_t last[] = {T - 1};
    Var h = last_hidden_at(tape, model, ctx, last);
    const Mat& logits = model.net.logits(tape, h).value();
    Eigen::Index best = 0;
    logits.row(0).maxCoeff(&best);
    const auto id = static_cast<TokenId>(best);
    if (id == Tokenizer::kEos) break;
    out.push_back(id);
    tail.push_back(id);
  }
  return out;
}

}  // namespace drift
