#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "drift/instructions.hpp"

#include "drift/training.hpp"

namespace drift {

/// Sizes for the desk-scale knowledge/reasoner pair.
struct ToyConfig {
  int width = 64;
  int layers = 2;
  int heads = 4;
  int knowledge_positions = 1024;
  int reasoner_positions = 1024;
  int reasoner_width = 64;
  std::size_t knowledge_pieces = 4000;
  std::size_t reasoner_pieces = 3000;
  std::size_t min_count = 2;
  AdapterConfig adapter{};
  std::uint64_t seed = 1;
};

/// Fresh stack: independent tokenizers learned from `corpus` plus the
/// instruction templates, the compression token registered on the knowledge
/// model, and a projector from knowledge width to reasoner width.
inline DriftStack make_toy_stack(std::span<const std::string> corpus, const ToyConfig& cfg = {}) {
  std::vector<std::string> texts(corpus.begin(), corpus.end());
  for (std::size_t k = 0; k < std::max<std::size_t>(cfg.min_count, 1); ++k)
    for (auto t : {templates::kStatic, templates::kReconstruct, templates::kDynamic, templates::kAnswer})
      texts.emplace_back(t);
  auto ktok = Tokenizer::build(texts, cfg.knowledge_pieces, cfg.min_count);
  auto rtok = Tokenizer::build(texts, cfg.reasoner_pieces, cfg.min_count);
  const TransformerConfig kcfg{0, cfg.width, cfg.layers, cfg.heads, 4, cfg.knowledge_positions, cfg.seed};
  const TransformerConfig rcfg{0, cfg.reasoner_width, cfg.layers, cfg.heads, 4, cfg.reasoner_positions, cfg.seed + 1};
  DriftStack s{CausalLM("knowledge", std::move(ktok), kcfg, cfg.adapter),
               CausalLM("reasoner", std::move(rtok), rcfg, cfg.adapter),
               Projector(cfg.width, cfg.reasoner_width, cfg.seed + 2),
               BucketTable::default_table()};
  register_compression_token(s.knowledge);
  return s;
}

/// Next-token pretraining on random windows of `texts`, so a toy reasoner
/// starts from a language model rather than random weights. Returns the
/// per-step losses.
inline std::vector<float> lm_pretrain(CausalLM& m, std::span<const std::string> texts, std::int64_t steps, float lr,
                                      std::size_t window = 128, std::uint64_t seed = 0) {
  require(!texts.empty(), ErrorKind::EmptyInput, "no pretraining text");
  std::vector<TokenIds> docs;
  for (const auto& t : texts) {
    auto ids = with_eos(m.tokenize(t));
    if (ids.size() >= 2) docs.push_back(std::move(ids));
  }
  require(!docs.empty(), ErrorKind::EmptyInput, "pretraining text is too short");
  const auto saved = m.net.policy();
  m.net.set_policy(TrainPolicy::Full);
  AdamW opt({lr, 0.9f, 0.999f, 1e-8f, 0.0f, 1.0f});
  m.net.for_each_parameter([&](std::string_view, Parameter& p) {
    if (p.trainable) opt.add(p);
  });
  const WarmupSchedule sched{lr, steps, 0.03f};
  std::mt19937_64 rng(seed);
  std::vector<float> losses;
  m.net.zero_grad();
  for (std::int64_t k = 0; k < steps; ++k) {
    const auto& d = docs[std::uniform_int_distribution<std::size_t>(0, docs.size() - 1)(rng)];
    const std::size_t len = std::min(window + 1, d.size());
    const std::size_t start = std::uniform_int_distribution<std::size_t>(0, d.size() - len)(rng);
    TokenIds in(d.begin() + static_cast<std::ptrdiff_t>(start), d.begin() + static_cast<std::ptrdiff_t>(start + len - 1));
    TargetMask mask(d.begin() + static_cast<std::ptrdiff_t>(start + 1), d.begin() + static_cast<std::ptrdiff_t>(start + len));
    Tape tape;
    MixedInput input;
    input.tokens(std::move(in));
    const Var loss = nll_loss(tape, m, input, mask);
    tape.backward(loss);
    opt.step(sched.lr(k));
    m.net.zero_grad();
    losses.push_back(loss.value()(0, 0));
  }
  m.net.set_policy(saved);
  return losses;
}

}  // namespace drift
