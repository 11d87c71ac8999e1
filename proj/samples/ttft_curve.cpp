// Time to first token for full-context and compressed inference over growing
// synthetic documents. Writes ttft.csv in the working directory.
#include <iostream>

#include "drift/evaluation.hpp"
#include "drift/synth.hpp"
#include "drift/toy.hpp"

using namespace drift;

int main(int argc, char** argv) {
  const TokenCount top = argc > 1 ? std::stoll(argv[1]) : 16384;
  synth::Generator g(2);
  std::vector<std::string> corpus;
  for (int i = 0; i < 200; ++i) corpus.push_back(g.article("c" + std::to_string(i)).text);
  ToyConfig cfg;
  cfg.reasoner_positions = 4096 + 512;
  cfg.knowledge_positions = 2048;
  auto s = make_toy_stack(corpus, cfg);

  std::vector<TokenCount> lengths;
  for (TokenCount n = 1024; n <= top; n *= 2) lengths.push_back(n);
  TtftConfig tc;
  std::vector<TtftRow> rows;
  for (auto mode : {TtftMode::FullContext, TtftMode::Drift})
    for (const auto& r : measure_ttft(s, lengths, mode, tc)) {
      std::cout << to_string(r.mode) << " " << r.length << " tokens: " << r.status << " " << r.seconds << " s, "
                << r.reasoner_input << " reasoner tokens\n";
      rows.push_back(r);
    }
  write_ttft_csv("ttft.csv", rows);
}
