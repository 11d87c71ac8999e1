// Builds a toy stack, compresses one document at several ratios and answers a
// question through the chunked dynamic path.
#include <iostream>

#include "drift/evaluation.hpp"
#include "drift/synth.hpp"
#include "drift/toy.hpp"

using namespace drift;

int main() {
  synth::Generator g(1);
  std::vector<std::string> corpus;
  for (int i = 0; i < 200; ++i) corpus.push_back(g.article("c" + std::to_string(i)).text);
  ToyConfig cfg;
  cfg.width = 32;
  cfg.reasoner_width = 32;
  auto s = make_toy_stack(corpus, cfg);

  const auto article = g.article("demo");
  const auto doc = Document::from_text(article.text, s.knowledge.tokenizer);
  std::cout << "document: " << doc.token_count << " tokens, bucket " << to_string(bucket_of(doc.token_count, s.table))
            << "\n";
  for (TokenCount c : {8, 32, 128}) {
    const auto block = compress_static(s.knowledge, doc, {c, CompressionMode::Static}, s.table);
    std::cout << "  ratio " << c << " -> " << block.values.rows() << " fact tokens of width " << block.values.cols()
              << "\n";
  }

  const auto& fact = article.facts.back();
  const auto q = synth::question_for(fact);
  const auto t = answer_question(s, article.text, q, {CompressionSpec::dynamic(32), {512, 32, 32}, 1, 8});
  std::cout << "question: " << q << "\ngold: " << fact.value << "\nuntrained answer: " << t.answer << "\n"
            << "xi=" << t.xi << " chunks=" << t.chunks << " reasoner_input=" << t.reasoner_input << "\n";
}
