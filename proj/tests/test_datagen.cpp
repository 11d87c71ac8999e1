#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "drift/datagen.hpp"
#include "fixtures.hpp"

using namespace drift;

namespace {

const Tokenizer& tok() {
  static const Tokenizer t = [] {
    synth::Generator g(1);
    std::vector<std::string> texts;
    for (int i = 0; i < 400; ++i) texts.push_back(g.article("t" + std::to_string(i)).text);
    return Tokenizer::build(texts, 4000, 2);
  }();
  return t;
}

std::string valid_reply() {
  return R"(json

{
    "question": "When was Marlow founded?",
    "answer": "Marlow was founded in 1414, as the context states.",
    "evidence": "It was founded in 1414 by Anna Holm."
})";
}

std::vector<RawDocument> raw_docs(std::size_t n, std::size_t articles, std::uint64_t seed) {
  synth::Generator g(seed);
  std::vector<RawDocument> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({"doc-" + std::to_string(i), g.document(articles, "a")});
  return out;
}

}  // namespace

TEST(SampleSlice, OneSliceIsWholeDocument) {
  const auto d = Document::from_text(synth::Generator(3).document(5), tok());
  const auto s = sample_slice(d, 1, 99, tok());
  EXPECT_EQ(s.text, d.text);
}

TEST(SampleSlice, FixedSeedRepeats) {
  const auto d = Document::from_text(synth::Generator(3).document(40), tok());
  EXPECT_EQ(sample_slice(d, 4, 7, tok()).text, sample_slice(d, 4, 7, tok()).text);
}

TEST(SampleSlice, SlicesPartitionTheTokens) {
  const auto d = Document::from_text(synth::Generator(4).document(30), tok());
  const auto ids = tok().encode(d.text);
  std::set<std::string> seen;
  TokenCount total = 0;
  for (std::uint64_t seed = 0; seed < 200 && seen.size() < 3; ++seed) {
    const auto s = sample_slice(d, 3, seed, tok());
    if (seen.insert(s.text).second) total += s.token_count;
  }
  ASSERT_EQ(seen.size(), 3u);
  EXPECT_EQ(total, static_cast<TokenCount>(ids.size()));
}

TEST(SampleSlice, UniformOverSlices) {
  const auto d = Document::from_text(synth::Generator(5).document(40), tok());
  const auto len = tok().count(d.text) / 4;
  std::map<std::string, int> freq;
  const int draws = 10000;
  // Slices are identified by their text; only the draw index matters.
  const auto ids = tok().encode(d.text);
  std::vector<std::string> slice_text(4);
  for (std::size_t k = 0; k < 4; ++k) {
    const std::size_t b = k * len, e = k == 3 ? ids.size() : b + len;
    slice_text[k] = tok().decode(std::span<const TokenId>(ids.data() + b, e - b));
  }
  for (int i = 0; i < draws; ++i) ++freq[sample_slice(d, 4, static_cast<std::uint64_t>(i) * 7919 + 1, tok()).text];
  const double sigma = std::sqrt(draws * 0.25 * 0.75);
  for (const auto& t : slice_text) EXPECT_LE(std::abs(freq[t] - draws * 0.25), 3 * sigma) << freq[t];
}

TEST(SampleSlice, DefaultSliceCount) {
  EXPECT_EQ(default_num_slices(100), 1u);
  EXPECT_EQ(default_num_slices(1024), 1u);
  EXPECT_EQ(default_num_slices(1025), 2u);
  EXPECT_EQ(default_num_slices(8000), 8u);
}

TEST(GenerateQa, ParsesStubReply) {
  FunctionClient client([](const std::string&) { return valid_reply(); });
  const auto ctx = Document::from_text("It was founded in 1414 by Anna Holm.", tok());
  const auto r = generate_qa(client, ctx, QuestionType::ShortAnswer);
  EXPECT_EQ(r.question, "When was Marlow founded?");
  EXPECT_EQ(r.answer, "Marlow was founded in 1414, as the context states.");
  EXPECT_EQ(r.evidence, "It was founded in 1414 by Anna Holm.");
  EXPECT_EQ(r.question_type, QuestionType::ShortAnswer);
  const auto back = QARecord::from_json(r.to_json());
  EXPECT_EQ(back.to_json(), r.to_json());
}

TEST(GenerateQa, PromptCarriesTypeAndContext) {
  std::string seen;
  FunctionClient client([&](const std::string& p) {
    seen = p;
    return valid_reply();
  });
  generate_qa(client, Document::from_text("Some context here.", tok()), QuestionType::TrueFalse);
  EXPECT_NE(seen.find("of the type: true/false."), std::string::npos);
  EXPECT_NE(seen.find("Context: Some context here.\n\nYour output:"), std::string::npos);
  EXPECT_NE(seen.find("{\n    \"question\""), std::string::npos);
  EXPECT_EQ(seen.find("{{"), std::string::npos);
}

TEST(GenerateQa, MissingEvidenceIsParseError) {
  FunctionClient client([](const std::string&) { return R"({"question": "q", "answer": "a"})"; });
  try {
    generate_qa(client, Document::from_text("x", tok()), QuestionType::ShortAnswer);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ParseError);
  }
  FunctionClient garbage([](const std::string&) { return "no json here"; });
  EXPECT_THROW(generate_qa(garbage, Document::from_text("x", tok()), QuestionType::ShortAnswer), Error);
}

TEST(GenerateQa, TransportFailureIsClientError) {
  FunctionClient client([](const std::string&) -> std::string { throw std::runtime_error("connection refused"); });
  try {
    generate_qa(client, Document::from_text("x", tok()), QuestionType::ShortAnswer);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ClientError);
  }
}

TEST(FilterQa, FidelityRejectSkipsJudge) {
  FunctionClient judge([](const std::string&) { return "true"; });
  QARecord r;
  r.document = "Marlow is a town. It was founded in 1414.";
  r.question = "When was Marlow founded?";
  r.answer = "1414";
  r.evidence = "It was founded in 1515.";
  const auto v = filter_qa(judge, r);
  EXPECT_FALSE(v.accepted);
  EXPECT_EQ(v.reason, "fidelity");
  EXPECT_EQ(judge.calls.load(), 0);
}

TEST(FilterQa, JudgeVerdicts) {
  QARecord r;
  r.document = "Marlow is a town.\n  It was   founded in 1414.";
  r.question = "When was Marlow founded?";
  r.answer = "1414";
  r.evidence = "It was founded in 1414.";
  FunctionClient no([](const std::string&) { return "false"; });
  EXPECT_EQ(filter_qa(no, r).reason, "judge");
  FunctionClient yes([](const std::string&) { return "  True\n"; });
  EXPECT_TRUE(filter_qa(yes, r).accepted);
  FunctionClient chatty([](const std::string&) { return "I think it is true"; });
  try {
    filter_qa(chatty, r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::JudgeUnparseable);
  }
}

TEST(FilterQa, ContainmentNormalizesWhitespaceAndQuotes) {
  EXPECT_TRUE(evidence_contained("He said \"go\" now.\nThen   left.", "He said \xE2\x80\x9Cgo\xE2\x80\x9D now. Then left."));
  EXPECT_TRUE(evidence_contained("A b c. D e f. G h.", "A b c. G h."));
  EXPECT_FALSE(evidence_contained("A b c. D e f.", "A b d."));
  EXPECT_FALSE(evidence_contained("A b c.", "   "));
}

TEST(FilterQa, AdversarialFixtureIsSeparated) {
  RuleJudge judge;
  int correct = 0;
  const auto fx = fixtures::adversarial();
  ASSERT_EQ(fx.size(), 20u);
  for (const auto& item : fx) {
    const bool accepted = filter_qa(judge, item.record).accepted;
    EXPECT_EQ(accepted, item.good) << item.corruption << ": " << item.record.question << " / " << item.record.answer;
    correct += accepted == item.good;
  }
  EXPECT_EQ(correct, 20);
}

TEST(ClozeGenerator, RepliesParseAndPassFilters) {
  ClozeGenerator gen(3);
  RuleJudge judge;
  synth::Generator g(8);
  std::mt19937_64 rng(1);
  int ok = 0;
  for (int i = 0; i < 30; ++i) {
    const auto doc = Document::from_text(g.article("c").text, tok());
    auto r = generate_qa(gen, doc, random_question_type(rng));
    ok += filter_qa(judge, r).accepted;
  }
  EXPECT_EQ(ok, 30);
}

TEST(BuildCorpus, SplitsAreExactDeterministicAndDisjoint) {
  ClozeGenerator gen(1);
  RuleJudge judge;
  const auto docs = raw_docs(100, 2, 9);
  CorpusConfig cfg;
  cfg.seed = 5;
  const auto a = build_corpus(docs, gen, judge, tok(), BucketTable::default_table(), cfg);
  ClozeGenerator gen2(1);
  const auto b = build_corpus(docs, gen2, judge, tok(), BucketTable::default_table(), cfg);
  ASSERT_EQ(a.records.size(), 100u);
  std::map<Split, int> n;
  std::map<std::string, Split> where;
  for (const auto& r : a.records) {
    ++n[r.split];
    auto [it, fresh] = where.emplace(r.doc_id, r.split);
    EXPECT_TRUE(fresh || it->second == r.split);
    EXPECT_TRUE(evidence_contained(r.document, r.evidence));
    EXPECT_EQ(r.bucket, bucket_of(static_cast<TokenCount>(tok().count(r.document)), BucketTable::default_table()));
  }
  EXPECT_EQ(n[Split::Train], 80);
  EXPECT_EQ(n[Split::Val], 10);
  EXPECT_EQ(n[Split::Test], 10);
  ASSERT_EQ(b.records.size(), a.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].to_json(), b.records[i].to_json());

  cfg.seed = 6;
  ClozeGenerator gen3(1);
  const auto c = build_corpus(docs, gen3, judge, tok(), BucketTable::default_table(), cfg);
  int moved = 0;
  for (const auto& r : c.records) moved += where.at(r.doc_id) != r.split;
  EXPECT_GT(moved, 0);
}

TEST(BuildCorpus, ParallelMatchesSequential) {
  const auto docs = raw_docs(24, 2, 10);
  RuleJudge judge;
  ClozeGenerator g1(4), g2(4);
  CorpusConfig cfg;
  // The cloze generator draws from a shared stream, so only content that
  // does not depend on call order is compared.
  cfg.concurrency = 3;
  const auto par = build_corpus(docs, g1, judge, tok(), BucketTable::default_table(), cfg);
  cfg.concurrency = 1;
  const auto seq = build_corpus(docs, g2, judge, tok(), BucketTable::default_table(), cfg);
  ASSERT_EQ(par.records.size(), seq.records.size());
  for (std::size_t i = 0; i < par.records.size(); ++i) {
    EXPECT_EQ(par.records[i].doc_id, seq.records[i].doc_id);
    EXPECT_EQ(par.records[i].split, seq.records[i].split);
    EXPECT_EQ(par.records[i].question_type, seq.records[i].question_type);
  }
}

TEST(BuildCorpus, StatsRecountFromEmittedFiles) {
  ClozeGenerator gen(2);
  RuleJudge judge;
  auto docs = raw_docs(30, 2, 11);
  const auto longer = raw_docs(12, 5, 12);
  for (const auto& d : longer) docs.push_back({"long-" + d.doc_id, d.text});
  const auto corpus = build_corpus(docs, gen, judge, tok(), BucketTable::default_table());
  const auto dir = std::filesystem::temp_directory_path() / "drift_corpus_test";
  std::filesystem::create_directories(dir);
  write_records_jsonl(dir / "corpus.jsonl", corpus.records);
  write_stats_csv(dir / "stats.csv", corpus.stats);

  const auto back = read_records_jsonl(dir / "corpus.jsonl", &tok());
  ASSERT_EQ(back.size(), corpus.records.size());
  std::map<std::pair<std::string, std::string>, std::pair<TokenCount, std::size_t>> recount;
  for (const auto& r : back) {
    auto& e = recount[{to_string(r.bucket), to_string(r.split)}];
    e.first += r.token_count;
    ++e.second;
  }
  std::ifstream csv(dir / "stats.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "token_range,split,total_tokens,samples");
  std::size_t rows = 0, samples = 0;
  while (std::getline(csv, line)) {
    std::stringstream ss(line);
    std::string range, split, tokens, count;
    std::getline(ss, range, ',');
    std::getline(ss, split, ',');
    std::getline(ss, tokens, ',');
    std::getline(ss, count, ',');
    const auto& e = recount.at({range, split});
    EXPECT_EQ(std::stol(tokens), e.first);
    EXPECT_EQ(std::stoul(count), e.second);
    samples += std::stoul(count);
    ++rows;
  }
  EXPECT_EQ(rows, recount.size());
  EXPECT_EQ(samples, back.size());
  EXPECT_GE(recount.size(), 2u);
  std::filesystem::remove_all(dir);
}

TEST(BuildCorpus, ScarceBucketWarnsAndReusesDocuments) {
  ClozeGenerator gen(2);
  RuleJudge judge;
  const auto docs = raw_docs(3, 2, 13);
  CorpusConfig cfg;
  cfg.targets["64-128"] = 7;
  cfg.targets["128-256"] = 7;
  const auto corpus = build_corpus(docs, gen, judge, tok(), BucketTable::default_table(), cfg);
  EXPECT_FALSE(corpus.warnings.empty());
  EXPECT_NE(corpus.warnings[0].find("InsufficientData"), std::string::npos);
  EXPECT_GT(corpus.records.size(), 3u);
}

TEST(BuildCorpus, RatiosMustSumToOne) {
  ClozeGenerator gen;
  RuleJudge judge;
  CorpusConfig cfg;
  cfg.train = 0.7;
  EXPECT_THROW(build_corpus(raw_docs(3, 2, 1), gen, judge, tok(), BucketTable::default_table(), cfg), Error);
}

TEST(Records, JsonlSchema) {
  QARecord r;
  r.doc_id = "d";
  r.document = "text";
  r.question = "q";
  r.answer = "a";
  r.evidence = "e";
  r.question_type = QuestionType::MultipleChoice;
  r.bucket = {1024, 2048};
  r.split = Split::Val;
  const auto j = r.to_json();
  std::set<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.insert(k);
  EXPECT_EQ(keys, (std::set<std::string>{"doc_id", "document", "question", "answer", "evidence", "question_type",
                                         "bucket", "split"}));
  EXPECT_EQ(j["bucket"], nlohmann::json::array({1024, 2048}));
  EXPECT_EQ(j["question_type"], "multiple_choice");
  EXPECT_EQ(j["split"], "val");
  EXPECT_THROW(QARecord::from_json(nlohmann::json{{"doc_id", "x"}}), Error);
}
