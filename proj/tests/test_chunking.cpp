#include <gtest/gtest.h>

#include <sstream>

#include "drift/chunking.hpp"
#include "drift/synth.hpp"

using namespace drift;

namespace {

std::string fixture_text(std::size_t articles, std::uint64_t seed) {
  synth::Generator g(seed);
  return g.document(articles);
}

Tokenizer fixture_tokenizer(std::size_t min_count) {
  const std::vector<std::string> corpus = {fixture_text(400, 1), fixture_text(400, 2)};
  return Tokenizer::build(corpus, 100000, min_count);
}

// Reference splitter written against plain strings: split on the first
// delimiter that yields pieces, pack greedily, recurse on oversize pieces.
void oracle_split(const std::string& text, std::size_t level, long max_tokens, const Tokenizer& tok,
                  const std::vector<std::string>& delims, std::vector<std::string>& out) {
  if (static_cast<long>(tok.count(text)) <= max_tokens || level == delims.size()) {
    out.push_back(text);
    return;
  }
  std::vector<std::string> pieces;
  const std::string& d = delims[level];
  if (d.empty()) {
    for (char c : text) pieces.emplace_back(1, c);  // fixture is ASCII
  } else {
    std::string rest = text;
    for (auto at = rest.find(d); at != std::string::npos; at = rest.find(d)) {
      pieces.push_back(rest.substr(0, at + d.size()));
      rest.erase(0, at + d.size());
    }
    if (!rest.empty()) pieces.push_back(rest);
  }
  std::string acc;
  for (const auto& p : pieces) {
    if (static_cast<long>(tok.count(p)) > max_tokens) {
      if (!acc.empty()) out.push_back(acc);
      acc.clear();
      oracle_split(p, level + 1, max_tokens, tok, delims, out);
    } else if (acc.empty() || static_cast<long>(tok.count(acc + p)) <= max_tokens) {
      acc += p;
    } else {
      out.push_back(acc);
      acc = p;
    }
  }
  if (!acc.empty()) out.push_back(acc);
}

}  // namespace

TEST(RecursiveSplit, MatchesReferenceOnFixtureCorpus) {
  const auto tok = fixture_tokenizer(2);
  const auto doc = Document::from_text(fixture_text(110, 7), tok);
  ASSERT_GT(doc.token_count, 4000);
  const auto delims = default_delimiters();
  for (const TokenCount max_chunk : {3, 17, 64, 200, 1000}) {
    const auto set = recursive_split(doc, max_chunk, tok);
    std::vector<std::string> expected;
    oracle_split(doc.text, 0, max_chunk, tok, delims, expected);
    ASSERT_EQ(set.size(), expected.size()) << "max_chunk " << max_chunk;
    std::string joined;
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto& c = set.chunks[i];
      EXPECT_EQ(c.text, expected[i]);
      EXPECT_EQ(c.chunk_index, i);
      EXPECT_LE(c.token_count, max_chunk);
      EXPECT_EQ(c.token_count, static_cast<TokenCount>(tok.count(c.text)));
      EXPECT_EQ(c.start_offset, joined.size());
      joined += c.text;
    }
    EXPECT_EQ(joined, doc.text);
  }
}

TEST(RecursiveSplit, ParagraphsStayWholeWhenTheyFit) {
  const auto tok = fixture_tokenizer(2);
  const auto doc = Document::from_text("A.\n\nB.", tok);
  const auto set = recursive_split(doc, 4, tok);
  ASSERT_EQ(set.size(), 2u);
  EXPECT_EQ(set.chunks[0].text, "A.\n\n");
  EXPECT_EQ(set.chunks[1].text, "B.");
}

TEST(RecursiveSplit, ShortDocumentIsOneChunk) {
  const auto tok = fixture_tokenizer(2);
  const auto doc = Document::from_text("Marlow is a town.", tok);
  const auto set = recursive_split(doc, 100, tok, "m1");
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(set.chunks[0].text, doc.text);
  EXPECT_EQ(set.source_id, "m1");
}

TEST(RecursiveSplit, RejectsBadBound) {
  const auto tok = fixture_tokenizer(2);
  EXPECT_THROW(recursive_split(Document::from_text("x", tok), 0, tok), Error);
}

TEST(OverlappingSplit, StrideMatchesClosedForm) {
  // Every piece is in the vocabulary, so every token edge is a clean boundary.
  const auto tok = fixture_tokenizer(1);
  const auto doc = Document::from_text(fixture_text(420, 1), tok);
  const TokenCount n = doc.token_count;
  ASSERT_GT(n, 18000);
  const std::pair<TokenCount, TokenCount> settings[] = {{8192, 256}, {4096, 256}, {1000, 0}, {777, 300}, {50, 49}};
  for (const auto& [size, overlap] : settings) {
    const auto set = overlapping_split(doc, {size, overlap, 0}, tok);
    const TokenCount expected = n <= size ? 1 : ceil_div(n - overlap, size - overlap);
    ASSERT_EQ(static_cast<TokenCount>(set.size()), expected) << size << "/" << overlap;
    for (std::size_t i = 0; i + 1 < set.size(); ++i) {
      EXPECT_EQ(set.chunks[i].token_count, size);
      EXPECT_EQ(set.chunks[i + 1].token_begin, set.chunks[i].token_end - overlap);
    }
    EXPECT_EQ(set.chunks.front().token_begin, 0);
    EXPECT_EQ(set.chunks.back().token_end, n);
  }
}

TEST(OverlappingSplit, ChunksRetokenizeToTheirSpan) {
  const auto tok = fixture_tokenizer(3);  // rare pieces fall back to bytes
  const auto doc = Document::from_text(fixture_text(120, 9), tok);
  const auto ids = tok.encode(doc.text);
  for (const TokenCount snap : {0, 64}) {
    const auto set = overlapping_split(doc, {512, 64, snap}, tok);
    ASSERT_GT(set.size(), 3u);
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto& c = set.chunks[i];
      EXPECT_LE(c.token_count, 512);
      EXPECT_EQ(doc.text.substr(c.start_offset, c.text.size()), c.text);
      const auto own = tok.encode(c.text);
      ASSERT_EQ(static_cast<TokenCount>(own.size()), c.token_count);
      EXPECT_TRUE(std::equal(own.begin(), own.end(), ids.begin() + c.token_begin));
      if (i + 1 < set.size()) {
        const auto& d = set.chunks[i + 1];
        EXPECT_GT(d.token_begin, c.token_begin);
        EXPECT_LE(d.token_begin, c.token_end);
        EXPECT_GE(c.token_end - d.token_begin, 1);
      }
    }
    EXPECT_EQ(set.chunks.back().token_end, static_cast<TokenCount>(ids.size()));
  }
}

TEST(OverlappingSplit, SnapsToSentenceEnds) {
  const auto tok = fixture_tokenizer(1);
  const auto doc = Document::from_text(fixture_text(200, 2), tok);
  const auto set = overlapping_split(doc, {300, 32, 64}, tok);
  for (std::size_t i = 0; i + 1 < set.size(); ++i) {
    const auto& t = set.chunks[i].text;
    EXPECT_TRUE(t.back() == '.' || t.back() == '\n') << i;
    EXPECT_GE(set.chunks[i].token_count, 300 - 64);
    EXPECT_EQ(set.chunks[i + 1].token_begin, set.chunks[i].token_end - 32);
  }
}

TEST(OverlappingSplit, RejectsInvalidOverlap) {
  const auto tok = fixture_tokenizer(2);
  const auto doc = Document::from_text("some text here", tok);
  for (const TokenCount ov : {-1, 100, 101}) {
    try {
      overlapping_split(doc, {100, ov, 0}, tok);
      FAIL() << "overlap " << ov;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::InvalidOverlap);
    }
  }
}

TEST(OverlappingSplit, ShortDocumentIsOneChunk) {
  const auto tok = fixture_tokenizer(2);
  const auto doc = Document::from_text("Marlow is a town.", tok);
  const auto set = overlapping_split(doc, {8192, 256, 64}, tok);
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(set.chunks[0].text, doc.text);
  EXPECT_EQ(set.overlap, 256);
}

TEST(ChunkJsonl, RoundTrips) {
  const auto tok = fixture_tokenizer(2);
  const auto doc = Document::from_text(fixture_text(10, 3), tok);
  const auto set = recursive_split(doc, 40, tok, "doc-3");
  std::stringstream ss;
  write_chunks_jsonl(ss, set);
  const auto back = read_chunks_jsonl(ss);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].source_id, "doc-3");
  ASSERT_EQ(back[0].size(), set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_EQ(back[0].chunks[i].text, set.chunks[i].text);
    EXPECT_EQ(back[0].chunks[i].token_count, set.chunks[i].token_count);
    EXPECT_EQ(back[0].chunks[i].start_offset, set.chunks[i].start_offset);
    EXPECT_EQ(back[0].chunks[i].chunk_index, i);
  }
}
