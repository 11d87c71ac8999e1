#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "drift/bucketing.hpp"
#include "drift/tokenizer.hpp"

namespace drift {

/// Raw text plus its length under the tokenizer that will consume it.
struct Document {
  std::string text;
  TokenCount token_count = 0;

  static Document from_text(std::string text, const Tokenizer& tok) {
    Document d{std::move(text), 0};
    d.token_count = static_cast<TokenCount>(tok.count(d.text));
    return d;
  }
};

struct Chunk {
  std::size_t chunk_index = 0;
  std::string text;
  TokenCount token_count = 0;
  /// Byte offset of `text` inside the source document.
  std::size_t start_offset = 0;
  /// Half-open token span inside the source tokenization (overlapping splits only).
  TokenCount token_begin = 0;
  TokenCount token_end = 0;

  Document as_document() const { return {text, token_count}; }
};

struct ChunkSet {
  std::string source_id;
  TokenCount overlap = 0;
  std::vector<Chunk> chunks;

  std::size_t size() const noexcept { return chunks.size(); }
};

/// Coarse to fine; the empty delimiter means "split between characters".
inline std::vector<std::string> default_delimiters() { return {"\n\n", ". ", " ", ""}; }

namespace detail {

/// Splits `text` after every occurrence of `delim` (the delimiter stays on the
/// left piece). An empty delimiter splits into UTF-8 code points.
inline std::vector<std::string_view> split_keep(std::string_view text, std::string_view delim) {
  std::vector<std::string_view> out;
  if (delim.empty()) {
    std::size_t i = 0;
    while (i < text.size()) {
      std::size_t len = 1;
      const auto c = static_cast<unsigned char>(text[i]);
      if (c >= 0xF0) len = 4;
      else if (c >= 0xE0) len = 3;
      else if (c >= 0xC0) len = 2;
      len = std::min(len, text.size() - i);
      out.push_back(text.substr(i, len));
      i += len;
    }
    return out;
  }
  std::size_t start = 0;
  while (start < text.size()) {
    const auto at = text.find(delim, start);
    if (at == std::string_view::npos) {
      out.push_back(text.substr(start));
      break;
    }
    out.push_back(text.substr(start, at + delim.size() - start));
    start = at + delim.size();
  }
  return out;
}

inline void recursive_split_into(std::string_view text, std::size_t base_offset,
                                 TokenCount max_chunk, std::span<const std::string> delims,
                                 const Tokenizer& tok, std::vector<Chunk>& out) {
  const auto whole = static_cast<TokenCount>(tok.count(text));
  if (whole <= max_chunk || delims.empty()) {
    out.push_back({0, std::string(text), whole, base_offset, 0, 0});
    return;
  }
  const auto pieces = split_keep(text, delims.front());
  const auto finer = delims.subspan(1);

  // Greedy packing of consecutive pieces; a piece that alone exceeds the bound
  // is handed to the next finer delimiter.
  std::size_t cur_begin = 0;
  std::size_t cur_len = 0;
  TokenCount cur_tokens = 0;
  auto flush = [&] {
    if (cur_len == 0) return;
    out.push_back({0, std::string(text.substr(cur_begin, cur_len)), cur_tokens,
                   base_offset + cur_begin, 0, 0});
    cur_len = 0;
    cur_tokens = 0;
  };
  std::size_t pos = 0;
  for (const auto piece : pieces) {
    const auto piece_tokens = static_cast<TokenCount>(tok.count(piece));
    if (piece_tokens > max_chunk) {
      flush();
      recursive_split_into(piece, base_offset + pos, max_chunk, finer, tok, out);
    } else if (cur_len == 0) {
      cur_begin = pos;
      cur_len = piece.size();
      cur_tokens = piece_tokens;
    } else {
      const auto merged = static_cast<TokenCount>(tok.count(text.substr(cur_begin, cur_len + piece.size())));
      if (merged <= max_chunk) {
        cur_len += piece.size();
        cur_tokens = merged;
      } else {
        flush();
        cur_begin = pos;
        cur_len = piece.size();
        cur_tokens = piece_tokens;
      }
    }
    pos += piece.size();
  }
  flush();
}

}  // namespace detail

/// Recursive delimiter splitting: the coarsest delimiter whose pieces fit is
/// used, pieces are packed greedily up to `max_chunk` tokens, and oversize
/// pieces recurse to the next delimiter. Delimiters stay attached to the end of
/// the preceding chunk so the chunks concatenate back to the source.
inline ChunkSet recursive_split(const Document& doc, TokenCount max_chunk, const Tokenizer& tok,
                                std::span<const std::string> delimiters,
                                std::string source_id = {}) {
  require(max_chunk >= 1, ErrorKind::InvalidArgument, "max_chunk must be >= 1");
  require(!delimiters.empty(), ErrorKind::InvalidArgument, "delimiter list is empty");
  std::vector<std::string> delims(delimiters.begin(), delimiters.end());
  if (!delims.back().empty()) delims.emplace_back();  // character fallback always available
  ChunkSet set{std::move(source_id), 0, {}};
  detail::recursive_split_into(doc.text, 0, max_chunk, delims, tok, set.chunks);
  if (set.chunks.empty()) set.chunks.push_back({0, doc.text, doc.token_count, 0, 0, 0});
  for (std::size_t i = 0; i < set.chunks.size(); ++i) set.chunks[i].chunk_index = i;
  return set;
}

inline ChunkSet recursive_split(const Document& doc, TokenCount max_chunk, const Tokenizer& tok,
                                std::string source_id = {}) {
  const auto d = default_delimiters();
  return recursive_split(doc, max_chunk, tok, d, std::move(source_id));
}

struct OverlapConfig {
  TokenCount chunk_size = 8192;
  TokenCount overlap = 256;
  /// Chunk ends move back to a sentence break found within this many tokens;
  /// 0 disables snapping.
  TokenCount snap_window = 64;
};

/// Fixed-size token windows sharing `overlap` tokens of boundary context.
/// Boundaries are kept on pre-tokenization piece boundaries so each chunk
/// re-tokenizes to exactly its own span.
inline ChunkSet overlapping_split(const Document& doc, const OverlapConfig& cfg, const Tokenizer& tok,
                                  std::string source_id = {}) {
  require(cfg.chunk_size >= 1, ErrorKind::InvalidArgument, "chunk_size must be >= 1");
  require(cfg.overlap >= 0 && cfg.overlap < cfg.chunk_size, ErrorKind::InvalidOverlap,
          "overlap " + std::to_string(cfg.overlap) + " must be in [0, chunk_size=" +
              std::to_string(cfg.chunk_size) + ")");

  // Token ids with byte offsets and clean-boundary flags, built piece by piece.
  std::vector<std::size_t> offset;       // offset[i] = byte start of token i; offset[n] = size
  std::vector<char> clean;               // clean[i]: a piece boundary precedes token i
  std::vector<char> sentence_end;        // sentence_end[i]: token i-1 ends a sentence
  Tokenizer::for_each_piece(doc.text, [&, pos = std::size_t{0}](std::string_view p) mutable {
    const auto ids = tok.encode(p);
    std::size_t sub = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      offset.push_back(pos + sub);
      clean.push_back(k == 0 ? 1 : 0);
      sub += tok.piece(ids[k]).size();
    }
    pos += p.size();
  });
  const auto n = static_cast<TokenCount>(offset.size());
  offset.push_back(doc.text.size());
  clean.push_back(1);
  sentence_end.assign(offset.size(), 0);
  for (TokenCount i = 1; i <= n; ++i) {
    const char c = doc.text[offset[i] - 1];
    sentence_end[i] = (c == '.' || c == '!' || c == '?' || c == '\n') ? 1 : 0;
  }

  ChunkSet set{std::move(source_id), cfg.overlap, {}};
  auto emit = [&](TokenCount b, TokenCount e) {
    Chunk c;
    c.chunk_index = set.chunks.size();
    c.start_offset = offset[b];
    c.text = doc.text.substr(offset[b], offset[e] - offset[b]);
    c.token_count = e - b;
    c.token_begin = b;
    c.token_end = e;
    set.chunks.push_back(std::move(c));
  };
  if (n == 0) {
    emit(0, 0);
    return set;
  }

  TokenCount begin = 0;
  while (true) {
    TokenCount end = std::min(begin + cfg.chunk_size, n);
    if (end < n) {
      // Must leave room for progress: the next chunk starts at end - overlap > begin.
      const TokenCount floor = begin + cfg.overlap + 1;
      if (cfg.snap_window > 0) {
        for (TokenCount e = end; e >= std::max(floor, end - cfg.snap_window); --e) {
          if (sentence_end[e] && clean[e]) {
            end = e;
            break;
          }
        }
      }
      while (end > floor && !clean[end]) --end;
    }
    emit(begin, end);
    if (end >= n) break;
    TokenCount next = end - cfg.overlap;
    while (next > begin + 1 && !clean[next]) --next;
    begin = std::max(next, begin + 1);
  }
  return set;
}

inline nlohmann::json chunk_to_json(const ChunkSet& set, const Chunk& c) {
  return {{"source_id", set.source_id},
          {"chunk_index", c.chunk_index},
          {"text", c.text},
          {"token_count", c.token_count},
          {"start_offset", c.start_offset}};
}

inline void write_chunks_jsonl(std::ostream& os, const ChunkSet& set) {
  for (const auto& c : set.chunks) os << chunk_to_json(set, c).dump() << '\n';
}

/// Reads every chunk line in the stream; lines are grouped by source_id in
/// order of first appearance.
inline std::vector<ChunkSet> read_chunks_jsonl(std::istream& is) {
  std::vector<ChunkSet> sets;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const auto id = j.at("source_id").get<std::string>();
    auto it = std::find_if(sets.begin(), sets.end(), [&](const ChunkSet& s) { return s.source_id == id; });
    if (it == sets.end()) {
      sets.push_back({id, 0, {}});
      it = std::prev(sets.end());
    }
    Chunk c;
    c.chunk_index = j.at("chunk_index").get<std::size_t>();
    c.text = j.at("text").get<std::string>();
    c.token_count = j.at("token_count").get<TokenCount>();
    c.start_offset = j.at("start_offset").get<std::size_t>();
    it->chunks.push_back(std::move(c));
  }
  return sets;
}

}  // namespace drift
