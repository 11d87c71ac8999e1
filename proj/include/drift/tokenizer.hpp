#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "drift/error.hpp"

namespace drift {

using TokenId = std::int32_t;
using TokenIds = std::vector<TokenId>;

/// Lossless word-piece tokenizer with byte fallback.
///
/// Ids 0..255 are raw bytes, 256 is end-of-sequence, then the learned word
/// pieces (an alphanumeric run with an optional single leading space). Any
/// piece missing from the vocabulary falls back to its bytes, so every string
/// round-trips exactly. Special tokens registered after construction get ids
/// from `base_vocab_size()` upward; they are input-only (the LM head covers the
/// base vocabulary).
class Tokenizer {
 public:
  static constexpr TokenId kEos = 256;
  static constexpr std::string_view kEosLiteral = "<|eos|>";

  Tokenizer() = default;

  /// Learns up to `max_pieces` word pieces seen at least `min_count` times.
  static Tokenizer build(std::span<const std::string> corpus, std::size_t max_pieces,
                         std::size_t min_count = 2) {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& text : corpus) {
      for_each_piece(text, [&](std::string_view p) {
        if (p.size() > 1 && is_word_piece(p)) ++counts[std::string(p)];
      });
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::erase_if(ranked, [&](const auto& kv) { return kv.second < min_count; });
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (ranked.size() > max_pieces) ranked.resize(max_pieces);
    std::vector<std::string> pieces;
    pieces.reserve(ranked.size());
    for (auto& kv : ranked) pieces.push_back(std::move(kv.first));
    std::sort(pieces.begin(), pieces.end());
    return from_pieces(std::move(pieces));
  }

  static Tokenizer from_pieces(std::vector<std::string> pieces) {
    Tokenizer t;
    t.pieces_ = std::move(pieces);
    for (std::size_t i = 0; i < t.pieces_.size(); ++i) {
      const auto& p = t.pieces_[i];
      require(p.size() > 1 && is_word_piece(p), ErrorKind::InvalidArgument,
              "invalid word piece '" + p + "'");
      t.piece_ids_[p] = static_cast<TokenId>(kFirstPiece + i);
    }
    return t;
  }

  /// Size of the LM-head vocabulary (bytes, eos, word pieces).
  std::size_t base_vocab_size() const noexcept { return kFirstPiece + pieces_.size(); }
  /// Base vocabulary plus registered special tokens.
  std::size_t vocab_size() const noexcept { return base_vocab_size() + added_.size(); }
  std::size_t added_count() const noexcept { return added_.size(); }
  const std::vector<std::string>& added_literals() const noexcept { return added_; }
  const std::vector<std::string>& pieces() const noexcept { return pieces_; }

  /// Returns the id of `literal`, registering it if new.
  TokenId add_special(const std::string& literal) {
    if (auto id = special_id(literal)) return *id;
    require(!literal.empty(), ErrorKind::InvalidArgument, "special token literal is empty");
    added_.push_back(literal);
    return static_cast<TokenId>(base_vocab_size() + added_.size() - 1);
  }

  std::optional<TokenId> special_id(std::string_view literal) const {
    if (literal == kEosLiteral) return kEos;
    for (std::size_t i = 0; i < added_.size(); ++i) {
      if (added_[i] == literal) return static_cast<TokenId>(base_vocab_size() + i);
    }
    return std::nullopt;
  }

  TokenIds encode(std::string_view text) const {
    TokenIds out;
    out.reserve(text.size() / 3 + 4);
    std::size_t i = 0;
    while (i < text.size()) {
      // Special literals take precedence over ordinary pieces.
      std::size_t next_special = std::string_view::npos;
      std::size_t which = 0;
      std::size_t best_len = 0;
      auto consider = [&](std::string_view lit, std::size_t idx) {
        const auto at = text.find(lit, i);
        if (at == std::string_view::npos) return;
        if (at < next_special || (at == next_special && lit.size() > best_len)) {
          next_special = at;
          which = idx;
          best_len = lit.size();
        }
      };
      consider(kEosLiteral, static_cast<std::size_t>(-1));
      for (std::size_t k = 0; k < added_.size(); ++k) consider(added_[k], k);

      const auto plain_end = std::min(next_special, text.size());
      encode_plain(text.substr(i, plain_end - i), out);
      if (next_special == std::string_view::npos) break;
      out.push_back(which == static_cast<std::size_t>(-1)
                        ? kEos
                        : static_cast<TokenId>(base_vocab_size() + which));
      i = next_special + best_len;
    }
    return out;
  }

  std::size_t count(std::string_view text) const { return encode(text).size(); }

  std::string decode(std::span<const TokenId> ids) const {
    std::string out;
    for (TokenId id : ids) out += piece(id);
    return out;
  }

  std::string piece(TokenId id) const {
    require(id >= 0 && static_cast<std::size_t>(id) < vocab_size(), ErrorKind::IndexOutOfRange,
            "token id " + std::to_string(id) + " outside vocabulary");
    if (id < 256) return std::string(1, static_cast<char>(static_cast<unsigned char>(id)));
    if (id == kEos) return std::string(kEosLiteral);
    const auto u = static_cast<std::size_t>(id);
    if (u < base_vocab_size()) return pieces_[u - kFirstPiece];
    return added_[u - base_vocab_size()];
  }

  nlohmann::json to_json() const {
    return {{"kind", "wordpiece-byte-fallback"}, {"pieces", pieces_}, {"added", added_}};
  }

  static Tokenizer from_json(const nlohmann::json& j) {
    auto t = from_pieces(j.at("pieces").get<std::vector<std::string>>());
    for (const auto& lit : j.at("added").get<std::vector<std::string>>()) t.add_special(lit);
    return t;
  }

  /// Calls `fn` for each pre-tokenization piece of `text`; pieces concatenate to
  /// `text` exactly.
  template <typename Fn>
  static void for_each_piece(std::string_view text, Fn&& fn) {
    std::size_t i = 0;
    while (i < text.size()) {
      std::size_t j = i;
      if (text[j] == ' ' && j + 1 < text.size() && is_alnum(text[j + 1])) ++j;
      if (is_alnum(text[j])) {
        while (j < text.size() && is_alnum(text[j])) ++j;
      } else {
        j = i + 1;
      }
      fn(text.substr(i, j - i));
      i = j;
    }
  }

 private:
  static constexpr std::size_t kFirstPiece = 257;

  static bool is_alnum(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 128 && std::isalnum(u);
  }

  static bool is_word_piece(std::string_view p) {
    std::size_t k = (!p.empty() && p[0] == ' ') ? 1 : 0;
    if (k >= p.size()) return false;
    for (; k < p.size(); ++k)
      if (!is_alnum(p[k])) return false;
    return true;
  }

  void encode_plain(std::string_view text, TokenIds& out) const {
    for_each_piece(text, [&](std::string_view p) {
      if (p.size() > 1) {
        if (auto it = piece_ids_.find(std::string(p)); it != piece_ids_.end()) {
          out.push_back(it->second);
          return;
        }
      }
      for (char c : p) out.push_back(static_cast<TokenId>(static_cast<unsigned char>(c)));
    });
  }

  std::vector<std::string> pieces_;
  std::unordered_map<std::string, TokenId> piece_ids_;
  std::vector<std::string> added_;
};

}  // namespace drift
