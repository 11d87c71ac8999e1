#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "drift/error.hpp"

namespace drift::metrics {

/// Lowercased alphanumeric runs; every other non-space byte is its own token.
inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
      if (!std::isspace(c)) out.emplace_back(1, ch);
    }
  }
  flush();
  return out;
}

using Ngrams = std::map<std::vector<std::string>, int>;

inline Ngrams ngrams(const std::vector<std::string>& toks, std::size_t n) {
  Ngrams out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++out[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
  return out;
}

inline int clipped_overlap(const Ngrams& hyp, const Ngrams& ref) {
  int m = 0;
  for (const auto& [g, c] : hyp)
    if (auto it = ref.find(g); it != ref.end()) m += std::min(c, it->second);
  return m;
}

/// Corpus BLEU-4 on a 0-100 scale. Orders with no hypothesis n-grams are
/// dropped and the remaining weights renormalized; zero matches at a higher
/// order get epsilon smoothing (0.1 / count). No unigram match scores 0.
inline double corpus_bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs) {
  require(hyps.size() == refs.size(), ErrorKind::LengthMismatch, "hypothesis/reference count mismatch");
  require(!hyps.empty(), ErrorKind::EmptyInput, "no texts to score");
  long match[4] = {0, 0, 0, 0}, total[4] = {0, 0, 0, 0};
  long hyp_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto h = tokenize(hyps[i]);
    const auto r = tokenize(refs[i]);
    hyp_len += static_cast<long>(h.size());
    ref_len += static_cast<long>(r.size());
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto hg = ngrams(h, n);
      match[n - 1] += clipped_overlap(hg, ngrams(r, n));
      total[n - 1] += h.size() >= n ? static_cast<long>(h.size() - n + 1) : 0;
    }
  }
  if (hyp_len == 0 || match[0] == 0) return 0.0;
  double log_sum = 0.0;
  int orders = 0;
  for (int n = 0; n < 4; ++n) {
    if (total[n] == 0) continue;
    const double p = match[n] > 0 ? static_cast<double>(match[n]) / total[n] : 0.1 / static_cast<double>(total[n]);
    log_sum += std::log(p);
    ++orders;
  }
  const double bp = hyp_len >= ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / hyp_len);
  return 100.0 * bp * std::exp(log_sum / orders);
}

inline double f_measure(double overlap, double hyp_count, double ref_count) {
  if (overlap <= 0.0 || hyp_count <= 0.0 || ref_count <= 0.0) return 0.0;
  const double p = overlap / hyp_count, r = overlap / ref_count;
  return 2.0 * p * r / (p + r);
}

/// ROUGE-N F1 for one pair, 0-100.
inline double rouge_n(std::string_view hyp, std::string_view ref, std::size_t n) {
  const auto h = tokenize(hyp), r = tokenize(ref);
  const auto hg = ngrams(h, n), rg = ngrams(r, n);
  const double hc = h.size() >= n ? static_cast<double>(h.size() - n + 1) : 0.0;
  const double rc = r.size() >= n ? static_cast<double>(r.size() - n + 1) : 0.0;
  if (hc == 0.0 && rc == 0.0) return 100.0;
  return 100.0 * f_measure(clipped_overlap(hg, rg), hc, rc);
}

inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// ROUGE-L (longest common subsequence F1) for one pair, 0-100.
inline double rouge_l(std::string_view hyp, std::string_view ref) {
  const auto h = tokenize(hyp), r = tokenize(ref);
  if (h.empty() && r.empty()) return 100.0;
  return 100.0 * f_measure(static_cast<double>(lcs_length(h, r)), static_cast<double>(h.size()),
                           static_cast<double>(r.size()));
}

/// Whitespace-insensitive exact match.
inline bool exact_match(std::string_view a, std::string_view b) {
  auto squash = [](std::string_view s) {
    std::string out;
    bool gap = false;
    for (char c : s) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        gap = true;
        continue;
      }
      if (gap && !out.empty()) out.push_back(' ');
      gap = false;
      out.push_back(c);
    }
    return out;
  };
  return squash(a) == squash(b);
}

}  // namespace drift::metrics
