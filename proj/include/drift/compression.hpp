#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstring>
#include <exception>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>
#include <vector>

#include "drift/bucketing.hpp"
#include "drift/chunking.hpp"
#include "drift/hash.hpp"
#include "drift/instructions.hpp"
#include "drift/model.hpp"

namespace drift {

/// Implicit fact tokens for one chunk: xi rows of knowledge-model width.
struct LatentBlock {
  Mat values;
  std::size_t chunk_index = 0;
  CompressionMode mode = CompressionMode::Static;
  TokenCount ratio = 8;

  TokenCount rows() const noexcept { return values.rows(); }
};

struct LatentSequence {
  std::vector<LatentBlock> blocks;

  TokenCount total_xi() const {
    TokenCount n = 0;
    for (const auto& b : blocks) n += b.rows();
    return n;
  }
  Eigen::Index width() const { return blocks.empty() ? 0 : blocks.front().values.cols(); }
};

/// Knowledge-model input with the compression slots at the end.
struct CompressionPrompt {
  MixedInput input;
  std::vector<std::int64_t> positions;
  TokenCount xi = 0;
};

namespace detail {

inline TokenId require_cps(const CausalLM& kno) {
  const auto id = kno.compression_token();
  require(id.has_value(), ErrorKind::InvalidArgument,
          "compression token is not registered on model '" + kno.model_id + "'");
  return *id;
}

inline TokenCount chunk_tokens(const CausalLM& kno, const Document& chunk) {
  const auto n = chunk.token_count > 0 ? chunk.token_count : static_cast<TokenCount>(kno.tokenizer.count(chunk.text));
  return std::max<TokenCount>(n, 1);
}

inline CompressionPrompt finish_prompt(const CausalLM& kno, const std::string& text, TokenCount xi) {
  const TokenId cps = require_cps(kno);
  TokenIds ids = kno.tokenize(text);
  ids.insert(ids.end(), static_cast<std::size_t>(xi), cps);
  CompressionPrompt p;
  p.xi = xi;
  const auto T = static_cast<std::int64_t>(ids.size());
  for (std::int64_t i = T - xi; i < T; ++i) p.positions.push_back(i);
  p.input.tokens(std::move(ids));
  return p;
}

}  // namespace detail

/// I_sta with {num}=xi and the placeholder expanded to xi compression
/// literals, followed by xi appended compression tokens whose hidden states
/// are read out.
inline CompressionPrompt static_prompt(const CausalLM& kno, const Document& chunk, const CompressionSpec& spec,
                                       const BucketTable& table = BucketTable::default_table()) {
  spec.validate();
  require(spec.mode == CompressionMode::Static, ErrorKind::InvalidArgument, "static compression needs a static spec");
  const TokenCount xi = xi_bucket(detail::chunk_tokens(kno, chunk), spec.ratio, table);
  const std::string lit(kCompressionLiteral);
  const auto text = format(templates::kStatic, {{"num", std::to_string(xi)},
                                                {"COMPRESSION_TOKEN", repeat(lit, static_cast<std::size_t>(xi))},
                                                {"context", chunk.text}});
  return detail::finish_prompt(kno, text, xi);
}

inline CompressionPrompt dynamic_prompt(const CausalLM& kno, const Document& chunk, std::string_view query,
                                        const CompressionSpec& spec,
                                        const BucketTable& table = BucketTable::default_table()) {
  spec.validate();
  require(spec.mode == CompressionMode::Dynamic, ErrorKind::InvalidArgument,
          "dynamic compression needs a dynamic spec");
  require(query.find_first_not_of(" \t\r\n") != std::string_view::npos, ErrorKind::EmptyQuery, "query is empty");
  const TokenCount xi = xi_bucket(detail::chunk_tokens(kno, chunk), spec.ratio, table);
  const std::string lit(kCompressionLiteral);
  const auto text = format(templates::kDynamic, {{"num", std::to_string(xi)},
                                                 {"COMPRESSION_TOKEN", repeat(lit, static_cast<std::size_t>(xi))},
                                                 {"document", chunk.text},
                                                 {"question", query}});
  return detail::finish_prompt(kno, text, xi);
}

/// Differentiable compression: hidden states at the compression slots.
inline Var compress(Tape& tape, CausalLM& kno, const CompressionPrompt& prompt, std::mt19937_64* rng = nullptr) {
  return last_hidden_at(tape, kno, prompt.input, prompt.positions, rng);
}

inline LatentBlock compress_static(CausalLM& kno, const Document& chunk, const CompressionSpec& spec,
                                   const BucketTable& table = BucketTable::default_table()) {
  const auto prompt = static_prompt(kno, chunk, spec, table);
  return {last_hidden_at(kno, prompt.input, prompt.positions), 0, spec.mode, spec.ratio};
}

inline LatentBlock compress_dynamic(CausalLM& kno, const Document& chunk, std::string_view query,
                                    const CompressionSpec& spec,
                                    const BucketTable& table = BucketTable::default_table()) {
  const auto prompt = dynamic_prompt(kno, chunk, query, spec, table);
  return {last_hidden_at(kno, prompt.input, prompt.positions), 0, spec.mode, spec.ratio};
}

/// Overlapping split followed by independent per-chunk dynamic compression.
/// With `parallelism` > 1 chunks are compressed on worker threads; the result
/// is ordered by chunk index either way.
inline LatentSequence compress_document(CausalLM& kno, const Document& doc, std::string_view query,
                                        const CompressionSpec& spec, const OverlapConfig& chunk_cfg,
                                        const BucketTable& table = BucketTable::default_table(),
                                        std::size_t parallelism = 1) {
  const auto set = overlapping_split(doc, chunk_cfg, kno.tokenizer);
  LatentSequence seq;
  seq.blocks.resize(set.size());
  auto work = [&](std::size_t i) {
    seq.blocks[i] = compress_dynamic(kno, set.chunks[i].as_document(), query, spec, table);
    seq.blocks[i].chunk_index = i;
  };
  const std::size_t workers = std::min(std::max<std::size_t>(parallelism, 1), set.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < set.size(); ++i) work(i);
    return seq;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(set.size());
  std::atomic<std::size_t> next{0};
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < set.size(); i = next++) {
        try {
          work(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return seq;
}

// Binary latent artifact: magic, width, ratio, mode, block count, per-block
// (chunk index, xi), then row-major float32 values.
inline constexpr char kLatentMagic[8] = {'D', 'R', 'F', 'T', 'L', 'A', 'T', '1'};

namespace detail {
template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  require(static_cast<bool>(is), ErrorKind::IoError, "truncated latent artifact");
  return v;
}
}  // namespace detail

inline void write_latents(std::ostream& os, const LatentSequence& seq) {
  require(!seq.blocks.empty(), ErrorKind::InvalidArgument, "empty latent sequence");
  os.write(kLatentMagic, sizeof kLatentMagic);
  const auto& first = seq.blocks.front();
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(seq.width()));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(first.ratio));
  detail::put<std::uint8_t>(os, first.mode == CompressionMode::Static ? 0 : 1);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(seq.blocks.size()));
  for (const auto& b : seq.blocks) {
    require(b.values.cols() == seq.width(), ErrorKind::WidthMismatch, "blocks differ in width");
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(b.chunk_index));
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(b.rows()));
  }
  for (const auto& b : seq.blocks)
    os.write(reinterpret_cast<const char*>(b.values.data()),
             static_cast<std::streamsize>(b.values.size() * sizeof(float)));
  require(static_cast<bool>(os), ErrorKind::IoError, "failed writing latent artifact");
}

inline LatentSequence read_latents(std::istream& is) {
  char magic[sizeof kLatentMagic];
  is.read(magic, sizeof magic);
  require(is && std::memcmp(magic, kLatentMagic, sizeof magic) == 0, ErrorKind::ParseError,
          "not a latent artifact");
  const auto d = detail::get<std::uint32_t>(is);
  const auto ratio = detail::get<std::uint32_t>(is);
  const auto mode = detail::get<std::uint8_t>(is) == 0 ? CompressionMode::Static : CompressionMode::Dynamic;
  const auto k = detail::get<std::uint32_t>(is);
  LatentSequence seq;
  std::vector<std::uint32_t> xis;
  for (std::uint32_t i = 0; i < k; ++i) {
    LatentBlock b;
    b.chunk_index = detail::get<std::uint32_t>(is);
    xis.push_back(detail::get<std::uint32_t>(is));
    b.mode = mode;
    b.ratio = ratio;
    seq.blocks.push_back(std::move(b));
  }
  for (std::uint32_t i = 0; i < k; ++i) {
    Mat m(xis[i], d);
    is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
    require(static_cast<bool>(is), ErrorKind::IoError, "truncated latent artifact");
    seq.blocks[i].values = std::move(m);
  }
  return seq;
}

/// Hash of every parameter value; changes whenever the checkpoint does.
inline std::string model_hash(const CausalLM& model) {
  Fnv64 h;
  h.update(model.model_id);
  model.net.for_each_parameter([&](std::string_view g, const Parameter& p) {
    h.update(g).update(p.name);
    h.update(p.value.data(), static_cast<std::size_t>(p.value.size()) * sizeof(float));
  });
  return h.hex();
}

inline std::string cache_key(std::string_view model_hash_hex, std::string_view chunk_text, std::string_view query,
                             const CompressionSpec& spec) {
  Fnv64 h;
  h.update(model_hash_hex).update(content_hash(chunk_text)).update(content_hash(query));
  h.update(to_string(spec.mode)).update(std::to_string(spec.ratio));
  return h.hex();
}

/// In-memory latent cache; safe for concurrent lookups and inserts.
class LatentCache {
 public:
  std::optional<LatentBlock> find(const std::string& key) const {
    std::lock_guard lock(mu_);
    const auto it = blocks_.find(key);
    if (it == blocks_.end()) return std::nullopt;
    return it->second;
  }
  void insert(const std::string& key, LatentBlock block) {
    std::lock_guard lock(mu_);
    blocks_.insert_or_assign(key, std::move(block));
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return blocks_.size();
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, LatentBlock> blocks_;
};

}  // namespace drift
