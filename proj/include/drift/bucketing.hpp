#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "drift/error.hpp"

namespace drift {

using TokenCount = std::int64_t;

/// Closed token-length interval. Buckets are matched as (lower, upper] except
/// the first bucket, which also absorbs every n at or below its lower bound.
struct Bucket {
  TokenCount lower = 0;
  TokenCount upper = 0;

  bool operator==(const Bucket&) const = default;
};

inline std::string to_string(const Bucket& b) {
  return std::to_string(b.lower) + "-" + std::to_string(b.upper);
}

class BucketTable {
 public:
  BucketTable() = default;

  /// Validates ordering: strictly increasing, contiguous (each lower equals the
  /// previous upper), positive uppers.
  explicit BucketTable(std::vector<Bucket> ranges) : ranges_(std::move(ranges)) {
    require(!ranges_.empty(), ErrorKind::InvalidArgument, "bucket table is empty");
    for (std::size_t i = 0; i < ranges_.size(); ++i) {
      const auto& b = ranges_[i];
      require(b.upper >= 1, ErrorKind::InvalidArgument, "bucket upper bound must be positive");
      require(b.lower >= 0 && b.lower < b.upper, ErrorKind::InvalidArgument,
              "bucket " + drift::to_string(b) + " is empty or inverted");
      if (i > 0) {
        require(b.lower == ranges_[i - 1].upper, ErrorKind::InvalidArgument,
                "bucket " + drift::to_string(b) + " does not continue from " +
                    drift::to_string(ranges_[i - 1]));
      }
    }
  }

  /// 64-128, 128-256, ..., 4096-8192.
  static BucketTable default_table() {
    std::vector<Bucket> r;
    for (TokenCount lo = 64; lo < 8192; lo *= 2) r.push_back({lo, lo * 2});
    return BucketTable(std::move(r));
  }

  const std::vector<Bucket>& ranges() const noexcept { return ranges_; }
  TokenCount max_tokens() const { return ranges_.back().upper; }
  std::size_t size() const noexcept { return ranges_.size(); }

  /// Index of the bucket containing n. Throws OutOfRange above the table.
  std::size_t index_of(TokenCount n) const {
    require(n >= 1, ErrorKind::InvalidArgument, "token count must be >= 1");
    require(n <= max_tokens(), ErrorKind::OutOfRange,
            "token count " + std::to_string(n) + " exceeds largest bucket upper bound " +
                std::to_string(max_tokens()) + "; chunk the input first");
    for (std::size_t i = 0; i < ranges_.size(); ++i) {
      if (n <= ranges_[i].upper) return i;
    }
    return ranges_.size() - 1;  // unreachable
  }

  bool operator==(const BucketTable&) const = default;

 private:
  std::vector<Bucket> ranges_;
};

inline Bucket bucket_of(TokenCount n, const BucketTable& table) {
  return table.ranges()[table.index_of(n)];
}

inline TokenCount ceil_div(TokenCount a, TokenCount b) { return (a + b - 1) / b; }

inline TokenCount xi_uniform(TokenCount n, TokenCount ratio) {
  require(n >= 1 && ratio >= 1, ErrorKind::InvalidArgument, "xi_uniform needs n >= 1 and c >= 1");
  return ceil_div(n, ratio);
}

/// Fixed output budget: ceil(b(n) / c) where b(n) is the containing bucket's
/// upper bound.
inline TokenCount xi_bucket(TokenCount n, TokenCount ratio, const BucketTable& table) {
  require(ratio >= 1, ErrorKind::InvalidArgument, "compression ratio must be >= 1");
  return ceil_div(bucket_of(n, table).upper, ratio);
}

enum class CompressionMode { Static, Dynamic };

inline std::string_view to_string(CompressionMode m) {
  return m == CompressionMode::Static ? "static" : "dynamic";
}

inline CompressionMode compression_mode_from_string(std::string_view s) {
  if (s == "static") return CompressionMode::Static;
  if (s == "dynamic") return CompressionMode::Dynamic;
  throw Error(ErrorKind::InvalidArgument, "unknown compression mode '" + std::string(s) + "'");
}

struct CompressionSpec {
  TokenCount ratio = 8;
  CompressionMode mode = CompressionMode::Static;

  static constexpr TokenCount kStaticRatio = 8;
  static constexpr TokenCount kDynamicRatio = 32;

  static CompressionSpec static_default() { return {kStaticRatio, CompressionMode::Static}; }
  static CompressionSpec dynamic_default() { return {kDynamicRatio, CompressionMode::Dynamic}; }
  static CompressionSpec dynamic(TokenCount ratio) { return {ratio, CompressionMode::Dynamic}; }

  void validate() const {
    require(ratio >= 1, ErrorKind::InvalidArgument, "compression ratio must be >= 1");
  }

  TokenCount budget(TokenCount n, const BucketTable& table) const {
    validate();
    return xi_bucket(n, ratio, table);
  }

  bool operator==(const CompressionSpec&) const = default;
};

}  // namespace drift
