#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace drift {

/// 64-bit FNV-1a; stable across platforms and runs.
class Fnv64 {
 public:
  Fnv64& update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv64& update(std::string_view s) {
    const std::uint64_t n = s.size();
    update(&n, sizeof n);  // length prefix keeps field boundaries distinct
    return update(s.data(), s.size());
  }
  std::uint64_t digest() const noexcept { return h_; }
  std::string hex() const { return to_hex(h_); }

  static std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::string content_hash(std::string_view s) { return Fnv64().update(s).hex(); }

}  // namespace drift
