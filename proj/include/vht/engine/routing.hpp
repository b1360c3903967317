#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

namespace vht::engine {

/// Opaque routing key. Bytes only; short keys stay inside the small-string buffer.
using RouteKey = std::string;

/// Packs trivially copyable values into a key in native byte order.
template <class... Ts>
RouteKey make_key(const Ts&... parts) {
  RouteKey key;
  key.reserve((sizeof(Ts) + ... + 0));
  (key.append(reinterpret_cast<const char*>(&parts), sizeof(Ts)), ...);
  return key;
}

/// FNV-1a over the bytes followed by the murmur3 64-bit finalizer. Pure and
/// independent of process, platform seed or standard library version.
inline std::uint64_t stable_hash64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ULL;
  h ^= h >> 33;
  return h;
}

inline std::size_t route_key(std::string_view key, std::size_t n) noexcept {
  if (n <= 1) return 0;
  return static_cast<std::size_t>(stable_hash64(key) % n);
}

/// Round-robin state of one (source replica, stream) pair.
class ShuffleRouter {
 public:
  std::size_t next(std::size_t n) noexcept {
    if (n <= 1) {
      ++counter_;
      return 0;
    }
    return static_cast<std::size_t>(counter_++ % n);
  }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t counter_ = 0;
};

inline std::vector<std::size_t> route_all(std::size_t n) {
  std::vector<std::size_t> out(n == 0 ? 1 : n);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

}  // namespace vht::engine
