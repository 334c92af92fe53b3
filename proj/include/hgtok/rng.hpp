#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace hgtok {

// SplitMix64 finalizer; used to derive independent stream keys.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Hierarchical key: derive_key(seed, {a, b, c}) names the stream at path seed/a/b/c.
constexpr std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t k = mix64(seed);
  for (std::uint64_t p : path) k = mix64(k ^ mix64(p + 0x632be59bd9b4e019ULL));
  return k;
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Named streams for the top-level consumers of --seed.
namespace stream_tag {
inline constexpr std::uint64_t kSampling = 1;
inline constexpr std::uint64_t kParams = 2;
inline constexpr std::uint64_t kBucketVectors = 3;
inline constexpr std::uint64_t kSemantic = 4;
inline constexpr std::uint64_t kRelations = 5;
inline constexpr std::uint64_t kShuffle = 6;
inline constexpr std::uint64_t kDiagnostic = 7;
inline constexpr std::uint64_t kLm = 8;
}  // namespace stream_tag

class Rng {
 public:
  explicit Rng(std::uint64_t key) : engine_(key) {}

  // Uniform in [0, n). n must be positive.
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  double normal() { return normal_(engine_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace hgtok
