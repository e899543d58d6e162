#pragma once

#include <cstdint>

namespace dsand::rng {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Key of an independent stream derived from a parent key and a label.
std::uint64_t derive(std::uint64_t key, std::uint64_t label) noexcept;

/// Counter-based generator: draw i of stream k is a pure function of (k, i),
/// so results never depend on iteration order or thread layout.
class Stream {
 public:
  explicit Stream(std::uint64_t key) noexcept : key_(key) {}
  Stream(std::uint64_t seed, std::uint64_t label) noexcept : key_(derive(seed, label)) {}

  std::uint64_t next() noexcept;
  /// Uniform on the open interval (0, 1).
  double uniform() noexcept;
  double normal() noexcept;
  double exponential() noexcept;
  /// +1 or -1 with equal probability.
  double sign() noexcept { return (next() >> 63) ? -1.0 : 1.0; }
  int below(int bound) noexcept;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dsand::rng
