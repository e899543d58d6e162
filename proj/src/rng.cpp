#include "dsand/rng.hpp"

#include <cmath>
#include <numbers>

namespace dsand::rng {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t key, std::uint64_t label) noexcept {
  return splitmix64(splitmix64(key) ^ splitmix64(label + 0x632be59bd9b4e019ULL));
}

std::uint64_t Stream::next() noexcept { return splitmix64(key_ ^ splitmix64(++counter_)); }

double Stream::uniform() noexcept {
  return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform()));
  const double t = 2.0 * std::numbers::pi * uniform();
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

double Stream::exponential() noexcept { return -std::log(uniform()); }

int Stream::below(int bound) noexcept {
  return static_cast<int>((static_cast<unsigned __int128>(next()) * static_cast<unsigned>(bound)) >> 64);
}

}  // namespace dsand::rng
