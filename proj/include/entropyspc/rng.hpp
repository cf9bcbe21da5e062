#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace entropyspc::rng {

/// SplitMix64 finaliser; a bijective mix of one 64-bit word.
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Independent stream labels. Values are part of the reproducibility
/// contract; do not renumber.
enum class Domain : std::uint64_t { PhaseOne = 1, Replicate = 2 };

/// Seed of stream `index` in `domain`, a pure function of (master, domain,
/// index) so streams can be generated in any order.
constexpr std::uint64_t stream_seed(std::uint64_t master, Domain domain, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(domain))) + index);
}

inline constexpr std::string_view generator_name = "mt19937_64 + std::normal_distribution, splitmix64 stream seeds";

/// Normal variates from one derived stream.
class NormalStream {
 public:
  NormalStream(std::uint64_t master, Domain domain, std::uint64_t index, double sd)
      : engine_(stream_seed(master, domain, index)), normal_(0.0, sd) {}

  double operator()() { return normal_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace entropyspc::rng
