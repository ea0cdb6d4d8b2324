#pragma once

#include <cstdint>
#include <vector>

namespace cgcre {

// SplitMix64 generator. One run-level seed derives every stream the engine
// uses (parameter init, dropout, shuffling, synthetic data), so training is
// bit-reproducible on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) with 53 random mantissa bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform int in [0, bound); bound must be positive.
  int next_int(int bound) {
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(bound));
  }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

  // Deterministic sub-seed for a named stream of a run seed.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    Rng r(seed ^ (0xa0761d6478bd642fULL * (stream + 1)));
    return r.next_u64();
  }

 private:
  std::uint64_t state_;
};

// Stream ids used by the engine.
namespace rng_stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kDropout = 3;
inline constexpr std::uint64_t kSynth = 4;
inline constexpr std::uint64_t kGradCheck = 5;
}  // namespace rng_stream

// In-place Fisher-Yates; avoids std::shuffle's unspecified algorithm.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (int i = static_cast<int>(items.size()) - 1; i > 0; --i) {
    int j = rng.next_int(i + 1);
    std::swap(items[i], items[j]);
  }
}

}  // namespace cgcre
