#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace prcnn {

// Independent stream per key tuple, e.g. (seed, epoch, batch, purpose). The same
// tuple always yields the same sequence regardless of what other streams consumed.
inline std::mt19937_64 keyed_rng(std::initializer_list<std::uint64_t> key) {
  std::vector<std::uint32_t> words;
  for (std::uint64_t k : key) {
    words.push_back(std::uint32_t(k));
    words.push_back(std::uint32_t(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

// Purpose tags for keyed_rng.
enum class Stream : std::uint64_t {
  kScene = 1,
  kCamera = 2,
  kDropout = 3,
  kShuffle = 4,
  kSampling = 5,
  kInstances = 6,
  kBatchOrder = 7,
  kCrop = 8,
};

inline std::uint64_t tag(Stream s) { return std::uint64_t(s); }

}  // namespace prcnn
