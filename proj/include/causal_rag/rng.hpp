#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace causal_rag {

// Seeded generator whose output is identical across standard libraries.
// std::uniform_int_distribution and std::shuffle are implementation-defined,
// so bounded draws are done here by rejection on the raw mt19937_64 stream.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  // Seed derived from a base seed plus a salt string (connective key,
  // sentence id, ...), so independent streams do not depend on call order.
  SeededRng(std::uint64_t seed, std::string_view salt);

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  // k distinct indices from [0, n) in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

  template <typename T>
  std::vector<T> sample(const std::vector<T>& items, std::size_t k) {
    std::vector<T> out;
    for (std::size_t i : sample_indices(items.size(), k)) out.push_back(items[i]);
    return out;
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt);

}  // namespace causal_rag
