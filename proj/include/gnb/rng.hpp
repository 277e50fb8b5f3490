#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace gnb {

// Independent stream seeds derived from a run seed plus stream tags.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  // seed_seq keeps only 32 bits per entry, so split each part in two
  std::vector<std::uint32_t> words_in;
  for (auto p : parts) {
    words_in.push_back(static_cast<std::uint32_t>(p));
    words_in.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words_in.begin(), words_in.end());
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

inline std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline void restore_rng(std::mt19937_64& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
}

}  // namespace gnb
