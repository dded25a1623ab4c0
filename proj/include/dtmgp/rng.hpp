#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace dtmgp {

using Rng = std::mt19937_64;

// Purposes a root seed is split into. Each purpose gets its own family of
// streams, so drawing more from one never shifts another.
enum class Stream : std::uint64_t {
  training = 1,
  predictive = 2,
  field = 3,
  data = 4,
  test_points = 5,
  prior = 6,
  replication = 7,
};

// Counter-based split: the stream depends only on (root, purpose, index).
Rng make_stream(std::uint64_t root_seed, Stream purpose, std::uint64_t index = 0);

// Derives a child root seed, used to give each macro-replication its own tree.
std::uint64_t derive_seed(std::uint64_t root_seed, Stream purpose, std::uint64_t index);

std::vector<double> standard_normals(std::size_t n, Rng& rng);

}  // namespace dtmgp
