#include "dtmgp/rng.hpp"

namespace dtmgp {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root_seed, Stream purpose, std::uint64_t index) {
  std::uint64_t h = splitmix64(root_seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  return splitmix64(h ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

Rng make_stream(std::uint64_t root_seed, Stream purpose, std::uint64_t index) {
  const std::uint64_t s = derive_seed(root_seed, purpose, index);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
  return Rng(seq);
}

std::vector<double> standard_normals(std::size_t n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) v = normal(rng);
  return out;
}

}  // namespace dtmgp
