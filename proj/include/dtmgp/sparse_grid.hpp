#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace dtmgp {

inline constexpr int kMaxLevel = 40;
inline constexpr std::uint64_t kMaxDesignSize = std::uint64_t{1} << 26;

// The point offset * 2^-level of a dyadic set; offset is odd and < 2^level.
struct DyadicIndex {
  int level = 1;
  std::int64_t offset = 1;

  double value() const;
  // Ordinal of this point inside the sorted dyadic set of any level >= level.
  std::size_t sorted_position() const;

  friend bool operator==(const DyadicIndex&, const DyadicIndex&) = default;
};

struct MultiIndex {
  std::vector<int> levels;
  std::vector<std::int64_t> offsets;

  std::size_t dimension() const { return levels.size(); }
  int level_sum() const;
  DyadicIndex component(std::size_t j) const { return {levels[j], offsets[j]}; }
  std::vector<double> point() const;

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

// {1, 3, ..., 2^level - 1}.
std::vector<std::int64_t> odd_indices(int level);

// D_1, D_2, ..., D_level concatenated, each increment ascending.
std::vector<DyadicIndex> sorted_dyadic_1d(int level);

// Number of points of the level-l sparse grid in d dimensions.
std::uint64_t sparse_grid_size(int level, int dim);

// All level vectors with entries >= 1 summing to `sum`, ordered
// lexicographically in the reversed vector (last entry most significant).
std::vector<std::vector<int>> level_vectors_with_sum(int dim, int sum);

std::uint64_t binomial(int n, int k);

// Cartesian product of sorted dyadic sets. Ordinals run with the first
// coordinate fastest and the last coordinate most significant.
class FullGridDesign {
 public:
  explicit FullGridDesign(std::vector<int> levels);

  const std::vector<int>& levels() const { return levels_; }
  std::size_t dimension() const { return levels_.size(); }
  std::size_t size() const { return size_; }
  MultiIndex label(std::size_t ordinal) const;
  std::vector<double> point(std::size_t ordinal) const;
  // Inverse of label(); nullopt when the label lies outside this grid.
  std::optional<std::size_t> position_of(const MultiIndex& label) const;

 private:
  std::vector<int> levels_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

FullGridDesign full_grid(std::span<const int> levels);

// Hyperbolic-cross sparse grid, ordered shell by shell (|level vector|
// ascending), blocks in level_vectors_with_sum order within a shell and
// offsets in full-grid order within a block.
class SparseGridDesign {
 public:
  SparseGridDesign(int level, int dim);

  int level() const { return level_; }
  std::size_t dimension() const { return dim_; }
  std::size_t size() const { return size_; }

  MultiIndex label(std::size_t ordinal) const;
  std::span<const int> levels_at(std::size_t ordinal) const;
  std::span<const std::int64_t> offsets_at(std::size_t ordinal) const;
  std::vector<double> point(std::size_t ordinal) const;
  // Row-major size() x dimension() array of coordinates.
  std::vector<double> points() const;

  std::optional<std::size_t> position_of(const MultiIndex& label) const;
  // Same lookup from raw per-dimension arrays, without building a MultiIndex.
  std::optional<std::size_t> position_of(std::span<const int> levels,
                                         std::span<const std::int64_t> offsets) const;

  struct Block {
    std::vector<int> levels;
    std::size_t start = 0;
    std::size_t count = 0;
  };
  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  struct LevelsHash {
    std::size_t operator()(const std::vector<int>& v) const;
  };
  std::optional<std::size_t> block_index(std::span<const int> levels) const;

  int level_ = 1;
  std::size_t dim_ = 1;
  std::size_t size_ = 0;
  std::vector<Block> blocks_;
  std::unordered_map<std::vector<int>, std::size_t, LevelsHash> block_of_;
  std::vector<int> levels_;             // size_ * dim_
  std::vector<std::int64_t> offsets_;   // size_ * dim_
};

SparseGridDesign sparse_grid(int level, int dim);

// For every full-grid ordinal, the sparse-grid ordinal carrying the same label.
std::vector<std::size_t> fg_to_sg_positions(const FullGridDesign& fg, const SparseGridDesign& sg);

}  // namespace dtmgp
