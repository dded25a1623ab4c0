#include "dtmgp/sparse_grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "dtmgp/error.hpp"

namespace dtmgp {
namespace {

void check_level(int level, const char* what) {
  if (level < 1 || level > kMaxLevel) {
    throw ConfigError(std::string(what) + ": level must lie in [1, " +
                      std::to_string(kMaxLevel) + "], got " + std::to_string(level));
  }
}

DyadicIndex from_sorted_position(std::size_t pos) {
  // Level ell occupies positions [2^(ell-1) - 1, 2^ell - 1).
  const int level = std::bit_width(pos + 1);
  const std::size_t first = (std::size_t{1} << (level - 1)) - 1;
  return {level, static_cast<std::int64_t>(2 * (pos - first) + 1)};
}

void append_level_vectors(int dim, int remaining, std::vector<int>& prefix,
                          std::vector<std::vector<int>>& out) {
  if (static_cast<int>(prefix.size()) == dim - 1) {
    if (remaining >= 1) {
      prefix.push_back(remaining);
      out.push_back(prefix);
      prefix.pop_back();
    }
    return;
  }
  const int slots_left = dim - static_cast<int>(prefix.size()) - 1;
  for (int v = 1; v <= remaining - slots_left; ++v) {
    prefix.push_back(v);
    append_level_vectors(dim, remaining - v, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

double DyadicIndex::value() const {
  return std::ldexp(static_cast<double>(offset), -level);
}

std::size_t DyadicIndex::sorted_position() const {
  return ((std::size_t{1} << (level - 1)) - 1) + static_cast<std::size_t>((offset - 1) / 2);
}

int MultiIndex::level_sum() const {
  return std::accumulate(levels.begin(), levels.end(), 0);
}

std::vector<double> MultiIndex::point() const {
  std::vector<double> x(levels.size());
  for (std::size_t j = 0; j < levels.size(); ++j) x[j] = component(j).value();
  return x;
}

std::vector<std::int64_t> odd_indices(int level) {
  check_level(level, "odd_indices");
  const std::int64_t count = std::int64_t{1} << (level - 1);
  std::vector<std::int64_t> out(static_cast<std::size_t>(count));
  for (std::int64_t k = 0; k < count; ++k) out[static_cast<std::size_t>(k)] = 2 * k + 1;
  return out;
}

std::vector<DyadicIndex> sorted_dyadic_1d(int level) {
  check_level(level, "sorted_dyadic_1d");
  std::vector<DyadicIndex> out;
  out.reserve((std::size_t{1} << level) - 1);
  for (int ell = 1; ell <= level; ++ell) {
    for (std::int64_t i : odd_indices(ell)) out.push_back({ell, i});
  }
  return out;
}

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

std::uint64_t sparse_grid_size(int level, int dim) {
  std::uint64_t m = 0;
  for (int ell = 0; ell < level; ++ell) m += (std::uint64_t{1} << ell) * binomial(ell + dim - 1, dim - 1);
  return m;
}

std::vector<std::vector<int>> level_vectors_with_sum(int dim, int sum) {
  std::vector<std::vector<int>> out;
  if (dim < 1) return out;
  std::vector<int> prefix;
  append_level_vectors(dim, sum, prefix, out);
  // Lexicographic in the reversed vector: the last coordinate is most significant.
  for (auto& v : out) std::reverse(v.begin(), v.end());
  return out;
}

// ---------------------------------------------------------------------------

FullGridDesign::FullGridDesign(std::vector<int> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw StructuralError("full_grid: empty level vector");
  for (int l : levels_) check_level(l, "full_grid");
  strides_.assign(levels_.size(), 1);
  size_ = 1;
  for (std::size_t j = 0; j < levels_.size(); ++j) {
    strides_[j] = size_;
    size_ *= (std::size_t{1} << levels_[j]) - 1;
  }
}

MultiIndex FullGridDesign::label(std::size_t ordinal) const {
  MultiIndex out;
  out.levels.resize(levels_.size());
  out.offsets.resize(levels_.size());
  for (std::size_t j = 0; j < levels_.size(); ++j) {
    const std::size_t extent = (std::size_t{1} << levels_[j]) - 1;
    const DyadicIndex d = from_sorted_position((ordinal / strides_[j]) % extent);
    out.levels[j] = d.level;
    out.offsets[j] = d.offset;
  }
  return out;
}

std::vector<double> FullGridDesign::point(std::size_t ordinal) const {
  return label(ordinal).point();
}

std::optional<std::size_t> FullGridDesign::position_of(const MultiIndex& label) const {
  if (label.dimension() != levels_.size()) return std::nullopt;
  std::size_t ordinal = 0;
  for (std::size_t j = 0; j < levels_.size(); ++j) {
    const DyadicIndex d = label.component(j);
    if (d.level < 1 || d.level > levels_[j] || d.offset % 2 == 0 || d.offset < 1 ||
        d.offset >= (std::int64_t{1} << d.level)) {
      return std::nullopt;
    }
    ordinal += d.sorted_position() * strides_[j];
  }
  return ordinal;
}

FullGridDesign full_grid(std::span<const int> levels) {
  return FullGridDesign(std::vector<int>(levels.begin(), levels.end()));
}

// ---------------------------------------------------------------------------

std::size_t SparseGridDesign::LevelsHash::operator()(const std::vector<int>& v) const {
  std::size_t h = 1469598103934665603ULL;
  for (int x : v) h = (h ^ static_cast<std::size_t>(x)) * 1099511628211ULL;
  return h;
}

SparseGridDesign::SparseGridDesign(int level, int dim) : level_(level) {
  check_level(level, "sparse_grid");
  if (dim < 1) throw ConfigError("sparse_grid: dimension must be >= 1");
  if (sparse_grid_size(level, dim) > kMaxDesignSize) {
    throw ConfigError("sparse_grid: design too large");
  }
  dim_ = static_cast<std::size_t>(dim);
  size_ = static_cast<std::size_t>(sparse_grid_size(level, dim));
  levels_.reserve(size_ * dim_);
  offsets_.reserve(size_ * dim_);

  std::vector<std::int64_t> counter(dim_);
  for (int shell = dim; shell <= level + dim - 1; ++shell) {
    for (auto& lv : level_vectors_with_sum(dim, shell)) {
      Block block{lv, levels_.size() / dim_, 1};
      for (int l : lv) block.count *= std::size_t{1} << (l - 1);
      // Odometer over offsets, first dimension fastest.
      std::fill(counter.begin(), counter.end(), 0);
      for (std::size_t k = 0; k < block.count; ++k) {
        for (std::size_t j = 0; j < dim_; ++j) {
          levels_.push_back(lv[j]);
          offsets_.push_back(2 * counter[j] + 1);
        }
        for (std::size_t j = 0; j < dim_; ++j) {
          if (++counter[j] < (std::int64_t{1} << (lv[j] - 1))) break;
          counter[j] = 0;
        }
      }
      block_of_.emplace(lv, blocks_.size());
      blocks_.push_back(std::move(block));
    }
  }
}

MultiIndex SparseGridDesign::label(std::size_t ordinal) const {
  const auto lv = levels_at(ordinal);
  const auto off = offsets_at(ordinal);
  return {std::vector<int>(lv.begin(), lv.end()), std::vector<std::int64_t>(off.begin(), off.end())};
}

std::span<const int> SparseGridDesign::levels_at(std::size_t ordinal) const {
  return {levels_.data() + ordinal * dim_, dim_};
}

std::span<const std::int64_t> SparseGridDesign::offsets_at(std::size_t ordinal) const {
  return {offsets_.data() + ordinal * dim_, dim_};
}

std::vector<double> SparseGridDesign::point(std::size_t ordinal) const {
  return label(ordinal).point();
}

std::vector<double> SparseGridDesign::points() const {
  std::vector<double> out(size_ * dim_);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::ldexp(static_cast<double>(offsets_[k]), -levels_[k]);
  return out;
}

std::optional<std::size_t> SparseGridDesign::block_index(std::span<const int> levels) const {
  thread_local std::vector<int> key;
  key.assign(levels.begin(), levels.end());
  auto it = block_of_.find(key);
  if (it == block_of_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> SparseGridDesign::position_of(std::span<const int> levels,
                                                         std::span<const std::int64_t> offsets) const {
  if (levels.size() != dim_ || offsets.size() != dim_) return std::nullopt;
  const auto b = block_index(levels);
  if (!b) return std::nullopt;
  std::size_t within = 0;
  for (std::size_t j = dim_; j-- > 0;) {
    const std::int64_t half = std::int64_t{1} << (levels[j] - 1);
    const std::int64_t o = offsets[j];
    if (o < 1 || o % 2 == 0 || (o - 1) / 2 >= half) return std::nullopt;
    within = within * static_cast<std::size_t>(half) + static_cast<std::size_t>((o - 1) / 2);
  }
  return blocks_[*b].start + within;
}

std::optional<std::size_t> SparseGridDesign::position_of(const MultiIndex& label) const {
  return position_of(std::span<const int>(label.levels), std::span<const std::int64_t>(label.offsets));
}

SparseGridDesign sparse_grid(int level, int dim) { return SparseGridDesign(level, dim); }

std::vector<std::size_t> fg_to_sg_positions(const FullGridDesign& fg, const SparseGridDesign& sg) {
  if (fg.dimension() != sg.dimension()) {
    throw StructuralError("fg_to_sg_positions: dimension mismatch (" + std::to_string(fg.dimension()) +
                          " vs " + std::to_string(sg.dimension()) + ")");
  }
  std::vector<std::size_t> out(fg.size());
  for (std::size_t k = 0; k < fg.size(); ++k) {
    const auto pos = sg.position_of(fg.label(k));
    if (!pos) {
      throw StructuralError("fg_to_sg_positions: full-grid point " + std::to_string(k) +
                            " has no counterpart in the sparse grid");
    }
    out[k] = *pos;
  }
  return out;
}

}  // namespace dtmgp
