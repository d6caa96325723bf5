#pragma once

#include <cstdint>
#include <map>
#include <vector>

namespace apce {

/// Exponent tuple of a multivariate monomial; entry k is the power of x_k.
using MultiIndex = std::vector<int>;

int degree_of(const MultiIndex& a);

/// Strict total order used everywhere: lower total degree first; within a
/// degree block, a comes before b when the first nonzero entry of a - b is
/// positive (so (1,0) precedes (0,1)).
bool graded_lex_precedes(const MultiIndex& a, const MultiIndex& b);

/// C(d+p, p). Throws std::overflow_error instead of wrapping.
std::int64_t basis_count(int d, int p);

/// All multi-indices with |a| <= p in graded lexicographic order, plus the
/// inverse map from index to position.
class MultiIndexSet {
 public:
  /// Empty placeholder; real sets come from the (d, p) constructor.
  MultiIndexSet() = default;
  MultiIndexSet(int d, int p);

  int dimension() const { return d_; }
  int max_degree() const { return p_; }
  int size() const { return static_cast<int>(ordered_.size()); }

  const MultiIndex& at(int k) const { return ordered_[k]; }
  const std::vector<MultiIndex>& ordered() const { return ordered_; }

  bool contains(const MultiIndex& a) const;
  int position_of(const MultiIndex& a) const;

  /// degree_offsets()[g] is the position of the first index of total degree
  /// g; a final sentinel equals size(). Marks the block boundaries between
  /// polynomial orders.
  const std::vector<int>& degree_offsets() const { return degree_offsets_; }

  // Every index k > 0 factors as ordered[parent_position(k)] plus one unit
  // in parent_dimension(k); used for O(N) monomial evaluation.
  int parent_position(int k) const { return parent_pos_[k]; }
  int parent_dimension(int k) const { return parent_dim_[k]; }

 private:
  int d_ = 0;
  int p_ = 0;
  std::vector<MultiIndex> ordered_;
  std::map<MultiIndex, int> position_;
  std::vector<int> degree_offsets_;
  std::vector<int> parent_pos_;
  std::vector<int> parent_dim_;
};

}  // namespace apce
