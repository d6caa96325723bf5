#include "apce/multi_index.hpp"

#include <limits>
#include <numeric>
#include <stdexcept>

namespace apce {

int degree_of(const MultiIndex& a) {
  return std::accumulate(a.begin(), a.end(), 0);
}

bool graded_lex_precedes(const MultiIndex& a, const MultiIndex& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("multi-index dimensions differ");
  const int da = degree_of(a);
  const int db = degree_of(b);
  if (da != db) return da < db;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j] != b[j]) return a[j] > b[j];
  }
  return false;
}

std::int64_t basis_count(int d, int p) {
  if (d < 1) throw std::invalid_argument("dimension must be >= 1");
  if (p < 0) throw std::invalid_argument("degree must be >= 0");
  // C(d+p, p) by the multiplicative formula, keeping intermediates exact.
  std::int64_t result = 1;
  for (int k = 1; k <= p; ++k) {
    std::int64_t num = d + k;
    std::int64_t g = std::gcd(result, static_cast<std::int64_t>(k));
    std::int64_t r = result / g;
    std::int64_t den = k / g;
    // num/den times r must stay exact; divide num by den's remaining factor.
    if (num % den != 0) throw std::runtime_error("internal binomial error");
    num /= den;
    if (r > std::numeric_limits<std::int64_t>::max() / num)
      throw std::overflow_error("basis_count overflows 64-bit counter");
    result = r * num;
  }
  return result;
}

namespace {

void emit_degree_block(int remaining, int dim, int d, MultiIndex& scratch,
                       std::vector<MultiIndex>& out) {
  if (dim == d - 1) {
    scratch[dim] = remaining;
    out.push_back(scratch);
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    scratch[dim] = e;
    emit_degree_block(remaining - e, dim + 1, d, scratch, out);
  }
}

}  // namespace

MultiIndexSet::MultiIndexSet(int d, int p) : d_(d), p_(p) {
  const std::int64_t n = basis_count(d, p);
  if (n > std::numeric_limits<int>::max())
    throw std::overflow_error("index set too large");
  ordered_.reserve(static_cast<std::size_t>(n));
  MultiIndex scratch(d, 0);
  degree_offsets_.reserve(p + 2);
  for (int g = 0; g <= p; ++g) {
    degree_offsets_.push_back(static_cast<int>(ordered_.size()));
    emit_degree_block(g, 0, d, scratch, ordered_);
  }
  degree_offsets_.push_back(static_cast<int>(ordered_.size()));

  for (int k = 0; k < size(); ++k) position_[ordered_[k]] = k;

  parent_pos_.assign(size(), 0);
  parent_dim_.assign(size(), 0);
  for (int k = 1; k < size(); ++k) {
    MultiIndex parent = ordered_[k];
    int j = 0;
    while (parent[j] == 0) ++j;
    parent[j] -= 1;
    parent_pos_[k] = position_.at(parent);
    parent_dim_[k] = j;
  }
}

bool MultiIndexSet::contains(const MultiIndex& a) const {
  return position_.count(a) > 0;
}

int MultiIndexSet::position_of(const MultiIndex& a) const {
  auto it = position_.find(a);
  if (it == position_.end())
    throw std::out_of_range("multi-index not in set");
  return it->second;
}

}  // namespace apce
