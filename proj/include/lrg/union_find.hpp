#pragma once

#include <numeric>
#include <utility>
#include <vector>

namespace lrg {

/// Disjoint-set forest with union by size and path halving.
class DisjointSet {
 public:
  explicit DisjointSet(int n) : parent_(n), size_(n, 1), n_sets_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  /// Returns true if x and y were in different sets.
  bool unite(int x, int y) {
    x = find(x);
    y = find(y);
    if (x == y) return false;
    if (size_[x] < size_[y]) std::swap(x, y);
    parent_[y] = x;
    size_[x] += size_[y];
    --n_sets_;
    return true;
  }

  int set_size(int x) { return size_[find(x)]; }
  int n_sets() const { return n_sets_; }
  int n_elements() const { return static_cast<int>(parent_.size()); }

  /// Dense labels in [0, n_sets), numbered by each set's smallest member.
  std::vector<int> dense_labels() {
    const int n = n_elements();
    std::vector<int> root_label(n, -1);
    std::vector<int> labels(n);
    int next = 0;
    for (int i = 0; i < n; ++i) {
      const int r = find(i);
      if (root_label[r] < 0) root_label[r] = next++;
      labels[i] = root_label[r];
    }
    return labels;
  }

 private:
  std::vector<int> parent_;
  std::vector<int> size_;
  int n_sets_;
};

}  // namespace lrg
