#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace voxsel {

// Exact nearest-neighbour search over a fixed point set of any dimension.
class KdTree {
 public:
  KdTree(std::vector<double> points, int dims);

  struct Hit {
    std::size_t index = 0;
    double squared_distance = 0.0;
  };

  // Requires a non-empty point set.
  Hit nearest(std::span<const double> query) const;
  std::size_t size() const { return count_; }

 private:
  struct Node {
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    std::size_t begin = 0, end = 0;  // leaf range into order_
    int left = -1, right = -1;
  };

  int build(std::size_t begin, std::size_t end);
  void search(int node, std::span<const double> q, Hit& best) const;
  const double* point(std::size_t i) const { return points_.data() + i * dims_; }

  std::vector<double> points_;
  int dims_;
  std::size_t count_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace voxsel
