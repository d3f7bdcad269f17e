#include "voxsel/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "voxsel/common.hpp"

namespace voxsel {

namespace {
constexpr std::size_t kLeafSize = 8;
}

KdTree::KdTree(std::vector<double> points, int dims)
    : points_(std::move(points)), dims_(dims), count_(0) {
  if (dims_ < 1) fail(ErrorCode::InvalidArgument, "kd-tree dimension must be positive");
  if (points_.size() % static_cast<std::size_t>(dims_) != 0) {
    fail(ErrorCode::ShapeMismatch, "point buffer is not a multiple of the dimension");
  }
  count_ = points_.size() / static_cast<std::size_t>(dims_);
  order_.resize(count_);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (count_ > 0) build(0, count_);
}

int KdTree::build(std::size_t begin, std::size_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  int axis = 0;
  double widest = -1.0;
  for (int a = 0; a < dims_; ++a) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = begin; i < end; ++i) {
      const double v = point(order_[i])[a];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > widest) {
      widest = hi - lo;
      axis = a;
    }
  }
  if (widest <= 0.0) {  // all points coincide
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) {
                     const double va = point(a)[axis], vb = point(b)[axis];
                     return va < vb || (va == vb && a < b);
                   });
  const double split = point(order_[mid])[axis];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(int id, std::span<const double> q, Hit& best) const {
  const Node& node = nodes_[static_cast<std::size_t>(id)];
  if (node.axis < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const double* p = point(order_[i]);
      double d2 = 0.0;
      for (int a = 0; a < dims_; ++a) {
        const double dv = p[a] - q[a];
        d2 += dv * dv;
      }
      if (d2 < best.squared_distance ||
          (d2 == best.squared_distance && order_[i] < best.index)) {
        best = {order_[i], d2};
      }
    }
    return;
  }
  const double diff = q[static_cast<std::size_t>(node.axis)] - node.split;
  const int near = diff < 0.0 ? node.left : node.right;
  const int far = diff < 0.0 ? node.right : node.left;
  search(near, q, best);
  if (diff * diff <= best.squared_distance) search(far, q, best);
}

KdTree::Hit KdTree::nearest(std::span<const double> query) const {
  if (count_ == 0) fail(ErrorCode::EmptyInput, "nearest neighbour query on an empty set");
  Hit best{0, std::numeric_limits<double>::infinity()};
  search(0, query, best);
  return best;
}

}  // namespace voxsel
