#include "voxsel/maxflow.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "voxsel/common.hpp"

namespace voxsel {

MaxFlow::MaxFlow(std::size_t nodes)
    : n_(nodes),
      source_(static_cast<std::uint32_t>(nodes)),
      sink_(static_cast<std::uint32_t>(nodes + 1)) {
  if (nodes + 2 > std::numeric_limits<std::uint32_t>::max()) {
    fail(ErrorCode::InvalidArgument, "graph too large");
  }
}

void MaxFlow::add_terminal(std::size_t node, double source_cap, double sink_cap) {
  if (node >= n_) fail(ErrorCode::InvalidArgument, "terminal edge on unknown node");
  if (!(source_cap >= 0.0) || !(sink_cap >= 0.0)) {
    fail(ErrorCode::InvalidArgument, "capacities must be non-negative");
  }
  const auto u = static_cast<std::uint32_t>(node);
  if (source_cap > 0.0) pending_.push_back({source_, u, source_cap, 0.0});
  if (sink_cap > 0.0) pending_.push_back({u, sink_, sink_cap, 0.0});
}

void MaxFlow::add_edge(std::size_t u, std::size_t v, double cap_uv, double cap_vu) {
  if (u >= n_ || v >= n_ || u == v) fail(ErrorCode::InvalidArgument, "bad edge endpoints");
  if (!(cap_uv >= 0.0) || !(cap_vu >= 0.0)) {
    fail(ErrorCode::InvalidArgument, "capacities must be non-negative");
  }
  if (cap_uv == 0.0 && cap_vu == 0.0) return;
  pending_.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v), cap_uv, cap_vu});
}

void MaxFlow::build() {
  const std::size_t total = n_ + 2;
  std::vector<std::uint32_t> degree(total + 1, 0);
  for (const auto& e : pending_) {
    ++degree[e.u];
    ++degree[e.v];
  }
  start_.assign(total + 1, 0);
  for (std::size_t i = 0; i < total; ++i) start_[i + 1] = start_[i] + degree[i];
  arcs_.assign(start_[total], Arc{0, 0, 0.0});
  std::vector<std::uint32_t> fill(start_.begin(), start_.end() - 1);
  for (const auto& e : pending_) {
    const std::uint32_t a = fill[e.u]++, b = fill[e.v]++;
    arcs_[a] = {e.v, b, e.cap_uv};
    arcs_[b] = {e.u, a, e.cap_vu};
  }
  pending_.clear();
  pending_.shrink_to_fit();
}

bool MaxFlow::bfs() {
  std::fill(level_.begin(), level_.end(), -1);
  std::deque<std::uint32_t> queue{source_};
  level_[source_] = 0;
  while (!queue.empty()) {
    const std::uint32_t u = queue.front();
    queue.pop_front();
    for (std::uint32_t a = start_[u]; a < start_[u + 1]; ++a) {
      const Arc& arc = arcs_[a];
      if (arc.cap > 0.0 && level_[arc.to] < 0) {
        level_[arc.to] = level_[u] + 1;
        queue.push_back(arc.to);
      }
    }
  }
  return level_[sink_] >= 0;
}

double MaxFlow::blocking_flow() {
  double total = 0.0;
  std::copy(start_.begin(), start_.end() - 1, next_.begin());
  std::vector<std::uint32_t> path;
  std::uint32_t u = source_;
  for (;;) {
    if (u == sink_) {
      double f = std::numeric_limits<double>::infinity();
      for (std::uint32_t a : path) f = std::min(f, arcs_[a].cap);
      if (std::isinf(f)) fail(ErrorCode::Infeasible, "infinite-capacity source-sink path");
      std::size_t cut = path.size();
      for (std::size_t k = 0; k < path.size(); ++k) {
        Arc& arc = arcs_[path[k]];
        arc.cap -= f;
        arcs_[arc.rev].cap += f;
        if (arc.cap <= 0.0 && cut == path.size()) cut = k;
      }
      total += f;
      path.resize(cut);
      u = path.empty() ? source_ : arcs_[path.back()].to;
      continue;
    }
    std::uint32_t& it = next_[u];
    while (it < start_[u + 1]) {
      const Arc& arc = arcs_[it];
      if (arc.cap > 0.0 && level_[arc.to] == level_[u] + 1) break;
      ++it;
    }
    if (it == start_[u + 1]) {
      level_[u] = -1;
      if (path.empty()) break;
      const std::uint32_t a = path.back();
      path.pop_back();
      u = arcs_[arcs_[a].rev].to;
      ++next_[u];
      continue;
    }
    path.push_back(it);
    u = arcs_[it].to;
  }
  return total;
}

double MaxFlow::solve() {
  build();
  const std::size_t total = n_ + 2;
  level_.assign(total, -1);
  next_.assign(total, 0);
  double flow = 0.0;
  while (bfs()) flow += blocking_flow();

  source_side_.assign(n_, 0);
  std::vector<std::uint8_t> seen(total, 0);
  std::deque<std::uint32_t> queue{source_};
  seen[source_] = 1;
  while (!queue.empty()) {
    const std::uint32_t u = queue.front();
    queue.pop_front();
    for (std::uint32_t a = start_[u]; a < start_[u + 1]; ++a) {
      const Arc& arc = arcs_[a];
      if (arc.cap > 0.0 && !seen[arc.to]) {
        seen[arc.to] = 1;
        queue.push_back(arc.to);
      }
    }
  }
  for (std::size_t i = 0; i < n_; ++i) source_side_[i] = seen[i];
  return flow;
}

}  // namespace voxsel
