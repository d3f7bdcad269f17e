#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace voxsel {

// s-t max-flow by Dinic's algorithm (BFS level graph, blocking flow by
// iterative DFS). Capacities may be +infinity.
class MaxFlow {
 public:
  explicit MaxFlow(std::size_t nodes);

  std::size_t node_count() const { return n_; }
  // Capacities of source->node and node->sink; repeated calls accumulate.
  void add_terminal(std::size_t node, double source_cap, double sink_cap);
  void add_edge(std::size_t u, std::size_t v, double cap_uv, double cap_vu);

  double solve();
  // After solve(): true when the node is reachable from the source in the residual graph.
  bool source_side(std::size_t node) const { return source_side_[node] != 0; }

 private:
  struct Arc {
    std::uint32_t to;
    std::uint32_t rev;
    double cap;
  };
  struct PendingEdge {
    std::uint32_t u, v;
    double cap_uv, cap_vu;
  };

  void build();
  bool bfs();
  double blocking_flow();

  std::size_t n_;
  std::uint32_t source_, sink_;
  std::vector<PendingEdge> pending_;
  std::vector<std::uint32_t> start_;
  std::vector<Arc> arcs_;
  std::vector<int> level_;
  std::vector<std::uint32_t> next_;
  std::vector<std::uint8_t> source_side_;
};

}  // namespace voxsel
