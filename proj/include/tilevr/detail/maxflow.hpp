#pragma once

// Small dense-ish Dinic max-flow on real capacities. Graphs here have a few
// dozen nodes (tiles + FoVs), so simplicity wins over asymptotics.

#include <algorithm>
#include <limits>
#include <queue>
#include <vector>

namespace tilevr::detail {

class MaxFlow {
 public:
  explicit MaxFlow(int nodes) : adj_(static_cast<std::size_t>(nodes)), level_(adj_.size()), it_(adj_.size()) {}

  void add_edge(int from, int to, double cap) {
    adj_[static_cast<std::size_t>(from)].push_back({to, static_cast<int>(adj_[static_cast<std::size_t>(to)].size()), cap});
    adj_[static_cast<std::size_t>(to)].push_back({from, static_cast<int>(adj_[static_cast<std::size_t>(from)].size()) - 1, 0.0});
  }

  double run(int s, int t) {
    double flow = 0.0;
    while (bfs(s, t)) {
      std::fill(it_.begin(), it_.end(), 0);
      while (true) {
        double f = dfs(s, t, std::numeric_limits<double>::infinity());
        if (f <= kEps) break;
        flow += f;
      }
    }
    return flow;
  }

  /// Nodes reachable from `s` in the residual graph after run().
  std::vector<bool> source_side(int s) const {
    std::vector<bool> seen(adj_.size(), false);
    std::vector<int> stack{s};
    seen[static_cast<std::size_t>(s)] = true;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (const auto& e : adj_[static_cast<std::size_t>(v)]) {
        if (e.cap > kEps && !seen[static_cast<std::size_t>(e.to)]) {
          seen[static_cast<std::size_t>(e.to)] = true;
          stack.push_back(e.to);
        }
      }
    }
    return seen;
  }

 private:
  static constexpr double kEps = 1e-13;

  struct Edge {
    int to;
    int rev;
    double cap;
  };

  bool bfs(int s, int t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<int> q;
    level_[static_cast<std::size_t>(s)] = 0;
    q.push(s);
    while (!q.empty()) {
      int v = q.front();
      q.pop();
      for (const auto& e : adj_[static_cast<std::size_t>(v)]) {
        if (e.cap > kEps && level_[static_cast<std::size_t>(e.to)] < 0) {
          level_[static_cast<std::size_t>(e.to)] = level_[static_cast<std::size_t>(v)] + 1;
          q.push(e.to);
        }
      }
    }
    return level_[static_cast<std::size_t>(t)] >= 0;
  }

  double dfs(int v, int t, double pushed) {
    if (v == t) return pushed;
    auto& edges = adj_[static_cast<std::size_t>(v)];
    for (int& i = it_[static_cast<std::size_t>(v)]; i < static_cast<int>(edges.size()); ++i) {
      Edge& e = edges[static_cast<std::size_t>(i)];
      if (e.cap <= kEps || level_[static_cast<std::size_t>(e.to)] != level_[static_cast<std::size_t>(v)] + 1) continue;
      double f = dfs(e.to, t, std::min(pushed, e.cap));
      if (f > kEps) {
        e.cap -= f;
        adj_[static_cast<std::size_t>(e.to)][static_cast<std::size_t>(e.rev)].cap += f;
        return f;
      }
    }
    return 0.0;
  }

  std::vector<std::vector<Edge>> adj_;
  std::vector<int> level_;
  std::vector<int> it_;
};

}  // namespace tilevr::detail
