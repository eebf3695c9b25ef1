#pragma once

// Exact graph edit distance by exhaustive search over partial injections.
// Same cost model as the library: node relabel 1, node ins/del 1, edge
// ins/del 1 per (src, dst, op) triple. Only for very small graphs.

#include <algorithm>
#include <functional>
#include <limits>
#include <set>
#include <tuple>
#include <vector>

#include "provhunt/querykit.hpp"

namespace provhunt::testing {

inline double exact_ged(const AttrGraph& a, const AttrGraph& b) {
  using Key = std::tuple<std::uint32_t, std::uint32_t, EdgeOp>;
  std::set<Key> ea, eb;
  for (const auto& e : a.edges) ea.emplace(e.src, e.dst, e.op);
  for (const auto& e : b.edges) eb.emplace(e.src, e.dst, e.op);
  const std::size_t n = a.nodes.size(), m = b.nodes.size();
  std::vector<int> map(n, -1);
  std::vector<bool> used(m, false);
  double best = std::numeric_limits<double>::infinity();

  auto leaf = [&] {
    double c = 0;
    for (std::size_t u = 0; u < n; ++u) c += map[u] < 0 ? 1 : (a.nodes[u].abs != b.nodes[std::size_t(map[u])].abs);
    c += double(std::count(used.begin(), used.end(), false));
    std::size_t kept = 0;
    for (const auto& [s, t, op] : ea)
      if (map[s] >= 0 && map[t] >= 0 && eb.count({std::uint32_t(map[s]), std::uint32_t(map[t]), op})) ++kept;
    return c + double(ea.size() - kept) + double(eb.size() - kept);
  };
  std::function<void(std::size_t)> rec = [&](std::size_t u) {
    if (u == n) {
      best = std::min(best, leaf());
      return;
    }
    map[u] = -1;
    rec(u + 1);
    for (std::size_t v = 0; v < m; ++v) {
      if (used[v]) continue;
      used[v] = true;
      map[u] = int(v);
      rec(u + 1);
      used[v] = false;
    }
    map[u] = -1;
  };
  rec(0);
  return best;
}

}  // namespace provhunt::testing
