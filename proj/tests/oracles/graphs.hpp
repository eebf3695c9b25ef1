#pragma once

// Random attributed graphs and relabeling helpers.

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "provhunt/querykit.hpp"

namespace provhunt::testing {

/// Random legal-looking graph: process sources, edges to any node, ops drawn
/// from those legal for the target kind.
inline AttrGraph random_graph(std::mt19937_64& rng, std::uint32_t n, double density) {
  AttrGraph g;
  std::uniform_int_distribution<int> type(0, int(kAbsTypeCount) - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (std::uint32_t i = 0; i < n; ++i) {
    // first node always a process so there is a source
    const auto t = i == 0 ? AbsType::UtilProcess : abs_from_code(std::uint8_t(type(rng)));
    g.nodes.push_back({"n" + std::to_string(i), t});
  }
  std::set<std::tuple<std::uint32_t, std::uint32_t, EdgeOp>> seen;
  for (std::uint32_t s = 0; s < n; ++s) {
    if (parent_kind(g.nodes[s].abs) != EntityKind::Process) continue;
    for (std::uint32_t t = 0; t < n; ++t) {
      if (s == t || coin(rng) > density) continue;
      std::vector<EdgeOp> legal;
      for (auto op : kAllEdgeOps)
        if (op_legal_for(op, parent_kind(g.nodes[t].abs))) legal.push_back(op);
      const auto op = legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)];
      if (seen.emplace(s, t, op).second) g.edges.push_back({s, t, op, std::nullopt});
    }
  }
  g.normalize_edges();
  return g;
}

inline std::vector<std::uint32_t> random_permutation(std::mt19937_64& rng, std::uint32_t n) {
  std::vector<std::uint32_t> p(n);
  std::iota(p.begin(), p.end(), 0u);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

/// Node i of g becomes node perm[i] of the result.
inline AttrGraph permute(const AttrGraph& g, const std::vector<std::uint32_t>& perm) {
  AttrGraph out;
  out.nodes.resize(g.nodes.size());
  for (std::uint32_t i = 0; i < g.nodes.size(); ++i) out.nodes[perm[i]] = g.nodes[i];
  for (const auto& e : g.edges) out.edges.push_back({perm[e.src], perm[e.dst], e.op, e.ts});
  out.normalize_edges();
  return out;
}

}  // namespace provhunt::testing
