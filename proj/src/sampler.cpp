#include "provhunt/sampler.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include <spdlog/spdlog.h>

namespace provhunt {

namespace {

bool is_netio(EdgeOp op) { return op == EdgeOp::Send || op == EdgeOp::Recv; }
bool is_alteration(EdgeOp op) {
  return op == EdgeOp::Modify || op == EdgeOp::Write || op == EdgeOp::Link || op == EdgeOp::Rename;
}

auto edge_key(const DecodedEdge& e) { return std::tie(e.sbj, e.obj, e.op, e.dir, e.ts); }

struct EdgeLess {
  bool operator()(const DecodedEdge& a, const DecodedEdge& b) const { return edge_key(a) < edge_key(b); }
};

struct Expansion {
  std::vector<NodeIndex> visited;  // insertion order
  std::vector<DecodedEdge> edges;
  bool truncated = false;
};

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

Expansion expand(const PpgView& g, NodeIndex poi, const std::unordered_set<NodeIndex>& poi_set,
                 const SamplingConfig& cfg) {
  Expansion out;
  std::unordered_set<NodeIndex> visited{poi};
  out.visited.push_back(poi);
  std::vector<std::pair<NodeIndex, std::uint32_t>> queue{{poi, 0}};

  for (std::size_t head = 0; head < queue.size(); ++head) {
    const auto [v, depth] = queue[head];
    const RuleNodeView vv{g.abs(v), g.exp(v)};

    // Candidate neighbors: incoming edges newest first, then outgoing oldest first.
    std::vector<NodeIndex> candidates;
    std::unordered_map<NodeIndex, bool> fork_link;
    for (const auto role : {EdgeRole::In, EdgeRole::Out}) {
      const auto order = role == EdgeRole::In ? TimeOrder::TimeDesc : TimeOrder::TimeAsc;
      for (const auto& e : g.neighbors(v, role, order)) {
        auto& forked = fork_link[e.neighbor];
        forked = forked || e.op == EdgeOp::Fork;
        if (!rule_allows(vv, {g.abs(e.neighbor), g.exp(e.neighbor)}, e.op)) continue;
        const NodeIndex sbj = role == EdgeRole::Out ? v : e.neighbor;
        const NodeIndex obj = role == EdgeRole::Out ? e.neighbor : v;
        out.edges.push_back({sbj, obj, e.op, e.dir, e.ts});
        if (std::find(candidates.begin(), candidates.end(), e.neighbor) == candidates.end())
          candidates.push_back(e.neighbor);
      }
    }

    for (const auto u : candidates) {
      if (visited.contains(u)) continue;
      if (visited.size() >= cfg.max_nodes) {
        out.truncated = true;
        break;
      }
      visited.insert(u);
      out.visited.push_back(u);
      if (poi_set.contains(u)) {
        queue.emplace_back(u, 0);
      } else if (fork_link[u]) {
        queue.emplace_back(u, depth);  // fork edges do not consume a hop
      } else if (depth + 1 < cfg.k) {
        queue.emplace_back(u, depth + 1);
      }
    }
    if (out.truncated) break;
  }
  // Edges discovered before truncation may point at nodes never admitted.
  if (out.truncated) {
    std::erase_if(out.edges, [&](const DecodedEdge& e) { return !visited.contains(e.sbj) || !visited.contains(e.obj); });
  }
  return out;
}

}  // namespace

std::optional<RuleId> rule_allows(RuleNodeView v, RuleNodeView u, EdgeOp op) {
  const auto vk = parent_kind(v.abs);
  const auto uk = parent_kind(u.abs);
  switch (vk) {
    case EntityKind::Process:
      if (v.exp) {
        if (is_netio(op) && uk == EntityKind::Netflow && v.abs != AbsType::WebProcess) return RuleId::R1;
        if (is_alteration(op) && (u.abs == AbsType::SysFile || u.abs == AbsType::LibFile)) return RuleId::R5;
        if (op == EdgeOp::Modify && (u.abs == AbsType::SysProcess || u.abs == AbsType::ServProcess))
          return RuleId::R6;
        if (u.abs == AbsType::CfgFile) return RuleId::R7;
        return std::nullopt;
      }
      if (is_netio(op) && uk == EntityKind::Netflow) return RuleId::R2;
      if (uk != EntityKind::Process && u.abs != AbsType::UnknownFile) return RuleId::R3;
      if (uk == EntityKind::Process) return RuleId::R4;
      return std::nullopt;
    case EntityKind::File:
      if (uk != EntityKind::Process) return std::nullopt;
      if (v.exp) {
        const bool sensitive = v.abs == AbsType::SysFile || v.abs == AbsType::LibFile || v.abs == AbsType::CfgFile;
        if (sensitive && is_alteration(op)) return RuleId::R8;
        return std::nullopt;
      }
      return RuleId::R9;
    case EntityKind::Netflow:
      if (is_netio(op) && uk == EntityKind::Process) return RuleId::R10;
      return std::nullopt;
  }
  return std::nullopt;
}

void SamplingConfig::validate() const {
  if (k < 1) throw Error("sampler", "k must be >= 1");
  if (max_nodes < 1) throw Error("sampler", "max_nodes must be >= 1");
}

std::vector<SampledRegion> sample_regions(const PpgView& g, const PoiSet& pois, const SamplingConfig& cfg) {
  cfg.validate();
  if (pois.empty()) throw Error("sampler", "empty POI set");
  for (const auto p : pois)
    if (p >= g.node_count()) throw Error("sampler", "unknown POI index " + std::to_string(p));

  std::vector<NodeIndex> seeds(pois.begin(), pois.end());
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  const std::unordered_set<NodeIndex> poi_set(seeds.begin(), seeds.end());

  std::vector<Expansion> parts;
  parts.reserve(seeds.size());
  for (const auto poi : seeds) parts.push_back(expand(g, poi, poi_set, cfg));

  // Merge subgraphs with overlapping nodes.
  DisjointSets sets(parts.size());
  std::unordered_map<NodeIndex, std::size_t> owner;
  for (std::size_t i = 0; i < parts.size(); ++i)
    for (const auto n : parts[i].visited) {
      auto [it, fresh] = owner.try_emplace(n, i);
      if (!fresh) sets.unite(it->second, i);
    }

  std::map<std::size_t, SampledRegion> grouped;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    auto& r = grouped[sets.find(i)];
    r.nodes.insert(r.nodes.end(), parts[i].visited.begin(), parts[i].visited.end());
    r.edges.insert(r.edges.end(), parts[i].edges.begin(), parts[i].edges.end());
    r.seeds.push_back(seeds[i]);
    r.truncated = r.truncated || parts[i].truncated;
  }

  std::vector<SampledRegion> out;
  out.reserve(grouped.size());
  for (auto& [root, r] : grouped) {
    std::sort(r.nodes.begin(), r.nodes.end());
    r.nodes.erase(std::unique(r.nodes.begin(), r.nodes.end()), r.nodes.end());
    std::sort(r.edges.begin(), r.edges.end(), EdgeLess{});
    r.edges.erase(std::unique(r.edges.begin(), r.edges.end()), r.edges.end());
    std::sort(r.seeds.begin(), r.seeds.end());
    if (r.truncated) spdlog::warn("sampler: region seeded at node {} hit the max_nodes cap ({})", r.seeds.front(), cfg.max_nodes);
    out.push_back(std::move(r));
  }
  return out;
}

ThreatGraph consolidate(const PpgView& g, const SampledRegion& region) {
  ThreatGraph tg;
  tg.seeds = region.seeds;
  tg.truncated = region.truncated;
  std::map<std::pair<std::string, AbsType>, std::uint32_t> by_key;
  std::unordered_map<NodeIndex, std::uint32_t> local;
  for (const auto n : region.nodes) {
    const auto abs = g.abs(n);
    auto key = std::make_pair(normalized_name(parent_kind(abs), g.name(n)), abs);
    auto [it, fresh] = by_key.try_emplace(std::move(key), static_cast<std::uint32_t>(tg.graph.nodes.size()));
    if (fresh) {
      tg.graph.nodes.push_back({g.name(n), abs});
      tg.provenance.emplace_back();
    }
    tg.provenance[it->second].push_back(n);
    local.emplace(n, it->second);
  }
  for (const auto& e : region.edges)
    tg.graph.edges.push_back({local.at(e.sbj), local.at(e.obj), e.op, e.ts});
  tg.graph.normalize_edges();
  return tg;
}

std::vector<ThreatGraph> sample(const PpgView& g, const PoiSet& pois, const SamplingConfig& cfg) {
  std::vector<ThreatGraph> out;
  for (const auto& r : sample_regions(g, pois, cfg)) out.push_back(consolidate(g, r));
  return out;
}

CoverageNoise coverage_noise(const AttrGraph& tg, const AttrGraph& qg) {
  if (qg.nodes.empty()) throw Error("sampler", "coverage_noise: empty query graph");
  using NodeKey = std::pair<std::string, AbsType>;
  auto node_keys = [](const AttrGraph& g) {
    std::vector<NodeKey> keys;
    keys.reserve(g.nodes.size());
    for (std::uint32_t i = 0; i < g.nodes.size(); ++i) keys.emplace_back(g.key_name(i), g.nodes[i].abs);
    return keys;
  };
  auto edge_set = [](const AttrGraph& g, const std::vector<NodeKey>& keys) {
    std::set<std::tuple<NodeKey, NodeKey, EdgeOp>> s;
    for (const auto& e : g.edges) s.emplace(keys[e.src], keys[e.dst], e.op);
    return s;
  };
  const auto tk = node_keys(tg);
  const auto qk = node_keys(qg);
  const std::set<NodeKey> tn(tk.begin(), tk.end());
  const std::set<NodeKey> qn(qk.begin(), qk.end());
  const auto te = edge_set(tg, tk);
  const auto qe = edge_set(qg, qk);

  auto ratios = [](const auto& sampled, const auto& query, double& cr, double& nr) {
    std::size_t common = 0;
    for (const auto& x : sampled) common += query.count(x);
    cr = query.empty() ? 1.0 : double(common) / double(query.size());
    nr = sampled.empty() ? 0.0 : double(sampled.size() - common) / double(sampled.size());
  };
  CoverageNoise out;
  ratios(tn, qn, out.node_cr, out.node_nr);
  ratios(te, qe, out.edge_cr, out.edge_nr);
  return out;
}

}  // namespace provhunt
