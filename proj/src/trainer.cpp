#include "provhunt/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_set>

#include <spdlog/spdlog.h>
#include <toml.hpp>

#include "provhunt/sampler.hpp"

namespace provhunt {

namespace {

using EdgeKey = std::tuple<std::uint32_t, std::uint32_t, EdgeOp>;

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }
bool coin(std::mt19937_64& rng) { return std::uniform_int_distribution<int>(0, 1)(rng) == 1; }

bool is_process(const AttrGraph& g, std::uint32_t i) { return parent_kind(g.nodes[i].abs) == EntityKind::Process; }

double toml_number(const toml::node& n, const std::string& key) {
  if (auto v = n.value<double>()) return *v;
  throw Error("config", key + " must be a number");
}
std::int64_t toml_int(const toml::node& n, const std::string& key) {
  if (auto v = n.value<std::int64_t>()) return *v;
  throw Error("config", key + " must be an integer");
}

}  // namespace

// ---------------------------------------------------------------------------
// config

void TrainConfig::validate() const {
  if (!(tau > 0)) throw Error("config", "train.tau must be > 0");
  if (!(perturb_ratio > 0 && perturb_ratio < 1)) throw Error("config", "train.perturb_ratio must be in (0, 1)");
  if (epochs < 1) throw Error("config", "train.epochs must be >= 1");
  if (batch < 1) throw Error("config", "train.batch must be >= 1");
  if (!(lr > 0)) throw Error("config", "train.lr must be > 0");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw Error("config", "train.beta1/beta2 must be in [0, 1)");
  if (!(adam_eps > 0)) throw Error("config", "train.adam_eps must be > 0");
  if (corpus_size < 2) throw Error("config", "train.corpus_size must be >= 2");
  if (negatives_per_anchor < 1) throw Error("config", "train.negatives_per_anchor must be >= 1");
  if (min_nodes < 1 || min_nodes > max_nodes) throw Error("config", "train.min_nodes/max_nodes out of order");
  if (hops.empty()) throw Error("config", "train.hops must not be empty");
  for (int h : hops)
    if (h < 1) throw Error("config", "train.hops entries must be >= 1");
  if (seed_attempts_per_graph < 1 || negative_scan < 1) throw Error("config", "train scan bounds must be >= 1");
  model.validate();
}

TrainConfig train_config_from_toml(const std::string& text, TrainConfig cfg) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw Error("config", std::string("train config: ") + std::string(e.description()));
  }
  for (const auto& [section, node] : root) {
    const std::string sec(section.str());
    const auto* table = node.as_table();
    if (!table || (sec != "train" && sec != "model")) throw Error("config", "unknown section '" + sec + "'");
    for (const auto& [k, v] : *table) {
      const std::string key = sec + "." + std::string(k.str());
      if (key == "train.tau") cfg.tau = toml_number(v, key);
      else if (key == "train.epochs") cfg.epochs = int(toml_int(v, key));
      else if (key == "train.batch") cfg.batch = int(toml_int(v, key));
      else if (key == "train.lr") cfg.lr = toml_number(v, key);
      else if (key == "train.beta1") cfg.beta1 = toml_number(v, key);
      else if (key == "train.beta2") cfg.beta2 = toml_number(v, key);
      else if (key == "train.adam_eps") cfg.adam_eps = toml_number(v, key);
      else if (key == "train.perturb_ratio") cfg.perturb_ratio = toml_number(v, key);
      else if (key == "train.corpus_size") cfg.corpus_size = std::size_t(toml_int(v, key));
      else if (key == "train.seed") cfg.seed = std::uint64_t(toml_int(v, key));
      else if (key == "train.negatives_per_anchor") cfg.negatives_per_anchor = int(toml_int(v, key));
      else if (key == "train.min_nodes") cfg.min_nodes = std::uint32_t(toml_int(v, key));
      else if (key == "train.max_nodes") cfg.max_nodes = std::uint32_t(toml_int(v, key));
      else if (key == "train.seed_attempts_per_graph") cfg.seed_attempts_per_graph = std::size_t(toml_int(v, key));
      else if (key == "train.negative_scan") cfg.negative_scan = std::size_t(toml_int(v, key));
      else if (key == "train.hops") {
        const auto* arr = v.as_array();
        if (!arr) throw Error("config", key + " must be an array of integers");
        cfg.hops.clear();
        for (const auto& h : *arr) cfg.hops.push_back(int(toml_int(h, key)));
      } else if (key == "train.precision") {
        const auto s = v.value<std::string>();
        if (s == "float") cfg.precision = Precision::Float;
        else if (s == "double") cfg.precision = Precision::Double;
        else throw Error("config", key + " must be \"float\" or \"double\"");
      } else if (key == "model.dim") cfg.model.dim = int(toml_int(v, key));
      else if (key == "model.layers") cfg.model.layers = int(toml_int(v, key));
      else if (key == "model.gate_degree") cfg.model.gate_degree = int(toml_int(v, key));
      else if (key == "model.seed") cfg.model.seed = std::uint64_t(toml_int(v, key));
      else if (key == "model.inter") {
        const auto b = v.value<bool>();
        if (!b) throw Error("config", key + " must be a boolean");
        cfg.model.inter = *b;
      } else {
        throw Error("config", "unknown key '" + key + "'");
      }
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw Error("config", "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return train_config_from_toml(buf.str(), std::move(base));
}

// ---------------------------------------------------------------------------
// corpus

std::vector<AttrGraph> sample_benign_corpus(const PpgView& g, const TrainConfig& cfg) {
  cfg.validate();
  if (g.node_count() == 0) throw Error("trainer", "empty benign graph");
  std::mt19937_64 rng(cfg.seed);
  // raw balls may shrink when same-name nodes merge, so allow some slack
  const std::size_t raw_cap = std::size_t(cfg.max_nodes) * 4;
  const std::size_t budget = cfg.corpus_size * cfg.seed_attempts_per_graph;
  std::vector<AttrGraph> out;
  out.reserve(cfg.corpus_size);
  std::size_t attempts = 0;
  while (out.size() < cfg.corpus_size) {
    if (attempts++ >= budget)
      throw Error("trainer", "only " + std::to_string(out.size()) + " of " + std::to_string(cfg.corpus_size) +
                                 " corpus graphs found after " + std::to_string(budget) + " seeds");
    const auto seed = NodeIndex(pick(rng, g.node_count()));
    const int hop = cfg.hops[pick(rng, cfg.hops.size())];

    std::unordered_set<NodeIndex> visited{seed};
    std::vector<NodeIndex> frontier{seed};
    bool too_big = false;
    for (int h = 0; h < hop && !frontier.empty() && !too_big; ++h) {
      std::vector<NodeIndex> next;
      for (const auto v : frontier) {
        for (const auto role : {EdgeRole::In, EdgeRole::Out})
          for (const auto& e : g.neighbors(v, role, TimeOrder::TimeAsc))
            if (visited.insert(e.neighbor).second) next.push_back(e.neighbor);
        if (visited.size() > raw_cap) {
          too_big = true;
          break;
        }
      }
      frontier = std::move(next);
    }
    if (too_big || visited.size() < cfg.min_nodes) continue;

    SampledRegion region;
    region.nodes.assign(visited.begin(), visited.end());
    std::sort(region.nodes.begin(), region.nodes.end());
    region.seeds = {seed};
    for (const auto v : region.nodes)
      for (const auto& e : g.neighbors(v, EdgeRole::Out, TimeOrder::TimeAsc))
        if (visited.contains(e.neighbor)) region.edges.push_back({v, e.neighbor, e.op, e.dir, e.ts});
    auto tg = consolidate(g, region);
    const auto n = tg.graph.nodes.size();
    if (n < cfg.min_nodes || n > cfg.max_nodes) continue;
    tg.graph.label = "benign-" + std::to_string(out.size());
    out.push_back(std::move(tg.graph));
  }
  return out;
}

namespace {

void rebuild_without(AttrGraph& g, const std::vector<bool>& drop) {
  std::vector<std::int64_t> remap(g.nodes.size(), -1);
  AttrGraph out;
  out.label = g.label;
  for (std::uint32_t i = 0; i < g.nodes.size(); ++i)
    if (!drop[i]) {
      remap[i] = std::int64_t(out.nodes.size());
      out.nodes.push_back(g.nodes[i]);
    }
  for (const auto& e : g.edges)
    if (remap[e.src] >= 0 && remap[e.dst] >= 0)
      out.edges.push_back({std::uint32_t(remap[e.src]), std::uint32_t(remap[e.dst]), e.op, e.ts});
  g = std::move(out);
}

std::vector<EdgeOp> legal_ops(EntityKind k) {
  std::vector<EdgeOp> out;
  for (auto op : kAllEdgeOps)
    if (op_legal_for(op, k) && op != EdgeOp::Start) out.push_back(op);
  return out;
}

bool perturbable_edge(const AttrGraph& g, const AttrEdge& e) {
  return is_process(g, e.src) && !is_process(g, e.dst);
}

void perturb_edges(AttrGraph& g, double ratio, std::mt19937_64& rng) {
  const auto count = std::size_t(std::llround(ratio * double(g.edges.size())));
  std::set<EdgeKey> present;
  for (const auto& e : g.edges) present.emplace(e.src, e.dst, e.op);
  std::vector<std::uint32_t> procs, targets;
  for (std::uint32_t i = 0; i < g.nodes.size(); ++i) (is_process(g, i) ? procs : targets).push_back(i);

  for (std::size_t step = 0; step < count; ++step) {
    std::vector<std::size_t> removable;
    for (std::size_t i = 0; i < g.edges.size(); ++i)
      if (perturbable_edge(g, g.edges[i])) removable.push_back(i);
    const bool remove = coin(rng);
    if (remove && !removable.empty()) {
      const auto idx = removable[pick(rng, removable.size())];
      present.erase({g.edges[idx].src, g.edges[idx].dst, g.edges[idx].op});
      g.edges.erase(g.edges.begin() + std::ptrdiff_t(idx));
      continue;
    }
    if (procs.empty() || targets.empty()) continue;
    const auto s = procs[pick(rng, procs.size())];
    const auto t = targets[pick(rng, targets.size())];
    auto ops = legal_ops(parent_kind(g.nodes[t].abs));
    std::erase_if(ops, [&](EdgeOp op) { return present.contains({s, t, op}); });
    if (ops.empty()) continue;
    const auto op = ops[pick(rng, ops.size())];
    present.emplace(s, t, op);
    g.edges.push_back({s, t, op, std::nullopt});
  }
}

void remove_nodes(AttrGraph& g, double ratio, std::mt19937_64& rng) {
  std::vector<std::uint32_t> cand;
  for (std::uint32_t i = 0; i < g.nodes.size(); ++i)
    if (!is_process(g, i)) cand.push_back(i);
  std::shuffle(cand.begin(), cand.end(), rng);
  const auto count = std::min(cand.size(), std::size_t(std::llround(ratio * double(g.nodes.size()))));
  std::vector<bool> drop(g.nodes.size(), false);
  for (std::size_t i = 0; i < count; ++i) drop[cand[i]] = true;
  rebuild_without(g, drop);
}

void graft_nodes(AttrGraph& g, const AttrGraph& donor, double ratio, std::mt19937_64& rng) {
  const auto want = std::size_t(std::llround(ratio * double(g.nodes.size())));
  if (want == 0 || donor.nodes.empty()) return;
  // connected chunk of the donor by undirected BFS
  std::vector<std::vector<std::uint32_t>> adj(donor.nodes.size());
  for (const auto& e : donor.edges) {
    adj[e.src].push_back(e.dst);
    adj[e.dst].push_back(e.src);
  }
  const auto start = std::uint32_t(pick(rng, donor.nodes.size()));
  std::vector<std::uint32_t> chunk{start};
  std::vector<bool> seen(donor.nodes.size(), false);
  seen[start] = true;
  for (std::size_t h = 0; h < chunk.size() && chunk.size() < want; ++h)
    for (const auto u : adj[chunk[h]])
      if (!seen[u] && chunk.size() < want) {
        seen[u] = true;
        chunk.push_back(u);
      }
  std::map<std::uint32_t, std::uint32_t> local;
  for (const auto u : chunk) {
    local[u] = std::uint32_t(g.nodes.size());
    g.nodes.push_back(donor.nodes[u]);
  }
  std::set<EdgeKey> present;
  for (const auto& e : g.edges) present.emplace(e.src, e.dst, e.op);
  for (const auto& e : donor.edges) {
    const auto a = local.find(e.src), b = local.find(e.dst);
    if (a == local.end() || b == local.end()) continue;
    if (present.emplace(a->second, b->second, e.op).second) g.edges.push_back({a->second, b->second, e.op, std::nullopt});
  }
  // attach the chunk to one existing node
  const auto base = std::uint32_t(g.nodes.size() - chunk.size());
  std::vector<std::uint32_t> old_procs, new_procs;
  for (std::uint32_t i = 0; i < g.nodes.size(); ++i)
    if (is_process(g, i)) (i < base ? old_procs : new_procs).push_back(i);
  std::uint32_t s, t;
  if (!old_procs.empty()) {
    s = old_procs[pick(rng, old_procs.size())];
    t = base + std::uint32_t(pick(rng, chunk.size()));
  } else if (!new_procs.empty() && base > 0) {
    s = new_procs[pick(rng, new_procs.size())];
    t = std::uint32_t(pick(rng, base));
  } else {
    return;
  }
  auto ops = legal_ops(parent_kind(g.nodes[t].abs));
  std::erase_if(ops, [&](EdgeOp op) { return present.contains({s, t, op}); });
  if (!ops.empty()) g.edges.push_back({s, t, ops[pick(rng, ops.size())], std::nullopt});
}

}  // namespace

AttrGraph augment(const AttrGraph& g, double ratio, std::uint64_t seed, const std::vector<AttrGraph>* donors) {
  g.validate();
  if (ratio <= 0) return g;
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < 8; ++attempt) {
    AttrGraph r = g;
    if (coin(rng)) {
      perturb_edges(r, ratio, rng);
    } else if (coin(rng) || donors == nullptr || donors->empty()) {
      remove_nodes(r, ratio, rng);
    } else {
      graft_nodes(r, (*donors)[pick(rng, donors->size())], ratio, rng);
    }
    if (r.empty()) continue;
    r.normalize_edges();
    return r;
  }
  return g;
}

// ---------------------------------------------------------------------------
// assignment and edit distance

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  // shortest augmenting path Hungarian method with row/column potentials
  const int n = int(cost.rows());
  if (cost.cols() != n) throw Error("trainer", "assignment matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(std::size_t(n) + 1, 0), v(std::size_t(n) + 1, 0), minv(std::size_t(n) + 1);
  std::vector<int> p(std::size_t(n) + 1, 0), way(std::size_t(n) + 1, 0);
  std::vector<char> used(std::size_t(n) + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[std::size_t(j0)] = 1;
      const int i0 = p[std::size_t(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[std::size_t(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[std::size_t(i0)] - v[std::size_t(j)];
        if (cur < minv[std::size_t(j)]) {
          minv[std::size_t(j)] = cur;
          way[std::size_t(j)] = j0;
        }
        if (minv[std::size_t(j)] < delta) {
          delta = minv[std::size_t(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[std::size_t(j)]) {
          u[std::size_t(p[std::size_t(j)])] += delta;
          v[std::size_t(j)] -= delta;
        } else {
          minv[std::size_t(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[std::size_t(j0)] != 0);
    do {
      const int j1 = way[std::size_t(j0)];
      p[std::size_t(j0)] = p[std::size_t(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col(std::size_t(n), -1);
  for (int j = 1; j <= n; ++j)
    if (p[std::size_t(j)] > 0) col[std::size_t(p[std::size_t(j)] - 1)] = j - 1;
  return col;
}

double edit_cost(const AttrGraph& a, const AttrGraph& b, const std::vector<int>& map) {
  if (map.size() != a.nodes.size()) throw Error("trainer", "node map size mismatch");
  double cost = 0;
  std::vector<bool> used(b.nodes.size(), false);
  for (std::size_t u = 0; u < map.size(); ++u) {
    if (map[u] < 0) {
      cost += 1;
      continue;
    }
    const auto v = std::size_t(map[u]);
    if (v >= b.nodes.size() || used[v]) throw Error("trainer", "node map is not injective");
    used[v] = true;
    cost += a.nodes[u].abs != b.nodes[v].abs ? 1 : 0;
  }
  cost += double(std::count(used.begin(), used.end(), false));

  std::set<EdgeKey> eb, ea;
  for (const auto& e : b.edges) eb.emplace(e.src, e.dst, e.op);
  std::size_t matched = 0;
  for (const auto& e : a.edges) {
    if (!ea.emplace(e.src, e.dst, e.op).second) continue;
    if (map[e.src] < 0 || map[e.dst] < 0) continue;
    matched += eb.count({std::uint32_t(map[e.src]), std::uint32_t(map[e.dst]), e.op});
  }
  return cost + double(ea.size() + eb.size() - 2 * matched);
}

double approx_ged(const AttrGraph& a, const AttrGraph& b) {
  const int n = int(a.nodes.size()), m = int(b.nodes.size());
  if (n == 0 && m == 0) return 0;

  // incident-edge signature per node: counts per (op, outgoing?)
  constexpr int kBins = int(kAllEdgeOps.size()) * 2;
  auto signatures = [](const AttrGraph& g) {
    std::set<EdgeKey> uniq;
    std::vector<std::array<int, kBins>> sig(g.nodes.size());
    for (auto& s : sig) s.fill(0);
    for (const auto& e : g.edges) {
      if (!uniq.emplace(e.src, e.dst, e.op).second) continue;
      const int op = int(e.op);
      ++sig[e.src][std::size_t(op * 2 + 1)];
      ++sig[e.dst][std::size_t(op * 2)];
    }
    return sig;
  };
  const auto sa = signatures(a), sb = signatures(b);
  auto total = [](const std::array<int, kBins>& s) { return std::accumulate(s.begin(), s.end(), 0); };

  const double blocked = 1e9;
  // ties between equally cheap assignments go to same-named nodes; the
  // bonus sums to less than the 0.5 cost granularity
  const double tie = 0.1 / double(n + m + 1);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n + m, n + m);
  c.topRightCorner(n, n).setConstant(blocked);
  c.bottomLeftCorner(m, m).setConstant(blocked);
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < m; ++v) {
      int shared = 0;
      for (int k = 0; k < kBins; ++k) shared += std::min(sa[std::size_t(u)][std::size_t(k)], sb[std::size_t(v)][std::size_t(k)]);
      const int mismatch = total(sa[std::size_t(u)]) + total(sb[std::size_t(v)]) - 2 * shared;
      c(u, v) = (a.nodes[std::size_t(u)].abs != b.nodes[std::size_t(v)].abs ? 1.0 : 0.0) + 0.5 * mismatch +
                (a.nodes[std::size_t(u)].name == b.nodes[std::size_t(v)].name ? 0.0 : tie);
    }
    c(u, m + u) = 1.0 + 0.5 * total(sa[std::size_t(u)]);
  }
  for (int v = 0; v < m; ++v) c(n + v, v) = 1.0 + 0.5 * total(sb[std::size_t(v)]);

  const auto col = solve_assignment(c);
  std::vector<int> map(std::size_t(n), -1);
  for (int u = 0; u < n; ++u)
    if (col[std::size_t(u)] < m) map[std::size_t(u)] = col[std::size_t(u)];
  return edit_cost(a, b, map);
}

double ged_threshold(const AttrGraph& a, const AttrGraph& b) {
  auto unique_edges = [](const AttrGraph& g) {
    std::set<EdgeKey> s;
    for (const auto& e : g.edges) s.emplace(e.src, e.dst, e.op);
    return s.size();
  };
  return double(std::min(a.nodes.size() + unique_edges(a), b.nodes.size() + unique_edges(b)));
}

PairSet build_pairs(const std::vector<AttrGraph>& corpus, const TrainConfig& cfg) {
  cfg.validate();
  if (corpus.size() < 2) throw Error("trainer", "need at least two corpus graphs to pair");
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  PairSet out;
  out.positives.reserve(corpus.size());
  for (const auto& g : corpus) out.positives.push_back(augment(g, cfg.perturb_ratio, rng(), &corpus));

  const auto want = std::size_t(cfg.negatives_per_anchor);
  std::size_t relaxed = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::size_t start = pick(rng, corpus.size());
    std::vector<std::size_t> found;
    std::vector<std::pair<double, std::size_t>> scanned;
    std::size_t examined = 0;
    for (std::size_t step = 0; step < corpus.size() && examined < cfg.negative_scan && found.size() < want; ++step) {
      const auto j = (start + step) % corpus.size();
      if (j == i) continue;
      ++examined;
      const double ged = approx_ged(corpus[i], corpus[j]);
      if (ged > ged_threshold(corpus[i], corpus[j])) found.push_back(j);
      else scanned.emplace_back(ged, j);
    }
    const bool relax = found.size() < want;
    if (relax) {
      std::stable_sort(scanned.begin(), scanned.end(), [](auto& x, auto& y) { return x.first > y.first; });
      for (std::size_t k = 0; found.size() < want && k < scanned.size(); ++k) found.push_back(scanned[k].second);
      ++relaxed;
    }
    out.negatives.push_back(std::move(found));
    out.relaxed.push_back(relax);
  }
  if (relaxed > 0)
    spdlog::warn("trainer: {} of {} anchors had no partner above the GED threshold; used max-GED partners", relaxed,
                 corpus.size());
  return out;
}

// ---------------------------------------------------------------------------
// loss

LossValue contrastive_loss(const std::vector<AnchorSims>& sims, double tau) {
  if (sims.empty()) throw Error("trainer", "contrastive loss over an empty batch");
  if (!(tau > 0)) throw Error("trainer", "tau must be > 0");
  LossValue out;
  out.grad.resize(sims.size());
  const double scale = 1.0 / double(sims.size());
  for (std::size_t i = 0; i < sims.size(); ++i) {
    const auto& s = sims[i];
    if (s.neg.empty()) throw Error("trainer", "anchor " + std::to_string(i) + " has no negatives");
    double peak = -std::numeric_limits<double>::infinity();
    for (const double x : s.neg) peak = std::max(peak, x / tau);
    double z = 0;
    for (const double x : s.neg) z += std::exp(x / tau - peak);
    out.loss += scale * (-s.pos / tau + peak + std::log(z));
    auto& g = out.grad[i];
    g.pos = -scale / tau;
    g.neg.resize(s.neg.size());
    for (std::size_t k = 0; k < s.neg.size(); ++k) g.neg[k] = scale / tau * std::exp(s.neg[k] / tau - peak) / z;
  }
  return out;
}

double contrastive_loss(const std::vector<AnchorEmbeddings>& items, double tau) {
  std::vector<AnchorSims> sims;
  sims.reserve(items.size());
  for (const auto& it : items) {
    AnchorSims s;
    s.pos = cosine(it.pos.a, it.pos.b);
    for (const auto& n : it.neg) s.neg.push_back(cosine(n.a, n.b));
    sims.push_back(std::move(s));
  }
  return contrastive_loss(sims, tau).loss;
}

// ---------------------------------------------------------------------------
// training

TrainResult train(const TrainConfig& cfg, const std::vector<AttrGraph>& corpus, const PairSet& pairs,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (corpus.empty()) throw Error("trainer", "empty corpus");
  if (pairs.positives.size() != corpus.size() || pairs.negatives.size() != corpus.size())
    throw Error("trainer", "pair set does not match the corpus");

  TrainResult res{ReprModel::init(cfg.model), {}};
  auto& theta = res.model.parameters();
  std::vector<GraphFeatures> anchors, positives;
  anchors.reserve(corpus.size());
  positives.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    anchors.push_back(init_features(corpus[i]));
    positives.push_back(init_features(pairs.positives[i]));
  }

  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(theta.size()), m2 = m1, grad = m1;
  std::mt19937_64 rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += std::size_t(cfg.batch)) {
      const auto hi = std::min(order.size(), lo + std::size_t(cfg.batch));
      std::vector<PairBatch::Pair> batch_pairs;
      for (std::size_t k = lo; k < hi; ++k) {
        const auto a = order[k];
        if (pairs.negatives[a].empty()) throw Error("trainer", "anchor " + std::to_string(a) + " has no negatives");
        batch_pairs.emplace_back(&anchors[a], &positives[a]);
        for (const auto j : pairs.negatives[a]) batch_pairs.emplace_back(&anchors[a], &anchors[j]);
      }
      PairBatch pb(res.model, batch_pairs, cfg.precision);
      pb.forward();

      std::vector<AnchorSims> sims;
      std::size_t idx = 0;
      for (std::size_t k = lo; k < hi; ++k) {
        AnchorSims s;
        s.pos = pb.score(idx++);
        for (std::size_t j = 0; j < pairs.negatives[order[k]].size(); ++j) s.neg.push_back(pb.score(idx++));
        sims.push_back(std::move(s));
      }
      const auto lv = contrastive_loss(sims, cfg.tau);
      if (!std::isfinite(lv.loss))
        throw Error("trainer", "non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                                   std::to_string(lo) + " (first positive sim " + std::to_string(sims[0].pos) + ")");
      std::vector<double> dscore;
      dscore.reserve(batch_pairs.size());
      for (const auto& g : lv.grad) {
        dscore.push_back(g.pos);
        dscore.insert(dscore.end(), g.neg.begin(), g.neg.end());
      }
      grad.setZero();
      pb.backward(dscore, grad);

      ++step;
      m1 = cfg.beta1 * m1 + (1 - cfg.beta1) * grad;
      m2 = cfg.beta2 * m2 + (1 - cfg.beta2) * grad.cwiseAbs2();
      const double c1 = 1 - std::pow(cfg.beta1, double(step));
      const double c2 = 1 - std::pow(cfg.beta2, double(step));
      theta.array() -= cfg.lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + cfg.adam_eps);
      sum += lv.loss * double(hi - lo);
    }
    res.epoch_loss.push_back(sum / double(order.size()));
    if (on_epoch) on_epoch(epoch, res.epoch_loss.back());
  }
  return res;
}

Separation pair_separation(const ReprModel& m, const std::vector<AttrGraph>& corpus, const PairSet& pairs) {
  std::vector<GraphFeatures> anchors, positives;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    anchors.push_back(init_features(corpus[i]));
    positives.push_back(init_features(pairs.positives.at(i)));
  }
  std::vector<PairBatch::Pair> pos, neg;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    pos.emplace_back(&anchors[i], &positives[i]);
    for (const auto j : pairs.negatives.at(i)) neg.emplace_back(&anchors[i], &anchors[j]);
  }
  auto mean_score = [&](const std::vector<PairBatch::Pair>& ps) {
    if (ps.empty()) return 0.0;
    double s = 0;
    for (std::size_t lo = 0; lo < ps.size(); lo += 64) {
      PairBatch b(m, {ps.begin() + std::ptrdiff_t(lo), ps.begin() + std::ptrdiff_t(std::min(ps.size(), lo + 64))});
      b.forward();
      for (std::size_t k = 0; k < b.size(); ++k) s += b.score(k);
    }
    return s / double(ps.size());
  };
  return {mean_score(pos), mean_score(neg)};
}

}  // namespace provhunt
