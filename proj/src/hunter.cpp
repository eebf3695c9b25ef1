#include "provhunt/hunter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <spdlog/spdlog.h>

namespace provhunt {

void HuntConfig::validate() const {
  if (!std::isfinite(theta)) throw Error("hunter", "theta must be finite");
  if (k == 0) throw Error("hunter", "k must be >= 1");
  if (max_nodes == 0) throw Error("hunter", "max_nodes must be >= 1");
  if (batch_pairs == 0) throw Error("hunter", "batch_pairs must be >= 1");
  if (stride == 0) throw Error("hunter", "stride must be >= 1");
}

std::size_t HuntReport::flag_count() const {
  return std::size_t(std::count_if(verdicts.begin(), verdicts.end(), [](const HuntVerdict& v) { return v.flagged; }));
}

std::vector<std::string> query_ids(const std::vector<AttrGraph>& queries) {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto id = queries[i].label.value_or("q" + std::to_string(i));
    if (!seen.insert(id).second) throw Error("hunter", "duplicate query id '" + id + "'");
    ids.push_back(std::move(id));
  }
  return ids;
}

namespace {

void sort_verdicts(std::vector<HuntVerdict>& v) {
  std::sort(v.begin(), v.end(), [](const HuntVerdict& a, const HuntVerdict& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.graph_id < b.graph_id;
  });
}

}  // namespace

HuntReport score_graphs(const PpgView& g, const std::vector<ThreatGraph>& graphs, const std::vector<AttrGraph>& queries,
                        const ReprModel& model, const HuntConfig& cfg) {
  cfg.validate();
  if (queries.empty()) throw Error("hunter", "no query graphs");
  HuntReport rep;
  rep.theta = cfg.theta;
  rep.k = cfg.k;
  rep.model_hash = model.hash();
  rep.query_ids = query_ids(queries);

  std::vector<GraphFeatures> qf, tf;
  for (const auto& q : queries) {
    q.validate();
    if (q.empty()) throw Error("hunter", "empty query graph");
    qf.push_back(init_features(q));
  }
  for (const auto& t : graphs) tf.push_back(init_features(t.graph));

  std::vector<PairBatch::Pair> pairs;
  for (const auto& t : tf)
    for (const auto& q : qf) pairs.emplace_back(&t, &q);
  std::vector<double> scores(pairs.size());
  for (std::size_t lo = 0; lo < pairs.size(); lo += cfg.batch_pairs) {
    const auto hi = std::min(pairs.size(), lo + cfg.batch_pairs);
    PairBatch b(model, {pairs.begin() + std::ptrdiff_t(lo), pairs.begin() + std::ptrdiff_t(hi)});
    b.forward();
    for (std::size_t i = lo; i < hi; ++i) scores[i] = b.score(i - lo);
  }

  const auto nq = queries.size();
  for (std::size_t t = 0; t < graphs.size(); ++t) {
    HuntVerdict v;
    const auto& tg = graphs[t];
    for (const auto s : tg.seeds) v.seeds.push_back(g.id(s));
    v.graph_id = "tg:" + (v.seeds.empty() ? std::to_string(t) : v.seeds.front());
    v.scores.assign(scores.begin() + std::ptrdiff_t(t * nq), scores.begin() + std::ptrdiff_t((t + 1) * nq));
    const auto best = std::size_t(std::max_element(v.scores.begin(), v.scores.end()) - v.scores.begin());
    v.score = v.scores[best];
    v.best_query = rep.query_ids[best];
    v.flagged = v.score >= cfg.theta;
    v.nodes = tg.graph.nodes.size();
    v.edges = tg.graph.edges.size();
    v.truncated = tg.truncated;
    for (const auto& p : tg.provenance) v.members.insert(v.members.end(), p.begin(), p.end());
    std::sort(v.members.begin(), v.members.end());
    v.members.erase(std::unique(v.members.begin(), v.members.end()), v.members.end());
    rep.verdicts.push_back(std::move(v));
  }
  sort_verdicts(rep.verdicts);
  spdlog::info("hunter: scored {} graphs x {} queries, {} flagged at theta={}", graphs.size(), nq, rep.flag_count(),
               cfg.theta);
  return rep;
}

HuntReport hunt(const PpgView& g, const PoiSet& pois, const std::vector<AttrGraph>& queries, const ReprModel& model,
                const HuntConfig& cfg) {
  cfg.validate();
  if (queries.empty()) throw Error("hunter", "no query graphs");
  if (pois.empty()) throw Error("hunter", "empty POI set (use exhaustive mode when no indicators are available)");
  return score_graphs(g, sample(g, pois, cfg.sampling()), queries, model, cfg);
}

HuntReport hunt_exhaustive(const PpgView& g, const std::vector<AttrGraph>& queries, const ReprModel& model,
                           const HuntConfig& cfg) {
  cfg.validate();
  std::vector<NodeIndex> procs;
  std::size_t seen = 0;
  for (NodeIndex i = 0; i < g.node_count(); ++i)
    if (g.kind(i) == EntityKind::Process && seen++ % cfg.stride == 0) procs.push_back(i);
  if (cfg.max_pois > 0 && procs.size() > cfg.max_pois) {
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(procs.begin(), procs.end(), rng);
    procs.resize(cfg.max_pois);
    std::sort(procs.begin(), procs.end());
  }
  std::vector<ThreatGraph> graphs;
  graphs.reserve(procs.size());
  for (const auto p : procs) {
    auto one = sample(g, {p}, cfg.sampling());
    for (auto& t : one) graphs.push_back(std::move(t));
  }
  HuntReport rep;
  if (graphs.empty())
    rep.query_ids = query_ids(queries);
  else
    rep = score_graphs(g, graphs, queries, model, cfg);
  rep.theta = cfg.theta;
  rep.k = cfg.k;
  rep.model_hash = model.hash();
  rep.mode = "exhaustive";
  return rep;
}

HuntReport rethreshold(const HuntReport& r, double theta) {
  HuntReport out = r;
  out.theta = theta;
  out.metrics.reset();
  for (auto& v : out.verdicts) v.flagged = v.score >= theta;
  return out;
}

double roc_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw Error("hunter", "roc_auc: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0;
  std::size_t npos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg = (double(i + 1) + double(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t)
      if (positive[order[t]]) {
        rank_sum += avg;
        ++npos;
      }
    i = j;
  }
  const std::size_t nneg = scores.size() - npos;
  if (npos == 0 || nneg == 0) throw Error("hunter", "roc_auc needs both classes");
  return (rank_sum - double(npos) * double(npos + 1) / 2.0) / (double(npos) * double(nneg));
}

HuntMetrics evaluate(const HuntReport& r, const std::map<std::string, bool>& labels) {
  HuntMetrics m;
  std::vector<double> scores;
  std::vector<bool> pos;
  for (const auto& v : r.verdicts) {
    const auto it = labels.find(v.graph_id);
    if (it == labels.end()) throw Error("hunter", "missing label for graph '" + v.graph_id + "'");
    const bool p = it->second;
    const bool f = v.score >= r.theta;
    (p ? (f ? m.tp : m.fn) : (f ? m.fp : m.tn))++;
    scores.push_back(v.score);
    pos.push_back(p);
  }
  const auto npos = m.tp + m.fn, nneg = m.fp + m.tn;
  if (npos) m.recall = double(m.tp) / double(npos);
  if (nneg) m.fpr = double(m.fp) / double(nneg);
  m.accuracy = r.verdicts.empty() ? 0.0 : double(m.tp + m.tn) / double(r.verdicts.size());
  if (npos && nneg) m.auc = roc_auc(scores, pos);
  return m;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json metrics_to_json(const HuntMetrics& m) {
  return {{"tp", m.tp},         {"fp", m.fp},   {"tn", m.tn},           {"fn", m.fn},
          {"recall", opt(m.recall)}, {"fpr", opt(m.fpr)}, {"accuracy", m.accuracy}, {"auc", opt(m.auc)}};
}

nlohmann::json report_to_json(const HuntReport& r) {
  nlohmann::json vs = nlohmann::json::array();
  for (const auto& v : r.verdicts) {
    nlohmann::json scores = nlohmann::json::object();
    for (std::size_t i = 0; i < v.scores.size(); ++i) scores[r.query_ids[i]] = v.scores[i];
    vs.push_back({{"id", v.graph_id},
                  {"best_query", v.best_query},
                  {"score", v.score},
                  {"flagged", v.flagged},
                  {"scores", scores},
                  {"nodes", v.nodes},
                  {"edges", v.edges},
                  {"truncated", v.truncated},
                  {"seeds", v.seeds}});
  }
  return {{"config", {{"theta", r.theta}, {"k", r.k}, {"model_hash", r.model_hash}, {"mode", r.mode},
                      {"queries", r.query_ids}}},
          {"flagged", r.flag_count()},
          {"verdicts", vs},
          {"evaluation", r.metrics ? metrics_to_json(*r.metrics) : nlohmann::json(nullptr)}};
}

HuntReport report_from_json(const nlohmann::json& j) {
  try {
    HuntReport r;
    const auto& c = j.at("config");
    r.theta = c.at("theta").get<double>();
    r.k = c.at("k").get<std::uint32_t>();
    r.model_hash = c.at("model_hash").get<std::string>();
    r.mode = c.at("mode").get<std::string>();
    r.query_ids = c.at("queries").get<std::vector<std::string>>();
    for (const auto& x : j.at("verdicts")) {
      HuntVerdict v;
      v.graph_id = x.at("id").get<std::string>();
      v.best_query = x.at("best_query").get<std::string>();
      v.score = x.at("score").get<double>();
      v.flagged = x.at("flagged").get<bool>();
      for (const auto& q : r.query_ids) v.scores.push_back(x.at("scores").at(q).get<double>());
      v.nodes = x.at("nodes").get<std::size_t>();
      v.edges = x.at("edges").get<std::size_t>();
      v.truncated = x.at("truncated").get<bool>();
      v.seeds = x.at("seeds").get<std::vector<std::string>>();
      r.verdicts.push_back(std::move(v));
    }
    const auto& e = j.at("evaluation");
    if (!e.is_null()) {
      HuntMetrics m;
      m.tp = e.at("tp").get<std::size_t>();
      m.fp = e.at("fp").get<std::size_t>();
      m.tn = e.at("tn").get<std::size_t>();
      m.fn = e.at("fn").get<std::size_t>();
      auto rd = [&](const char* k) { return e.at(k).is_null() ? std::nullopt : std::optional<double>(e.at(k).get<double>()); };
      m.recall = rd("recall");
      m.fpr = rd("fpr");
      m.auc = rd("auc");
      m.accuracy = e.at("accuracy").get<double>();
      r.metrics = m;
    }
    return r;
  } catch (const nlohmann::json::exception& ex) {
    throw Error("hunter", std::string("bad report json: ") + ex.what());
  }
}

}  // namespace provhunt
