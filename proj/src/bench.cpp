#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <spdlog/spdlog.h>

#include "provhunt/bench.hpp"

namespace provhunt {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::size_t string_heap(const std::string& s) {
  // libstdc++ keeps up to 15 chars inline
  return s.capacity() > 15 ? s.capacity() + 1 : 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// NaiveStore

void NaiveStore::add(const AuditEvent& e) {
  auto node = [&](const std::string& id, const std::string& name, EntityKind kind) {
    auto [it, fresh] = index_.try_emplace(id, nodes_.size());
    if (fresh) nodes_.push_back({id, name, kind, {}, {}});
    return it->second;
  };
  const auto s = node(e.sbj_id, e.sbj_name, EntityKind::Process);
  const auto o = node(e.obj_id, e.obj_name, e.obj_kind);
  nodes_[s].out.push_back({o, e.ts, e.op, e.dir});
  nodes_[o].in.push_back(s);
  ++edges_;
}

std::size_t NaiveStore::bytes() const {
  std::size_t b = sizeof(*this) + nodes_.capacity() * sizeof(Node);
  for (const auto& n : nodes_) {
    b += string_heap(n.id) + string_heap(n.name);
    b += n.out.capacity() * sizeof(Edge) + n.in.capacity() * sizeof(std::uint64_t);
  }
  // red-black tree node: three pointers, colour word, key and value
  for (const auto& [id, idx] : index_) b += 4 * sizeof(void*) + sizeof(std::string) + sizeof(idx) + string_heap(id);
  return b;
}

// ---------------------------------------------------------------------------
// benches

MemoryBench bench_memory(const std::vector<AuditEvent>& raw_events) {
  MemoryBench m;
  m.raw_events = raw_events.size();
  DedupStats stats;
  const auto events = deduplicate(raw_events, stats);
  m.events = events.size();
  const auto ppg = build_ppg(events);
  NaiveStore naive;
  for (const auto& e : events) naive.add(e);
  const auto rep = ppg.memory_report();
  m.ppg_bytes = rep.total_bytes;
  m.naive_bytes = naive.bytes();
  m.ppg_edges = rep.edge_count;
  m.naive_edges = naive.edge_count();
  m.name_table_bytes = rep.name_table_bytes;
  m.id_map_bytes = rep.id_map_bytes;
  m.nodes = rep.node_count;
  m.exp_nodes = rep.exp_node_count;
  m.reduction_pct = events.empty() ? 0.0 : 100.0 * (1.0 - double(m.ppg_bytes) / double(m.naive_bytes));
  return m;
}

namespace {

ScenarioSpec scaled_benign(std::size_t events, std::uint64_t seed) {
  ScenarioSpec s;
  s.seed = seed;
  s.target_events = events;
  s.campaigns.clear();
  s.inject_at.clear();
  // keep the degree profile: launches and time span grow with the stream
  s.process_budget = std::max<std::size_t>(1, events / 48);
  s.duration_ms = std::max<std::int64_t>(3'600'000, std::int64_t(events) * 1800);
  return s;
}

}  // namespace

ScalingBench bench_construction(std::size_t small_events, std::uint64_t seed) {
  ScalingBench r;
  const auto small = generate_scenario(scaled_benign(small_events, seed)).events;
  const auto large = generate_scenario(scaled_benign(2 * small_events, seed)).events;
  r.small_events = small.size();
  r.large_events = large.size();
  auto best = [](const std::vector<AuditEvent>& evs) {
    double t = 1e30;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = Clock::now();
      const auto g = build_ppg(evs);
      t = std::min(t, seconds_since(t0));
      if (g.edge_count() != evs.size()) throw Error("bench", "construction lost edges");
    }
    return t;
  };
  r.small_seconds = best(small);
  r.large_seconds = best(large);
  r.ratio = r.large_seconds / std::max(r.small_seconds, 1e-9);
  return r;
}

AttrGraph union_graph(const std::vector<ThreatGraph>& graphs) {
  AttrGraph u;
  for (const auto& t : graphs) {
    const auto base = std::uint32_t(u.nodes.size());
    u.nodes.insert(u.nodes.end(), t.graph.nodes.begin(), t.graph.nodes.end());
    for (const auto& e : t.graph.edges) u.edges.push_back({e.src + base, e.dst + base, e.op, e.ts});
  }
  u.normalize_edges();
  return u;
}

std::vector<SamplingRow> bench_sampling(const PpgView& g, const std::vector<AuditEvent>& events,
                                        const std::vector<CampaignTruth>& campaigns,
                                        const std::vector<std::uint32_t>& ks) {
  std::vector<SamplingRow> rows;
  for (const auto& c : campaigns) {
    const auto pois = resolve_pois(g, match_pois(events, c.iocs).subject_ids);
    for (const auto k : ks) {
      SamplingRow r;
      r.campaign = c.name;
      r.k = k;
      r.pois = pois.size();
      if (!pois.empty()) {
        const auto graphs = sample(g, pois, {k, 5000});
        const auto u = union_graph(graphs);
        r.graphs = graphs.size();
        r.nodes = u.nodes.size();
        r.cn = coverage_noise(u, c.query);
      }
      rows.push_back(r);
    }
  }
  return rows;
}

std::map<std::string, bool> label_verdicts(const PpgView& g, const HuntReport& r,
                                           const std::vector<CampaignTruth>& campaigns) {
  std::set<std::string> attack;
  for (const auto& c : campaigns) attack.insert(c.attack_only.begin(), c.attack_only.end());
  std::map<std::string, bool> out;
  for (const auto& v : r.verdicts) {
    bool hit = false;
    for (const auto m : v.members) hit = hit || attack.contains(g.id(m));
    out[v.graph_id] = hit;
  }
  return out;
}

std::map<std::string, GraphTruth> classify_verdicts(const PpgView& g, const HuntReport& r,
                                                    const std::vector<CampaignTruth>& campaigns) {
  std::set<std::string> attack;
  for (const auto& c : campaigns) attack.insert(c.attack_only.begin(), c.attack_only.end());
  std::map<std::string, GraphTruth> out;
  for (const auto& v : r.verdicts) {
    bool seed = false, member = false;
    for (const auto& s : v.seeds) seed = seed || attack.contains(s);
    for (const auto m : v.members) member = member || attack.contains(g.id(m));
    out[v.graph_id] = seed ? GraphTruth::Attack : member ? GraphTruth::Mixed : GraphTruth::Benign;
  }
  return out;
}

double percentile(std::vector<double> v, double p) {
  if (v.empty()) throw Error("bench", "percentile of an empty sample");
  std::sort(v.begin(), v.end());
  const auto rank = std::size_t(std::ceil(p / 100.0 * double(v.size())));
  return v[std::min(v.size() - 1, rank == 0 ? 0 : rank - 1)];
}

HuntBench bench_hunt(const HuntBenchConfig& cfg, const ReprModel* pretrained) {
  const auto t0 = Clock::now();
  HuntBench out;
  const auto range = generate_scenario(cfg.range);
  auto benign_spec = cfg.benign;
  benign_spec.campaigns.clear();
  benign_spec.inject_at.clear();
  const auto benign = generate_scenario(benign_spec);

  DedupStats st;
  const auto range_events = deduplicate(range.events, st, cfg.window_ms);
  const auto benign_events = deduplicate(benign.events, st, cfg.window_ms);
  const auto range_ppg = build_ppg(range_events);
  const auto benign_ppg = build_ppg(benign_events);
  const auto rg = range_ppg.snapshot();

  ReprModel model;
  if (pretrained) {
    model = *pretrained;
  } else {
    const auto t1 = Clock::now();
    const auto corpus = sample_benign_corpus(benign_ppg.snapshot(), cfg.train);
    const auto pairs = build_pairs(corpus, cfg.train);
    out.corpus_size = corpus.size();
    out.relaxed_pairs = std::size_t(std::count(pairs.relaxed.begin(), pairs.relaxed.end(), true));
    auto res = train(cfg.train, corpus, pairs, [](int epoch, double loss) {
      spdlog::info("trainer: epoch {} loss {:.5f}", epoch, loss);
    });
    model = std::move(res.model);
    out.epoch_loss = std::move(res.epoch_loss);
    out.separation = pair_separation(model, corpus, pairs);
    out.train_seconds = seconds_since(t1);
  }
  out.model_hash = model.hash();

  std::vector<AttrGraph> queries;
  for (const auto& c : range.campaigns) queries.push_back(c.query);

  // one hunt per campaign, seeded by that campaign's indicators
  out.poi_report.theta = cfg.hunt.theta;
  out.poi_report.k = cfg.hunt.k;
  out.poi_report.model_hash = model.hash();
  out.poi_report.query_ids = query_ids(queries);
  std::map<std::string, bool> poi_labels;
  for (const auto& c : range.campaigns) {
    const auto pois = resolve_pois(rg, match_pois(range_events, c.iocs).subject_ids);
    out.campaign_detected[c.name] = false;
    if (pois.empty()) {
      spdlog::warn("bench: no POI matched for campaign {}", c.name);
      continue;
    }
    auto rep = hunt(rg, pois, queries, model, cfg.hunt);
    const auto labels = label_verdicts(rg, rep, {c});
    for (auto& v : rep.verdicts) {
      const bool atk = labels.at(v.graph_id);
      if (atk && v.flagged) out.campaign_detected[c.name] = true;
      v.graph_id = c.name + "/" + v.graph_id;
      poi_labels[v.graph_id] = atk;
      out.poi_report.verdicts.push_back(std::move(v));
    }
  }
  std::stable_sort(out.poi_report.verdicts.begin(), out.poi_report.verdicts.end(),
                   [](const HuntVerdict& a, const HuntVerdict& b) { return a.score > b.score; });
  if (!out.poi_report.verdicts.empty()) out.poi_report.metrics = evaluate(out.poi_report, poi_labels);

  out.combined = out.poi_report;
  out.combined.mode = "combined";
  out.combined.verdicts.clear();
  for (auto v : out.poi_report.verdicts) {
    out.combined_labels["poi/" + v.graph_id] = poi_labels.at(v.graph_id);
    v.graph_id = "poi/" + v.graph_id;
    out.combined.verdicts.push_back(std::move(v));
  }

  if (cfg.exhaustive) {
    out.exhaustive_report = hunt_exhaustive(rg, queries, model, cfg.hunt);
    out.exhaustive_truth = classify_verdicts(rg, out.exhaustive_report, range.campaigns);
    HuntReport clean_report = out.exhaustive_report;
    clean_report.verdicts.clear();
    std::vector<double> attack, clean;
    for (const auto& v : out.exhaustive_report.verdicts) {
      const auto t = out.exhaustive_truth.at(v.graph_id);
      if (t == GraphTruth::Mixed) {
        ++out.mixed_graphs;
        continue;
      }
      clean_report.verdicts.push_back(v);
      out.exhaustive_labels[v.graph_id] = t == GraphTruth::Attack;
      (t == GraphTruth::Attack ? attack : clean).push_back(v.score);
      if (t == GraphTruth::Benign) {
        auto b = v;
        b.graph_id = "all/" + v.graph_id;
        out.combined_labels[b.graph_id] = false;
        out.combined.verdicts.push_back(std::move(b));
      }
    }
    if (!clean_report.verdicts.empty()) out.exhaustive_metrics = evaluate(clean_report, out.exhaustive_labels);
    out.exhaustive_report.metrics = out.exhaustive_metrics;
    if (!attack.empty()) out.min_attack_score = *std::min_element(attack.begin(), attack.end());
    if (!clean.empty()) out.benign_p95 = percentile(clean, 95);
  }
  std::stable_sort(out.combined.verdicts.begin(), out.combined.verdicts.end(),
                   [](const HuntVerdict& a, const HuntVerdict& b) { return a.score > b.score; });
  if (!out.combined.verdicts.empty()) out.metrics = evaluate(out.combined, out.combined_labels);
  out.combined.metrics = out.metrics;
  out.total_seconds = seconds_since(t0);
  return out;
}

// ---------------------------------------------------------------------------
// suites

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw Error("bench", "cannot write " + p.string());
  f << text;
}

nlohmann::json memory_json(const MemoryBench& m) {
  return {{"raw_events", m.raw_events},     {"events", m.events},
          {"ppg_bytes", m.ppg_bytes},       {"naive_bytes", m.naive_bytes},
          {"reduction_pct", m.reduction_pct}, {"ppg_edges", m.ppg_edges},
          {"naive_edges", m.naive_edges},   {"name_table_bytes", m.name_table_bytes},
          {"id_map_bytes", m.id_map_bytes}, {"nodes", m.nodes},
          {"exp_nodes", m.exp_nodes}};
}

nlohmann::json scaling_json(const ScalingBench& s) {
  return {{"small_events", s.small_events}, {"large_events", s.large_events}, {"small_seconds", s.small_seconds},
          {"large_seconds", s.large_seconds}, {"ratio", s.ratio}};
}

std::string sampling_csv(const std::vector<SamplingRow>& rows) {
  std::string s = "campaign,k,pois,graphs,nodes,node_cr,edge_cr,node_nr,edge_nr\n";
  for (const auto& r : rows)
    s += fmt::format("{},{},{},{},{},{:.4f},{:.4f},{:.4f},{:.4f}\n", r.campaign, r.k, r.pois, r.graphs, r.nodes,
                     r.cn.node_cr, r.cn.edge_cr, r.cn.node_nr, r.cn.edge_nr);
  return s;
}

nlohmann::json sampling_json(const std::vector<SamplingRow>& rows) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : rows)
    a.push_back({{"campaign", r.campaign}, {"k", r.k}, {"pois", r.pois}, {"graphs", r.graphs}, {"nodes", r.nodes},
                 {"node_cr", r.cn.node_cr}, {"edge_cr", r.cn.edge_cr}, {"node_nr", r.cn.node_nr},
                 {"edge_nr", r.cn.edge_nr}});
  return a;
}

std::string scores_csv(const HuntBench& h) {
  std::string s = "set,graph,label,score,best_query,nodes\n";
  for (const auto& v : h.combined.verdicts)
    s += fmt::format("combined,{},{},{:.6f},{},{}\n", v.graph_id, h.combined_labels.at(v.graph_id) ? 1 : 0, v.score,
                     v.best_query, v.nodes);
  for (const auto& v : h.exhaustive_report.verdicts) {
    const auto t = h.exhaustive_truth.at(v.graph_id);
    s += fmt::format("exhaustive,{},{},{:.6f},{},{}\n", v.graph_id,
                     t == GraphTruth::Attack ? "1" : t == GraphTruth::Benign ? "0" : "mixed", v.score, v.best_query,
                     v.nodes);
  }
  return s;
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json hunt_json(const HuntBench& h) {
  return {{"metrics", metrics_to_json(h.metrics)},
          {"poi_metrics", h.poi_report.metrics ? metrics_to_json(*h.poi_report.metrics) : nlohmann::json(nullptr)},
          {"exhaustive_metrics", h.exhaustive_metrics ? metrics_to_json(*h.exhaustive_metrics) : nlohmann::json(nullptr)},
          {"min_attack_score", opt_json(h.min_attack_score)},
          {"benign_p95", opt_json(h.benign_p95)},
          {"poi_graphs", h.poi_report.verdicts.size()},
          {"exhaustive_graphs", h.exhaustive_report.verdicts.size()},
          {"mixed_graphs", h.mixed_graphs},
          {"campaign_detected", h.campaign_detected},
          {"corpus_size", h.corpus_size},
          {"relaxed_pairs", h.relaxed_pairs},
          {"mean_pos_sim", h.separation.mean_pos},
          {"mean_neg_sim", h.separation.mean_neg},
          {"final_loss", h.epoch_loss.empty() ? nlohmann::json(nullptr) : nlohmann::json(h.epoch_loss.back())},
          {"train_seconds", h.train_seconds},
          {"total_seconds", h.total_seconds},
          {"model_hash", h.model_hash}};
}

}  // namespace

nlohmann::json run_suite(const SuiteOptions& opt) {
  namespace fs = std::filesystem;
  static const std::set<std::string> suites = {"all", "smoke", "memory", "sampling", "hunt"};
  if (!suites.contains(opt.suite)) throw Error("bench", "unknown suite '" + opt.suite + "'");
  const fs::path dir(opt.out_dir);
  fs::create_directories(dir);
  const bool smoke = opt.suite == "smoke";
  const bool all = opt.suite == "all";
  nlohmann::json summary = {{"suite", opt.suite}, {"seed", opt.seed}};
  if (!opt.config_echo.is_null()) summary["config"] = opt.config_echo;
  const auto t0 = Clock::now();

  ScenarioSpec range;
  range.seed = opt.seed;
  if (smoke) {
    range.target_events = 3000;
    range.process_budget = 60;
    range.duration_ms = 2 * 3'600'000;
  }

  if (all || smoke || opt.suite == "memory") {
    auto mem_spec = range;
    if (!smoke) {
      mem_spec.target_events = 100000;
      mem_spec.process_budget = 100000 / 48;
      mem_spec.duration_ms = 48 * 3'600'000;
    }
    const auto mem = bench_memory(generate_scenario(mem_spec).events);
    summary["memory"] = memory_json(mem);
    const auto scale = bench_construction(smoke ? 5000 : 100000, opt.seed);
    summary["construction"] = scaling_json(scale);
    write_text(dir / "memory.json", nlohmann::json{{"memory", summary["memory"]}, {"construction", summary["construction"]}}.dump(2) + "\n");
    write_text(dir / "memory.csv",
               fmt::format("raw_events,events,ppg_bytes,naive_bytes,reduction_pct,nodes,exp_nodes\n{},{},{},{},{:.2f},{},{}\n",
                           mem.raw_events, mem.events, mem.ppg_bytes, mem.naive_bytes, mem.reduction_pct, mem.nodes,
                           mem.exp_nodes));
  }

  const auto scenario = generate_scenario(range);
  if (all || smoke || opt.suite == "sampling" || opt.suite == "hunt") write_scenario(scenario, (dir / "range").string());

  if (all || smoke || opt.suite == "sampling") {
    DedupStats st;
    const auto events = deduplicate(scenario.events, st);
    const auto g = build_ppg(events);
    const auto rows = bench_sampling(g.snapshot(), events, scenario.campaigns, {1, 2, 3});
    summary["sampling"] = sampling_json(rows);
    write_text(dir / "sampling.csv", sampling_csv(rows));
  }

  if (all || smoke || opt.suite == "hunt") {
    HuntBenchConfig hc;
    hc.range = range;
    hc.benign = range;
    hc.benign.seed = opt.seed + 1000;
    hc.train.seed = opt.seed;
    hc.train.model.seed = opt.seed;
    if (smoke) {
      hc.train.corpus_size = 64;
      hc.train.epochs = 3;
      hc.train.model.dim = 32;
      hc.hunt.stride = 2;
    }
    if (opt.train) hc.train = *opt.train;
    if (opt.hunt) hc.hunt = *opt.hunt;
    const auto h = bench_hunt(hc);
    summary["hunt"] = hunt_json(h);
    write_text(dir / "hunt_scores.csv", scores_csv(h));
    auto rep = report_to_json(h.combined);
    if (!opt.config_echo.is_null()) rep["config"]["effective"] = opt.config_echo;
    write_text(dir / "hunt_report.json", rep.dump(2) + "\n");
    std::string curve = "epoch,loss\n";
    for (std::size_t i = 0; i < h.epoch_loss.size(); ++i) curve += fmt::format("{},{:.6f}\n", i + 1, h.epoch_loss[i]);
    write_text(dir / "loss.csv", curve);
  }

  summary["seconds"] = seconds_since(t0);
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  return summary;
}

}  // namespace provhunt
