// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--strict] [N ...]
//
// With no numbers every criterion runs. The process exits 0 once all
// requested criteria have been evaluated; --strict turns any FAIL into
// exit code 1.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "oracles/events.hpp"
#include "oracles/ged.hpp"
#include "oracles/graphs.hpp"
#include "oracles/reference.hpp"
#include "provhunt/bench.hpp"
#include "provhunt/bitcodec.hpp"
#include "provhunt/ingest.hpp"
#include "provhunt/ppg.hpp"
#include "provhunt/reprnet.hpp"
#include "provhunt/sampler.hpp"
#include "provhunt/trainer.hpp"

using namespace provhunt;
using namespace provhunt::testing;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
};

// first failure message wins; later checks still run
struct Checker {
  bool ok = true;
  std::string first;
  void operator()(bool cond, const std::string& what) {
    if (!cond && ok) first = what;
    ok = ok && cond;
  }
};

constexpr std::int64_t kDay0 = 1'600'000'000'000 - 1'600'000'000'000 % 86'400'000;

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

// ---------------------------------------------------------------------------

Outcome codec_round_trip() {
  using namespace codec;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  auto pick = [&](std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
  };
  Checker ck;
  constexpr int kN = 100000;
  auto subject = [&](int delta_bits, int ver_bits, int i) {
    SubjectEdge e;
    // the first rows pin every field at its limits
    const bool lo = i % 2 == 0;
    if (i < 4) {
      e.obj_delta = std::int32_t(lo ? delta_min(delta_bits) : delta_max(delta_bits));
      e.type = std::uint8_t(lo ? 0 : 15);
      e.dir = std::uint8_t(lo ? 0 : 1);
      e.ts = lo ? 0 : kMsPerDay - 1;
      e.date = std::uint8_t(lo ? 0 : kMaxDate);
      e.version = std::uint16_t(lo ? 0 : (1 << ver_bits) - 1);
    } else {
      e.obj_delta = std::int32_t(pick(delta_min(delta_bits), delta_max(delta_bits)));
      e.type = std::uint8_t(pick(0, 15));
      e.dir = std::uint8_t(pick(0, 1));
      e.ts = std::uint32_t(pick(0, kMsPerDay - 1));
      e.date = std::uint8_t(pick(0, kMaxDate));
      e.version = std::uint16_t(pick(0, (1 << ver_bits) - 1));
    }
    return e;
  };
  auto object = [&](int delta_bits, int i) {
    ObjectEdge e;
    if (i < 2) {
      e.sbj_delta = std::int32_t(i == 0 ? delta_min(delta_bits) : delta_max(delta_bits));
      e.type = std::uint8_t(i == 0 ? 0 : 15);
      e.dir = std::uint8_t(i);
    } else {
      e.sbj_delta = std::int32_t(pick(delta_min(delta_bits), delta_max(delta_bits)));
      e.type = std::uint8_t(pick(0, 15));
      e.dir = std::uint8_t(pick(0, 1));
    }
    return e;
  };
  std::size_t checked = 0;
  for (int i = 0; i < kN; ++i) {
    const auto s = subject(kSparseObjDeltaBits, kSparseVersionBits, i);
    ck(decode_sparse_subject(encode_sparse_subject(s)) == s, "sparse subject");
    const auto x = subject(kExtObjDeltaBits, kExtVersionBits, i);
    ck(decode_ext_subject(encode_ext_subject(x)) == x, "extended subject");
    const auto o = object(kSparseSbjDeltaBits, i);
    ck(decode_sparse_object(encode_sparse_object(o)) == o, "sparse object");
    const auto xo = object(kExtSbjDeltaBits, i);
    ck(decode_ext_object(encode_ext_object(xo)) == xo, "extended object");
    checked += 4;
  }
  ck(delta_min(kSparseObjDeltaBits) == -1024 && delta_max(kSparseObjDeltaBits) == 1023, "11-bit delta range");
  ck(kMsPerDay - 1 == 86'399'999 && kMaxDate == 31, "ts/date limits");
  const double secs = since(t0);
  ck(secs < 5.0, "runtime");
  return {ck.ok, fmt::format("{} edges, {:.2f} s{}", checked, secs, ck.ok ? "" : "; " + ck.first)};
}

std::vector<NaiveEdge> ppg_edges_by_id(const PpgView& g) {
  std::vector<NaiveEdge> out;
  for (const auto& e : g.edges()) out.push_back({g.id(e.sbj), g.id(e.obj), e.op, e.dir, e.ts});
  std::sort(out.begin(), out.end());
  return out;
}

Outcome promotion() {
  Checker ck;
  std::size_t promoted = 0, streams = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    // few subjects and many objects push some nodes past sixteen edges
    RandomStream gen(seed, 3 + int(seed % 6), 10 + int(seed % 40), 1 + int(seed % 4));
    const auto events = gen.generate(200 + seed % 300, kDay0, 30'000);
    const auto g = build_ppg(events).snapshot();
    ++streams;
    for (NodeIndex i = 0; i < g.node_count(); ++i) {
      if (g.exp(i)) {
        ++promoted;
        continue;
      }
      ck(g.neighbors(i, EdgeRole::Out, TimeOrder::TimeAsc).size() <= 16, "sparse node with > 16 out-edges");
      ck(g.neighbors(i, EdgeRole::In, TimeOrder::TimeAsc).size() <= 16, "sparse node with > 16 in-edges");
    }
    ck(ppg_edges_by_id(g) == reference_replay(events, false), "edge multiset differs from naive replay");
  }
  // forced seventeenth edge
  {
    std::vector<AuditEvent> ev;
    Ppg g;
    for (int i = 0; i < 17; ++i) {
      ev.push_back(read(kDay0 + i, "p", "/tmp/f" + std::to_string(i)));
      g.add_event(ev.back());
      if (i == 15) ck(!g.node(*g.lookup("p")).exp, "promoted before the seventeenth edge");
    }
    ck(g.node(*g.lookup("p")).exp, "seventeenth edge did not promote");
    ck(ppg_edges_by_id(g.snapshot()) == reference_replay(ev, false), "seventeenth edge multiset");
  }
  // out-of-range delta
  {
    std::vector<AuditEvent> ev{read(kDay0, "p", "/tmp/a")};
    for (int i = 0; i < 1100; ++i) ev.push_back(read(kDay0 + 1, "q" + std::to_string(i), "/tmp/pad"));
    ev.push_back(read(kDay0 + 2, "p", "/tmp/b"));
    const auto g = build_ppg(ev);
    ck(g.node(*g.lookup("p")).exp, "wide delta did not promote");
    ck(ppg_edges_by_id(g.snapshot()) == reference_replay(ev, false), "wide delta multiset");
  }
  return {ck.ok, fmt::format("{} streams, {} promoted nodes{}", streams, promoted, ck.ok ? "" : "; " + ck.first)};
}

ScenarioSpec range_100k(std::uint64_t seed) {
  ScenarioSpec s;
  s.seed = seed;
  s.target_events = 100000;
  s.process_budget = 100000 / 48;
  s.duration_ms = 48 * 3'600'000;
  return s;
}

Outcome compaction() {
  const auto m = bench_memory(generate_scenario(range_100k(7)).events);
  const double ratio = double(m.ppg_bytes) / double(m.naive_bytes);
  const bool pass = ratio <= 0.55 && m.ppg_edges == m.naive_edges;
  return {pass, fmt::format("{} events, ppg {} B, naive {} B, ratio {:.3f}, edges {}/{}", m.events, m.ppg_bytes,
                            m.naive_bytes, ratio, m.ppg_edges, m.naive_edges)};
}

Outcome construction() {
  const auto s = bench_construction(100000, 7);
  const double total = s.small_seconds + s.large_seconds;
  const bool pass = s.ratio <= 2.5 && total < 10.0;
  return {pass, fmt::format("{} events {:.3f} s, {} events {:.3f} s, ratio {:.2f}", s.small_events, s.small_seconds,
                            s.large_events, s.large_seconds, s.ratio)};
}

Outcome dedup_oracles() {
  Checker ck;
  constexpr std::int64_t kWindow = 120'000;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    RandomStream gen(seed, 2 + int(seed % 3), 2 + int(seed % 5), 1 + int(seed % 2));
    const auto events = gen.generate(20 + seed % 80, 0, 40'000);
    const auto s1 = dedup_s1(events);
    ck(s1.events == reference_s1(events), "S1 differs from reference");
    ck(dedup_s1(s1.events).events == s1.events, "S1 not idempotent");
    const auto s2 = dedup_s2(events, kWindow);
    ck(s2.events == reference_s2(events, kWindow), "S2 differs from reference");
    ck(dedup_s2(s2.events, kWindow).events == s2.events, "S2 not idempotent");
    DedupStats stats;
    const auto all = deduplicate(events, stats, kWindow);
    ck(stats.conserved() && all.size() == stats.remaining, "stats not conserved");
    ck(all == reference_s2(reference_s1(events), kWindow), "pipeline differs from reference");
  }
  return {ck.ok, "10000 streams" + (ck.ok ? "" : "; " + ck.first)};
}

Outcome sampler_oracle() {
  Checker ck;
  std::size_t max_nodes = 0, regions = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    RandomStream gen(seed, 4 + int(seed % 30), 6 + int(seed % 60), 1 + int(seed % 8));
    const auto events = gen.generate(60 + 3 * seed, kDay0, 5000);
    const auto g = build_ppg(events).snapshot();
    max_nodes = std::max(max_nodes, g.node_count());
    std::map<std::string, RefNode> attrs;
    for (NodeIndex i = 0; i < g.node_count(); ++i) attrs[g.id(i)] = {g.abs(i), g.exp(i)};
    std::vector<std::string> poi_ids;
    for (std::uint64_t j = 0; j <= seed % 3; ++j) poi_ids.push_back(events[(seed * 7 + j * 13) % events.size()].sbj_id);
    const std::uint32_t k = 1 + seed % 3;
    const auto ref = reference_sample(events, attrs, poi_ids, k);
    const auto got = sample_regions(g, resolve_pois(g, poi_ids), SamplingConfig{.k = k});
    ck(got.size() == ref.size(), "region count");
    using EdgeKey = std::tuple<std::string, std::string, EdgeOp, std::int64_t>;
    std::set<std::set<std::string>> ref_nodes, got_nodes;
    std::set<std::set<EdgeKey>> ref_edges, got_edges;
    for (const auto& r : ref) {
      ref_nodes.insert(r.nodes);
      ref_edges.insert(r.edges);
    }
    for (const auto& r : got) {
      std::set<std::string> ns;
      for (auto n : r.nodes) ns.insert(g.id(n));
      got_nodes.insert(ns);
      std::set<EdgeKey> es;
      for (const auto& e : r.edges) es.emplace(g.id(e.sbj), g.id(e.obj), e.op, e.ts);
      got_edges.insert(es);
    }
    regions += got.size();
    ck(got_nodes == ref_nodes, fmt::format("node sets differ (seed {})", seed));
    ck(got_edges == ref_edges, fmt::format("edge sets differ (seed {})", seed));
  }
  ck(max_nodes <= 200, "graph larger than 200 nodes");
  return {ck.ok, fmt::format("200 graphs, up to {} nodes, {} regions{}", max_nodes, regions, ck.ok ? "" : "; " + ck.first)};
}

Outcome rule_table() {
  using A = AbsType;
  const auto nv = [](A t, bool e = false) { return RuleNodeView{t, e}; };
  struct Row {
    RuleId id;
    RuleNodeView fire_s, fire_o;
    EdgeOp fire_op;
    RuleNodeView miss_s, miss_o;
    EdgeOp miss_op;
  };
  const std::vector<Row> rows = {
      {RuleId::R1, nv(A::UtilProcess, true), nv(A::PublicNetflow), EdgeOp::Send, nv(A::WebProcess, true), nv(A::PublicNetflow), EdgeOp::Send},
      {RuleId::R2, nv(A::WebProcess), nv(A::PublicNetflow), EdgeOp::Recv, nv(A::WebProcess, true), nv(A::PublicNetflow), EdgeOp::Recv},
      {RuleId::R3, nv(A::UtilProcess), nv(A::TmpFile), EdgeOp::Write, nv(A::UtilProcess), nv(A::UnknownFile), EdgeOp::Write},
      {RuleId::R4, nv(A::UtilProcess), nv(A::SysProcess), EdgeOp::Fork, nv(A::UtilProcess, true), nv(A::ServProcess), EdgeOp::Fork},
      {RuleId::R5, nv(A::UtilProcess, true), nv(A::LibFile), EdgeOp::Write, nv(A::UtilProcess, true), nv(A::LibFile), EdgeOp::Read},
      {RuleId::R6, nv(A::UtilProcess, true), nv(A::ServProcess), EdgeOp::Modify, nv(A::UtilProcess, true), nv(A::ServProcess), EdgeOp::Fork},
      {RuleId::R7, nv(A::UtilProcess, true), nv(A::CfgFile), EdgeOp::Read, nv(A::UtilProcess, true), nv(A::TmpFile), EdgeOp::Write},
      {RuleId::R8, nv(A::CfgFile, true), nv(A::UtilProcess), EdgeOp::Modify, nv(A::CfgFile, true), nv(A::UtilProcess), EdgeOp::Read},
      {RuleId::R9, nv(A::TmpFile), nv(A::UtilProcess), EdgeOp::Read, nv(A::TmpFile, true), nv(A::UtilProcess), EdgeOp::Write},
      {RuleId::R10, nv(A::PublicNetflow), nv(A::UtilProcess), EdgeOp::Send, nv(A::PublicNetflow), nv(A::UtilProcess), EdgeOp::Connect},
  };
  Checker ck;
  for (const auto& r : rows) {
    const auto name = fmt::format("R{}", int(r.id));
    ck(rule_allows(r.fire_s, r.fire_o, r.fire_op) == r.id, name + " did not fire");
    ck(!rule_allows(r.miss_s, r.miss_o, r.miss_op).has_value(), name + " fired on its exclusion");
  }
  std::set<RuleId> hit;
  for (std::uint8_t a = 0; a < kAbsTypeCount; ++a)
    for (std::uint8_t b = 0; b < kAbsTypeCount; ++b)
      for (bool ea : {false, true})
        for (bool eb : {false, true})
          for (auto op : kAllEdgeOps)
            if (auto r = rule_allows(nv(abs_from_code(a), ea), nv(abs_from_code(b), eb), op)) hit.insert(*r);
  ck(hit.size() == 10, "not every rule reachable");
  return {ck.ok, fmt::format("{} rows, {} rules reachable{}", rows.size(), hit.size(), ck.ok ? "" : "; " + ck.first)};
}

Outcome sampling_quality() {
  const auto s = generate_scenario(ScenarioSpec{});
  DedupStats st;
  const auto events = deduplicate(s.events, st);
  const auto g = build_ppg(events);
  const auto rows = bench_sampling(g.snapshot(), events, s.campaigns, {1, 2, 3});
  Checker ck;
  std::string detail;
  std::map<std::string, double> prev;
  for (const auto& r : rows) {
    if (prev.count(r.campaign)) ck(r.cn.node_cr >= prev[r.campaign], r.campaign + " CR decreases in k");
    prev[r.campaign] = r.cn.node_cr;
    if (r.k != 2) continue;
    ck(r.cn.node_cr >= 0.70, r.campaign + " CR below 0.70");
    ck(r.cn.node_nr <= 0.30, r.campaign + " NR above 0.30");
    detail += fmt::format("{}{} CR {:.2f} NR {:.2f}", detail.empty() ? "" : ", ", r.campaign, r.cn.node_cr, r.cn.node_nr);
  }
  return {ck.ok, "k=2: " + detail + (ck.ok ? "" : "; " + ck.first)};
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(23);
  auto m = ReprModel::init({.dim = 8, .layers = 3, .gate_degree = 2, .inter = true, .seed = 4});
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto q = init_features(random_graph(rng, 6, 0.3 + 0.03 * trial));
    const auto p = init_features(random_graph(rng, 6, 0.3 + 0.03 * trial));
    const auto grad = backward_pair(m, q, p, 1.0);
    auto& theta = m.parameters();
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const double keep = theta[i];
      theta[i] = keep + 1e-5;
      const double up = forward_pair(m, q, p).score;
      theta[i] = keep - 1e-5;
      const double down = forward_pair(m, q, p).score;
      theta[i] = keep;
      worst = std::max(worst, rel_err(grad[i], (up - down) / 2e-5));
    }
  }
  const double secs = since(t0);
  return {worst <= 1e-4 && secs < 60.0,
          fmt::format("20 pairs, {} parameters, worst rel err {:.2e}, {:.1f} s", m.parameters().size(), worst, secs)};
}

Outcome permutation_invariance() {
  std::mt19937_64 rng(17);
  const auto m = ReprModel::init({});
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::uint32_t nq = 4 + std::uint32_t(trial % 12), np = 4 + std::uint32_t((trial * 5) % 15);
    const auto q = random_graph(rng, nq, 0.4);
    const auto p = random_graph(rng, np, 0.4);
    const auto base = forward_pair(m, init_features(q), init_features(p));
    const auto moved =
        forward_pair(m, init_features(permute(q, random_permutation(rng, nq))), init_features(permute(p, random_permutation(rng, np))));
    const double scale = std::max({1.0, base.eq.cwiseAbs().maxCoeff(), base.ep.cwiseAbs().maxCoeff()});
    worst = std::max({worst, (base.eq - moved.eq).cwiseAbs().maxCoeff() / scale,
                      (base.ep - moved.ep).cwiseAbs().maxCoeff() / scale});
  }
  return {worst <= 1e-9, fmt::format("100 trials, worst deviation {:.2e}", worst)};
}

double scalar_loss(const std::vector<AnchorSims>& sims, double tau) {
  double total = 0;
  for (const auto& s : sims) {
    double denom = 0;
    for (double x : s.neg) denom += std::exp(x / tau);
    total += -std::log(std::exp(s.pos / tau) / denom);
  }
  return total / double(sims.size());
}

Outcome loss_reference() {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<AnchorSims> sims(1 + std::size_t(t % 9));
    for (auto& s : sims) {
      s.pos = u(rng);
      s.neg.resize(1 + std::size_t(rng() % 6));
      for (auto& x : s.neg) x = u(rng);
    }
    const double ref = scalar_loss(sims, 0.1);
    worst = std::max(worst, std::abs(contrastive_loss(sims, 0.1).loss - ref) / std::max(1.0, std::abs(ref)));
  }
  return {worst <= 1e-9, fmt::format("100 configurations, worst deviation {:.2e}", worst)};
}

Outcome ged_admissibility() {
  std::mt19937_64 rng(15);
  Checker ck;
  double slack = 0;
  for (int t = 0; t < 200; ++t) {
    const auto a = random_graph(rng, 1 + std::uint32_t(t % 6), 0.5);
    const auto b = random_graph(rng, 1 + std::uint32_t((t / 6) % 6), 0.5);
    const double approx = approx_ged(a, b), exact = exact_ged(a, b);
    ck(approx >= exact, fmt::format("pair {}: approx {} < exact {}", t, approx, exact));
    ck(approx_ged(a, a) == 0.0 && approx_ged(b, b) == 0.0, "approx_ged(g, g) != 0");
    slack += approx - exact;
  }
  return {ck.ok, fmt::format("200 pairs, mean slack {:.2f}{}", slack / 200, ck.ok ? "" : "; " + ck.first)};
}

// criteria 12 to 14 share one training run
struct HuntShared {
  std::optional<HuntBench> bench;
  const HuntBench& get() {
    if (!bench) {
      HuntBenchConfig cfg;
      cfg.benign.seed = cfg.range.seed + 1000;
      bench = bench_hunt(cfg);
    }
    return *bench;
  }
};

std::string opt_str(const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : "null"; }

Outcome end_to_end(HuntShared& shared) {
  const auto& h = shared.get();
  Checker ck;
  const auto& m = h.metrics;
  ck(m.recall && *m.recall == 1.0, "recall below 1.0");
  ck(m.fpr && *m.fpr <= 0.10, "FPR above 0.10");
  ck(m.auc && *m.auc >= 0.95, "AUC below 0.95");
  for (const auto& [name, hit] : h.campaign_detected) ck(hit, name + " missed");
  ck(h.total_seconds < 900.0, "runtime over 15 min");
  return {ck.ok, fmt::format("recall {}, FPR {}, AUC {}, {} graphs, train {:.0f} s, total {:.0f} s{}", opt_str(m.recall),
                             opt_str(m.fpr), opt_str(m.auc), h.combined.verdicts.size(), h.train_seconds,
                             h.total_seconds, ck.ok ? "" : "; " + ck.first)};
}

Outcome exhaustive_separation(HuntShared& shared) {
  const auto& h = shared.get();
  if (!h.min_attack_score || !h.benign_p95) return {false, "no attack or no benign exhaustive graphs"};
  return {*h.min_attack_score > *h.benign_p95,
          fmt::format("min attack {:.5f}, benign p95 {:.5f}, {} graphs, {} mixed excluded", *h.min_attack_score,
                      *h.benign_p95, h.exhaustive_report.verdicts.size(), h.mixed_graphs)};
}

Outcome theta_sweep(HuntShared& shared) {
  const auto& h = shared.get();
  Checker ck;
  for (const auto* r : {&h.combined, &h.exhaustive_report}) {
    std::size_t prev = r->verdicts.size();
    for (int i = 0; i <= 200; ++i) {
      const auto n = rethreshold(*r, -1.0 + 0.01 * i).flag_count();
      ck(n <= prev, fmt::format("{} flags rise at theta {:.2f}", r->mode, -1.0 + 0.01 * i));
      prev = n;
    }
    ck(rethreshold(*r, 1.0 + 1e-9).flag_count() == 0, r->mode + ": theta > 1 flags something");
    ck(rethreshold(*r, -1.0 - 1e-9).flag_count() == r->verdicts.size(), r->mode + ": theta < -1 misses something");
  }
  return {ck.ok, fmt::format("{} + {} graphs, 201 thresholds{}", h.combined.verdicts.size(),
                             h.exhaustive_report.verdicts.size(), ck.ok ? "" : "; " + ck.first)};
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  bool strict = false;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--strict") == 0)
      strict = true;
    else
      only.insert(std::atoi(argv[i]));
  }
  HuntShared shared;
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, codec_round_trip},
      {2, promotion},
      {3, compaction},
      {4, construction},
      {5, dedup_oracles},
      {6, sampler_oracle},
      {7, rule_table},
      {8, sampling_quality},
      {9, gradient_check},
      {10, permutation_invariance},
      {11, loss_reference},
      {12, [&] { return end_to_end(shared); }},
      {13, [&] { return exhaustive_separation(shared); }},
      {14, [&] { return theta_sweep(shared); }},
      {15, ged_admissibility},
  };
  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %2d: %s  %s  [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), since(t0));
    std::fflush(stdout);
  }
  std::printf("%d failed\n", failed);
  return strict && failed ? 1 : 0;
}
