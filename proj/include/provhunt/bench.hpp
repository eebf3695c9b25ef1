#pragma once

// Synthetic provenance range (benign background plus injected campaigns),
// a naive adjacency-list baseline store and the benchmark suites.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provhunt/hunter.hpp"
#include "provhunt/ingest.hpp"
#include "provhunt/ppg.hpp"
#include "provhunt/querykit.hpp"
#include "provhunt/sampler.hpp"
#include "provhunt/trainer.hpp"

namespace provhunt {

// ---------------------------------------------------------------------------
// scenario

/// Campaign templates shipped with the generator.
const std::vector<std::string>& campaign_names();

struct ScenarioSpec {
  std::uint64_t seed = 7;
  std::size_t target_events = 20000;
  int users = 3;                       // each has a shell, a browser and an editor
  std::size_t process_budget = 360;    // short-lived benign process launches
  std::size_t public_sites = 80;
  std::size_t web_clients = 60;
  std::int64_t start_ms = 1'672'646'400'000 + 8 * 3'600'000;  // 2023-01-02 08:00 UTC
  std::int64_t duration_ms = 10 * 3'600'000;
  std::vector<std::string> campaigns = {"upgrade-hijack", "shell-recon-exfil", "credential-theft"};
  std::vector<double> inject_at = {0.3, 0.5, 0.7};  // fraction of the stream, one per campaign

  void validate() const;
};

struct CampaignTruth {
  std::string name;
  std::vector<std::size_t> events;       // indices into Scenario::events
  std::vector<std::string> entities;     // every entity id the campaign touches, sorted
  std::vector<std::string> attack_only;  // entities never seen in benign events, sorted
  std::vector<PoiPattern> iocs;          // indicators a CTI report would list
  AttrGraph query;                       // abstracted injected subgraph
};

struct Scenario {
  ScenarioSpec spec;
  std::vector<AuditEvent> events;
  std::vector<CampaignTruth> campaigns;

  std::size_t attack_event_count() const;
  std::vector<PoiPattern> all_iocs() const;
};

Scenario generate_scenario(const ScenarioSpec& spec, const AbstractionRules& rules = AbstractionRules::defaults());

/// Abstracted graph of an event list; entities merge on (normalized name, abstract type).
AttrGraph graph_from_events(const std::vector<AuditEvent>& events,
                            const AbstractionRules& rules = AbstractionRules::defaults());

/// events.jsonl, labels.json, patterns.json and queries/<campaign>.json under dir.
void write_scenario(const Scenario& s, const std::string& dir);

nlohmann::json labels_to_json(const Scenario& s);
/// Reads labels.json back into campaign truths (queries and events left empty).
std::vector<CampaignTruth> campaigns_from_labels(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// baseline store

/// Uncompressed adjacency lists keeping full ids, names and kinds.
class NaiveStore {
 public:
  struct Edge {
    std::uint64_t peer = 0;
    std::int64_t ts = 0;
    EdgeOp op = EdgeOp::Read;
    Direction dir = Direction::SbjToObj;
  };
  struct Node {
    std::string id;
    std::string name;
    EntityKind kind = EntityKind::File;
    std::vector<Edge> out;
    std::vector<std::uint64_t> in;  // subject indices
  };

  void add(const AuditEvent& e);
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_; }
  /// Heap plus object bytes: node records, string payloads beyond the inline
  /// buffer, adjacency capacity and the id index.
  std::size_t bytes() const;
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

 private:
  std::vector<Node> nodes_;
  std::map<std::string, std::uint64_t> index_;
  std::size_t edges_ = 0;
};

// ---------------------------------------------------------------------------
// benches

struct MemoryBench {
  std::size_t raw_events = 0;
  std::size_t events = 0;  // after deduplication
  std::size_t ppg_bytes = 0;
  std::size_t naive_bytes = 0;
  double reduction_pct = 0;
  std::size_t ppg_edges = 0;
  std::size_t naive_edges = 0;
  std::size_t name_table_bytes = 0;  // reported beside, not inside, ppg_bytes
  std::size_t id_map_bytes = 0;
  std::size_t nodes = 0;
  std::size_t exp_nodes = 0;
};

/// Deduplicates, then builds the PPG (versioning off) and the naive store
/// from the same events.
MemoryBench bench_memory(const std::vector<AuditEvent>& raw_events);

struct ScalingBench {
  std::size_t small_events = 0;
  std::size_t large_events = 0;
  double small_seconds = 0;
  double large_seconds = 0;
  double ratio = 0;
};

/// PPG build time for two generated streams (small and twice as large).
ScalingBench bench_construction(std::size_t small_events, std::uint64_t seed);

struct SamplingRow {
  std::string campaign;
  std::uint32_t k = 0;
  std::size_t pois = 0;
  std::size_t graphs = 0;
  std::size_t nodes = 0;
  CoverageNoise cn;
};

/// Samples around each campaign's IoC-matched subjects and scores the union
/// of the resulting threat graphs against the campaign query.
std::vector<SamplingRow> bench_sampling(const PpgView& g, const std::vector<AuditEvent>& events,
                                        const std::vector<CampaignTruth>& campaigns,
                                        const std::vector<std::uint32_t>& ks);

/// Disjoint union of graphs (node names kept as is).
AttrGraph union_graph(const std::vector<ThreatGraph>& graphs);

/// A graph is an attack graph when it covers any attack-only entity.
std::map<std::string, bool> label_verdicts(const PpgView& g, const HuntReport& r,
                                           const std::vector<CampaignTruth>& campaigns);

enum class GraphTruth { Benign, Attack, Mixed };

/// Per-seed truth for exhaustive graphs: attack when a seed is an attack-only
/// entity, benign when no member is, mixed when a benign seed reaches into
/// attack activity.
std::map<std::string, GraphTruth> classify_verdicts(const PpgView& g, const HuntReport& r,
                                                    const std::vector<CampaignTruth>& campaigns);

struct HuntBenchConfig {
  ScenarioSpec range;      // hunted stream
  ScenarioSpec benign;     // training stream (campaigns cleared)
  TrainConfig train;
  HuntConfig hunt;
  bool exhaustive = true;
  std::int64_t window_ms = kDefaultWindowMs;
};

struct HuntBench {
  HuntReport poi_report;         // IoC-seeded graphs, one hunt per campaign, ids "<campaign>/tg:..."
  HuntReport exhaustive_report;  // one graph per process
  HuntReport combined;           // IoC graphs plus benign exhaustive graphs; ids prefixed
  HuntMetrics metrics;           // over combined
  std::optional<HuntMetrics> exhaustive_metrics;
  std::map<std::string, bool> combined_labels;
  std::map<std::string, bool> exhaustive_labels;     // mixed graphs left out
  std::map<std::string, GraphTruth> exhaustive_truth;
  std::size_t mixed_graphs = 0;                 // excluded from exhaustive metrics
  std::map<std::string, bool> campaign_detected;
  std::vector<double> epoch_loss;
  Separation separation;
  std::optional<double> min_attack_score;   // exhaustive
  std::optional<double> benign_p95;         // exhaustive
  std::size_t corpus_size = 0;
  std::size_t relaxed_pairs = 0;
  double train_seconds = 0;
  double total_seconds = 0;
  std::string model_hash;
};

/// Full pipeline: generate, dedup, build, train on the benign stream, hunt
/// with IoC POIs and exhaustively, label and evaluate.
HuntBench bench_hunt(const HuntBenchConfig& cfg, const ReprModel* pretrained = nullptr);

/// Nearest-rank percentile, p in [0, 100].
double percentile(std::vector<double> v, double p);

struct SuiteOptions {
  std::string suite = "all";  // all | smoke | memory | sampling | hunt
  std::uint64_t seed = 7;
  std::string out_dir = "results";
  std::optional<TrainConfig> train;  // replaces the suite's training setup when given
  std::optional<HuntConfig> hunt;
  nlohmann::json config_echo;        // copied into summary.json and hunt_report.json when set
};

/// Runs a suite, writes JSON and CSV under out_dir and returns the summary.
nlohmann::json run_suite(const SuiteOptions& opt);

}  // namespace provhunt
