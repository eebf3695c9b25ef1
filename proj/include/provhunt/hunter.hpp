#pragma once

// Hunting pipeline: sample threat graphs, score them against query graphs,
// threshold the best match and report.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provhunt/ppg.hpp"
#include "provhunt/querykit.hpp"
#include "provhunt/reprnet.hpp"
#include "provhunt/sampler.hpp"

namespace provhunt {

struct HuntConfig {
  double theta = 0.3;
  std::uint32_t k = 2;
  std::size_t max_nodes = 5000;
  std::size_t batch_pairs = 64;
  // exhaustive mode: take every stride-th process, then at most max_pois of them (0 = no cap)
  std::size_t stride = 1;
  std::size_t max_pois = 0;
  std::uint64_t seed = 7;

  void validate() const;
  SamplingConfig sampling() const { return {k, max_nodes}; }
};

struct HuntVerdict {
  std::string graph_id;  // "tg:" + entity id of the smallest seed
  std::string best_query;
  double score = -1;
  bool flagged = false;
  std::vector<double> scores;  // aligned with HuntReport::query_ids
  std::size_t nodes = 0;
  std::size_t edges = 0;
  bool truncated = false;
  std::vector<std::string> seeds;    // entity ids
  std::vector<NodeIndex> members;    // PPG nodes covered, sorted
};

struct HuntMetrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::optional<double> recall;  // undefined without positives
  std::optional<double> fpr;     // undefined without negatives
  double accuracy = 0;
  std::optional<double> auc;     // needs both classes
};

struct HuntReport {
  double theta = 0.3;
  std::uint32_t k = 2;
  std::string model_hash;
  std::string mode = "poi";
  std::vector<std::string> query_ids;
  std::vector<HuntVerdict> verdicts;  // descending score, ties by graph id
  std::optional<HuntMetrics> metrics;

  std::size_t flag_count() const;
};

/// Query id: the graph label, or "q<i>" when unlabeled.
std::vector<std::string> query_ids(const std::vector<AttrGraph>& queries);

/// Scores already-sampled threat graphs against every query.
HuntReport score_graphs(const PpgView& g, const std::vector<ThreatGraph>& graphs, const std::vector<AttrGraph>& queries,
                        const ReprModel& model, const HuntConfig& cfg);

HuntReport hunt(const PpgView& g, const PoiSet& pois, const std::vector<AttrGraph>& queries, const ReprModel& model,
                const HuntConfig& cfg = {});

/// All process nodes (strided, optionally capped) are POIs; each one is
/// sampled on its own so overlapping neighborhoods do not collapse into one graph.
HuntReport hunt_exhaustive(const PpgView& g, const std::vector<AttrGraph>& queries, const ReprModel& model,
                           const HuntConfig& cfg = {});

/// Same verdicts under a different threshold.
HuntReport rethreshold(const HuntReport& r, double theta);

/// Mann-Whitney AUC; tied scores get their average rank.
double roc_auc(const std::vector<double>& scores, const std::vector<bool>& positive);

/// Confusion-matrix metrics at the report threshold. Throws when a graph id
/// has no label.
HuntMetrics evaluate(const HuntReport& r, const std::map<std::string, bool>& labels);

nlohmann::json metrics_to_json(const HuntMetrics& m);
nlohmann::json report_to_json(const HuntReport& r);
HuntReport report_from_json(const nlohmann::json& j);

}  // namespace provhunt
