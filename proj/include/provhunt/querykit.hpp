#pragma once

// Attributed multigraphs shared by query, threat and training graphs;
// graph JSON I/O and recall-first POI pattern matching.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "provhunt/core_model.hpp"
#include "provhunt/ingest.hpp"
#include "provhunt/ppg.hpp"

namespace provhunt {

struct AttrNode {
  std::string name;
  AbsType abs = AbsType::UnknownFile;
  friend bool operator==(const AttrNode&, const AttrNode&) = default;
};

struct AttrEdge {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  EdgeOp op = EdgeOp::Read;
  std::optional<std::int64_t> ts;
  friend bool operator==(const AttrEdge&, const AttrEdge&) = default;
};

struct AttrGraph {
  std::vector<AttrNode> nodes;
  std::vector<AttrEdge> edges;
  std::optional<std::string> label;

  std::size_t size() const noexcept { return nodes.size(); }
  bool empty() const noexcept { return nodes.empty(); }

  /// Throws Error("querykit") on dangling endpoints or duplicate (src, dst, op) edges.
  void validate() const;
  /// Collapses duplicate (src, dst, op) edges, keeping the earliest timestamp,
  /// and sorts edges by (src, dst, op).
  void normalize_edges();
  /// Normalized name used for node identity (depends on the node's kind).
  std::string key_name(std::uint32_t node) const;

  friend bool operator==(const AttrGraph&, const AttrGraph&) = default;
};

nlohmann::json graph_to_json(const AttrGraph& g);
/// Errors carry the offending field path, e.g. "edges[3].op".
AttrGraph graph_from_json(const nlohmann::json& j);
AttrGraph load_graph(const std::string& path);
void save_graph(const AttrGraph& g, const std::string& path);

/// Threat graph: an attributed graph plus the PPG nodes behind each node.
struct ThreatGraph {
  AttrGraph graph;
  std::vector<std::vector<NodeIndex>> provenance;  // per node, sorted PPG indices
  std::vector<NodeIndex> seeds;                     // POIs the graph grew from, sorted
  bool truncated = false;
};

/// Structure-preserving projection; drops PPG back-references.
AttrGraph to_attr_graph(const ThreatGraph& tg);
inline AttrGraph to_attr_graph(const AttrGraph& g) { return g; }

nlohmann::json threat_graph_to_json(const ThreatGraph& tg);
ThreatGraph threat_graph_from_json(const nlohmann::json& j);

/// <sbj, op, obj> with '*' wildcards.
struct PoiPattern {
  std::string sbj = "*";
  std::string op = "*";
  std::string obj = "*";

  bool matches(const AuditEvent& e) const;
};

/// Throws when every field is a wildcard or the op is unknown.
PoiPattern make_pattern(std::string sbj, std::string op, std::string obj);
std::vector<PoiPattern> load_patterns(const std::string& path);
std::vector<PoiPattern> patterns_from_json(const nlohmann::json& j);

struct PoiMatch {
  std::size_t event = 0;
  std::size_t pattern = 0;
};

struct PoiMatchResult {
  std::vector<std::string> subject_ids;  // unique, first-match order
  std::vector<PoiMatch> log;
};

PoiMatchResult match_pois(const std::vector<AuditEvent>& events, const std::vector<PoiPattern>& patterns);

using PoiSet = std::vector<NodeIndex>;

/// Maps subject ids to PPG indices; unknown ids throw.
PoiSet resolve_pois(const PpgView& g, const std::vector<std::string>& ids);

}  // namespace provhunt
