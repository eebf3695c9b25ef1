#pragma once

// Adaptive BFS threat-graph sampling over a PPG snapshot.

#include <cstdint>
#include <optional>
#include <vector>

#include "provhunt/ppg.hpp"
#include "provhunt/querykit.hpp"

namespace provhunt {

enum class RuleId : std::uint8_t { R1 = 1, R2, R3, R4, R5, R6, R7, R8, R9, R10 };

inline constexpr int rule_number(RuleId r) { return static_cast<int>(r); }

struct RuleNodeView {
  AbsType abs = AbsType::UnknownProcess;
  bool exp = false;
};

/// Interaction sampling rules. `v` is the visited node, `u` its neighbor.
///
/// Rules are partitioned by v's kind and exp flag. Process, exp=1: R1 network
/// (not for web_process), R5 writes to sys/lib files, R6 modify of sys/serv
/// processes, R7 anything touching cfg files. Process, exp=0: R2 network, R3
/// non-process neighbors other than unknown_file, R4 process neighbors. File:
/// R8 writes by processes into exp sys/lib/cfg files, R9 anything with a
/// process on sparse files. Netflow: R10 send/recv with processes.
std::optional<RuleId> rule_allows(RuleNodeView v, RuleNodeView u, EdgeOp op);

struct SamplingConfig {
  std::uint32_t k = 2;
  std::size_t max_nodes = 5000;

  void validate() const;
};

/// One merged sampling region before identical-name consolidation.
struct SampledRegion {
  std::vector<NodeIndex> nodes;     // sorted
  std::vector<DecodedEdge> edges;   // sorted, unique
  std::vector<NodeIndex> seeds;     // sorted
  bool truncated = false;
};

std::vector<SampledRegion> sample_regions(const PpgView& g, const PoiSet& pois, const SamplingConfig& cfg);

/// Projects a region to an attributed graph, merging nodes with identical
/// (normalized name, abstract type).
ThreatGraph consolidate(const PpgView& g, const SampledRegion& region);

std::vector<ThreatGraph> sample(const PpgView& g, const PoiSet& pois, const SamplingConfig& cfg);

struct CoverageNoise {
  double node_cr = 0;
  double edge_cr = 0;
  double node_nr = 0;
  double edge_nr = 0;
};

/// Coverage and noise of a sampled graph against a query graph. Nodes match on
/// (normalized name, abstract type), edges on (matched endpoints, op).
CoverageNoise coverage_noise(const AttrGraph& tg, const AttrGraph& qg);

}  // namespace provhunt
