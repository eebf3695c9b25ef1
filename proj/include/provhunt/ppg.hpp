#pragma once

// Pure Provenance Graph: a bit-packed, append-only provenance store.
//
// Every entity gets one 32-bit index on first sight. A node record holds a
// packed header and two edge queues: the subject queue stores full edge
// records, the object queue stores back-references to acting subjects.
// Sparse nodes keep at most 16 edges with narrow relative deltas; a node
// that outgrows either limit is promoted once to the extended layout.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "provhunt/bitcodec.hpp"
#include "provhunt/core_model.hpp"
#include "provhunt/ingest.hpp"

namespace provhunt {

using NodeIndex = std::uint32_t;

inline constexpr std::uint32_t kPpgFormatVersion = 1;  // checkpoint layout

struct PpgConfig {
  bool versioning_enabled = false;
  std::uint32_t sparse_queue_cap = 16;
};

enum class AddResult { Inserted, SuppressedByVersion };
enum class EdgeRole { In, Out };
enum class TimeOrder { TimeAsc, TimeDesc };

/// Decoded edge as seen from one endpoint.
struct NeighborEdge {
  NodeIndex neighbor = 0;
  EdgeOp op = EdgeOp::Read;
  Direction dir = Direction::SbjToObj;
  std::int64_t ts = 0;        // absolute epoch milliseconds
  std::uint16_t version = 0;  // object version snapshot
  friend bool operator==(const NeighborEdge&, const NeighborEdge&) = default;
};

/// Fully decoded edge (subject, object) as stored.
struct DecodedEdge {
  NodeIndex sbj = 0;
  NodeIndex obj = 0;
  EdgeOp op = EdgeOp::Read;
  Direction dir = Direction::SbjToObj;
  std::int64_t ts = 0;
  friend bool operator==(const DecodedEdge&, const DecodedEdge&) = default;
};

struct NodeInfo {
  NodeIndex index = 0;
  AbsType abs = AbsType::UnknownFile;
  bool exp = false;
  std::uint16_t version = 0;
  std::uint8_t date0 = 0;
  std::uint32_t sbj_edges = 0;
  std::uint32_t obj_edges = 0;
};

struct MemoryReport {
  std::size_t total_bytes = 0;       // packed arenas + fixed overhead
  std::size_t fixed_overhead = 0;
  std::size_t node_bytes_sparse = 0;
  std::size_t node_bytes_extended = 0;  // includes extended queue headers
  std::size_t sparse_subject_bytes = 0;
  std::size_t sparse_object_bytes = 0;
  std::size_t ext_subject_bytes = 0;
  std::size_t ext_object_bytes = 0;
  // per-record widths, bytes
  std::size_t bytes_per_node = 0;
  std::size_t bytes_per_sparse_subject_edge = 0;
  std::size_t bytes_per_sparse_object_edge = 0;
  std::size_t bytes_per_ext_subject_edge = 0;
  std::size_t bytes_per_ext_object_edge = 0;
  // outside the packed region, reported separately
  std::size_t id_map_bytes = 0;
  std::size_t name_table_bytes = 0;
  std::size_t version_index_bytes = 0;
  std::size_t node_count = 0;
  std::size_t edge_count = 0;
  std::size_t exp_node_count = 0;
};

namespace detail {
struct PpgData;
}

/// Immutable point-in-time view of a Ppg. Cheap to copy.
class PpgView {
 public:
  PpgView() = default;

  std::size_t node_count() const noexcept;
  std::size_t edge_count() const noexcept;
  NodeInfo node(NodeIndex i) const;
  AbsType abs(NodeIndex i) const;
  bool exp(NodeIndex i) const;
  EntityKind kind(NodeIndex i) const { return parent_kind(abs(i)); }
  const std::string& name(NodeIndex i) const;
  const std::string& id(NodeIndex i) const;
  std::optional<NodeIndex> lookup(std::string_view id) const;
  std::int64_t origin_day() const noexcept;

  /// In: edges where the node is the object. Out: edges where it is the subject.
  /// TimeDesc is the exact reverse of TimeAsc; ties keep insertion order in TimeAsc.
  std::vector<NeighborEdge> neighbors(NodeIndex i, EdgeRole role, TimeOrder order) const;
  /// All edges in insertion order of their subjects' queues.
  std::vector<DecodedEdge> edges() const;

  MemoryReport memory_report() const;

 private:
  friend class Ppg;
  explicit PpgView(std::shared_ptr<const detail::PpgData> d) : data_(std::move(d)) {}
  std::shared_ptr<const detail::PpgData> data_;
};

class Ppg {
 public:
  explicit Ppg(PpgConfig cfg = {}, const AbstractionRules& rules = AbstractionRules::defaults());

  AddResult add_event(const AuditEvent& e);

  /// Forces promotion; no-op on already extended nodes.
  void promote(NodeIndex i);

  /// O(1); the writer copies the arenas on its next mutation if a snapshot is alive.
  PpgView snapshot() const { return PpgView(data_); }

  // Live-graph accessors (single-writer use only).
  std::size_t node_count() const noexcept { return snapshot().node_count(); }
  std::size_t edge_count() const noexcept { return snapshot().edge_count(); }
  NodeInfo node(NodeIndex i) const { return snapshot().node(i); }
  std::optional<NodeIndex> lookup(std::string_view id) const { return snapshot().lookup(id); }
  std::vector<NeighborEdge> neighbors(NodeIndex i, EdgeRole role, TimeOrder order) const {
    return snapshot().neighbors(i, role, order);
  }
  MemoryReport memory_report() const { return snapshot().memory_report(); }
  const PpgConfig& config() const noexcept;

  void save(const std::string& path) const;
  static Ppg load(const std::string& path, const AbstractionRules& rules = AbstractionRules::defaults());

 private:
  detail::PpgData& mutable_data();
  std::shared_ptr<detail::PpgData> data_;
  std::shared_ptr<const AbstractionRules> rules_;
};

/// Builds a PPG from already deduplicated events.
Ppg build_ppg(const std::vector<AuditEvent>& events, PpgConfig cfg = {},
              const AbstractionRules& rules = AbstractionRules::defaults());

}  // namespace provhunt
