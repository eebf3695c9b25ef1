#pragma once

// JSONL audit-stream parsing and the two general deduplication passes
// (consecutive-run collapse and windowed network filtering).

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "provhunt/core_model.hpp"

namespace provhunt {

enum class Direction : std::uint8_t { SbjToObj = 0, ObjToSbj = 1 };

struct AuditEvent {
  std::int64_t ts = 0;  // epoch milliseconds
  std::string sbj_id;
  std::string sbj_name;
  std::string obj_id;
  std::string obj_name;
  EntityKind obj_kind = EntityKind::File;
  EdgeOp op = EdgeOp::Read;
  Direction dir = Direction::SbjToObj;
  std::optional<Ipv4> obj_addr;

  friend bool operator==(const AuditEvent&, const AuditEvent&) = default;
};

struct ParseIssue {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct ParseResult {
  std::vector<AuditEvent> events;
  std::vector<ParseIssue> issues;
};

/// Parses one JSONL line; returns the reason on failure.
std::optional<AuditEvent> parse_event_line(std::string_view line, std::string* reason = nullptr);

/// Malformed lines are reported and skipped; only an unreadable source throws.
ParseResult parse_stream(std::istream& in);
ParseResult parse_file(const std::string& path);

std::string event_to_json_line(const AuditEvent& e);

struct DedupStats {
  std::size_t input_events = 0;
  std::size_t s1_removed = 0;
  std::size_t s2_removed = 0;
  std::size_t remaining = 0;

  bool conserved() const noexcept { return input_events == s1_removed + s2_removed + remaining; }
};

struct DedupOutput {
  std::vector<AuditEvent> events;
  std::size_t removed = 0;
};

inline constexpr std::int64_t kDefaultWindowMs = 300000;

/// Drops repeats of either of the last two kept templates
/// (sbj_id, op, obj_id, dir): collapses runs and period-2 alternations.
DedupOutput dedup_s1(const std::vector<AuditEvent>& events);

/// Keeps the first send/recv per (sbj_id, obj_id, op) in each tumbling window
/// aligned to the first event's timestamp.
DedupOutput dedup_s2(const std::vector<AuditEvent>& events, std::int64_t window_ms = kDefaultWindowMs);

/// S1 followed by S2.
std::vector<AuditEvent> deduplicate(const std::vector<AuditEvent>& events, DedupStats& stats,
                                    std::int64_t window_ms = kDefaultWindowMs);

}  // namespace provhunt
