#include "provhunt/ingest.hpp"

#include <fstream>
#include <map>
#include <tuple>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace provhunt {

namespace {

using json = nlohmann::json;

bool get_string(const json& j, const char* key, std::string& out, std::string* reason) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    if (reason) *reason = std::string("missing or non-string field '") + key + "'";
    return false;
  }
  out = it->get<std::string>();
  return true;
}

bool same_template(const AuditEvent& a, const AuditEvent& b) {
  return a.op == b.op && a.dir == b.dir && a.sbj_id == b.sbj_id && a.obj_id == b.obj_id;
}

}  // namespace

std::optional<AuditEvent> parse_event_line(std::string_view line, std::string* reason) {
  const json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    if (reason) *reason = "not a JSON object";
    return std::nullopt;
  }
  AuditEvent e;
  const auto ts = j.find("ts");
  if (ts == j.end() || !ts->is_number_integer()) {
    if (reason) *reason = "missing or non-integer field 'ts'";
    return std::nullopt;
  }
  e.ts = ts->get<std::int64_t>();
  if (e.ts < 0) {
    if (reason) *reason = "negative timestamp";
    return std::nullopt;
  }
  std::string kind, op, dir;
  if (!get_string(j, "sbj_id", e.sbj_id, reason) || !get_string(j, "sbj_name", e.sbj_name, reason) ||
      !get_string(j, "obj_id", e.obj_id, reason) || !get_string(j, "obj_name", e.obj_name, reason) ||
      !get_string(j, "obj_kind", kind, reason) || !get_string(j, "op", op, reason) ||
      !get_string(j, "dir", dir, reason))
    return std::nullopt;

  if (e.sbj_name.empty() || e.obj_name.empty()) {
    if (reason) *reason = "empty entity name";
    return std::nullopt;
  }
  const auto k = parse_kind(kind);
  if (!k) {
    if (reason) *reason = "unknown obj_kind '" + kind + "'";
    return std::nullopt;
  }
  e.obj_kind = *k;
  const auto o = parse_op(op);
  if (!o) {
    if (reason) *reason = "unknown op '" + op + "'";
    return std::nullopt;
  }
  e.op = *o;
  if (dir == "out") {
    e.dir = Direction::SbjToObj;
  } else if (dir == "in") {
    e.dir = Direction::ObjToSbj;
  } else {
    if (reason) *reason = "dir must be 'out' or 'in'";
    return std::nullopt;
  }
  if (!op_legal_for(e.op, e.obj_kind)) {
    if (reason) *reason = "op '" + op + "' not legal for process->" + kind;
    return std::nullopt;
  }

  const auto addr = j.find("obj_addr");
  const bool has_addr = addr != j.end() && !addr->is_null();
  if (e.obj_kind == EntityKind::Netflow) {
    if (!has_addr || !addr->is_string()) {
      if (reason) *reason = "netflow event without obj_addr";
      return std::nullopt;
    }
    e.obj_addr = Ipv4::parse(addr->get<std::string>());
    if (!e.obj_addr) {
      if (reason) *reason = "unparseable obj_addr";
      return std::nullopt;
    }
  } else if (has_addr) {
    if (reason) *reason = "obj_addr on non-netflow event";
    return std::nullopt;
  }
  return e;
}

ParseResult parse_stream(std::istream& in) {
  if (!in) throw Error("ingest", "unreadable source");
  ParseResult out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::string reason;
    if (auto e = parse_event_line(line, &reason)) {
      out.events.push_back(std::move(*e));
    } else {
      out.issues.push_back({lineno, std::move(reason)});
    }
  }
  if (in.bad()) throw Error("ingest", "read error after line " + std::to_string(lineno));
  return out;
}

ParseResult parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("ingest", "cannot open " + path);
  return parse_stream(in);
}

std::string event_to_json_line(const AuditEvent& e) {
  json j = {{"ts", e.ts},
            {"sbj_id", e.sbj_id},
            {"sbj_name", e.sbj_name},
            {"obj_id", e.obj_id},
            {"obj_name", e.obj_name},
            {"obj_kind", kind_name(e.obj_kind)},
            {"op", op_name(e.op)},
            {"dir", e.dir == Direction::SbjToObj ? "out" : "in"}};
  if (e.obj_addr) j["obj_addr"] = e.obj_addr->to_string();
  return j.dump();
}

DedupOutput dedup_s1(const std::vector<AuditEvent>& events) {
  DedupOutput out;
  out.events.reserve(events.size());
  for (const auto& e : events) {
    const auto n = out.events.size();
    const bool repeat = (n >= 1 && same_template(out.events[n - 1], e)) ||
                        (n >= 2 && same_template(out.events[n - 2], e));
    if (repeat) {
      ++out.removed;
    } else {
      out.events.push_back(e);
    }
  }
  return out;
}

DedupOutput dedup_s2(const std::vector<AuditEvent>& events, std::int64_t window_ms) {
  if (window_ms <= 0) throw Error("ingest", "window_ms must be positive");
  DedupOutput out;
  out.events.reserve(events.size());
  if (events.empty()) return out;
  const std::int64_t origin = events.front().ts;
  using Key = std::tuple<std::string_view, std::string_view, EdgeOp>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      const auto h1 = std::hash<std::string_view>{}(std::get<0>(k));
      const auto h2 = std::hash<std::string_view>{}(std::get<1>(k));
      return h1 ^ (h2 * 0x9e3779b97f4a7c15ULL) ^ static_cast<std::size_t>(std::get<2>(k));
    }
  };
  std::unordered_map<Key, std::int64_t, KeyHash> last_window;
  for (const auto& e : events) {
    if (e.obj_kind == EntityKind::Netflow && (e.op == EdgeOp::Send || e.op == EdgeOp::Recv)) {
      const std::int64_t delta = e.ts - origin;
      // floor division so out-of-order events before the origin still bucket consistently
      const std::int64_t window = delta >= 0 ? delta / window_ms : -((-delta + window_ms - 1) / window_ms);
      auto [it, inserted] = last_window.try_emplace(Key{e.sbj_id, e.obj_id, e.op}, window);
      if (!inserted) {
        if (it->second == window) {
          ++out.removed;
          continue;
        }
        it->second = window;
      }
    }
    out.events.push_back(e);
  }
  return out;
}

std::vector<AuditEvent> deduplicate(const std::vector<AuditEvent>& events, DedupStats& stats,
                                    std::int64_t window_ms) {
  stats.input_events = events.size();
  auto s1 = dedup_s1(events);
  stats.s1_removed = s1.removed;
  auto s2 = dedup_s2(s1.events, window_ms);
  stats.s2_removed = s2.removed;
  stats.remaining = s2.events.size();
  return std::move(s2.events);
}

}  // namespace provhunt
