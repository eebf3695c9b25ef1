#include "provhunt/querykit.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

namespace provhunt {

using json = nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw Error("querykit", path + ": " + what);
}

const json& require(const json& obj, const char* key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) schema_error(path + "." + key, "missing");
  return *it;
}

bool has_wildcard(std::string_view s) { return s.find_first_of("*?") != std::string_view::npos; }

}  // namespace

void AttrGraph::validate() const {
  std::set<std::tuple<std::uint32_t, std::uint32_t, EdgeOp>> seen;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (e.src >= nodes.size() || e.dst >= nodes.size())
      throw Error("querykit", "edges[" + std::to_string(i) + "]: endpoint out of range");
    if (!seen.emplace(e.src, e.dst, e.op).second)
      throw Error("querykit", "edges[" + std::to_string(i) + "]: duplicate (src, dst, op)");
  }
}

void AttrGraph::normalize_edges() {
  std::map<std::tuple<std::uint32_t, std::uint32_t, EdgeOp>, std::optional<std::int64_t>> merged;
  for (const auto& e : edges) {
    auto [it, fresh] = merged.try_emplace({e.src, e.dst, e.op}, e.ts);
    if (!fresh && e.ts && (!it->second || *e.ts < *it->second)) it->second = e.ts;
  }
  edges.clear();
  edges.reserve(merged.size());
  for (const auto& [k, ts] : merged) edges.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), ts});
}

std::string AttrGraph::key_name(std::uint32_t node) const {
  const auto& n = nodes.at(node);
  return normalized_name(parent_kind(n.abs), n.name);
}

json graph_to_json(const AttrGraph& g) {
  json nodes = json::array();
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    nodes.push_back({{"id", i}, {"name", g.nodes[i].name}, {"abs", abs_name(g.nodes[i].abs)}});
  json edges = json::array();
  for (const auto& e : g.edges) {
    json je = {{"src", e.src}, {"dst", e.dst}, {"op", op_name(e.op)}};
    if (e.ts) je["ts"] = *e.ts;
    edges.push_back(std::move(je));
  }
  json out = {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
  if (g.label) out["label"] = *g.label;
  return out;
}

AttrGraph graph_from_json(const json& j) {
  if (!j.is_object()) schema_error("$", "expected object");
  AttrGraph g;
  const auto& nodes = require(j, "nodes", "$");
  if (!nodes.is_array()) schema_error("nodes", "expected array");
  g.nodes.resize(nodes.size());
  std::vector<bool> filled(nodes.size(), false);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string path = "nodes[" + std::to_string(i) + "]";
    const auto& n = nodes[i];
    if (!n.is_object()) schema_error(path, "expected object");
    const auto& id = require(n, "id", path);
    if (!id.is_number_integer()) schema_error(path + ".id", "expected integer");
    const auto idv = id.get<std::int64_t>();
    if (idv < 0 || std::size_t(idv) >= nodes.size()) schema_error(path + ".id", "ids must be dense 0..n-1");
    if (filled[idv]) schema_error(path + ".id", "duplicate id");
    filled[idv] = true;
    const auto& name = require(n, "name", path);
    if (!name.is_string()) schema_error(path + ".name", "expected string");
    const auto& abs = require(n, "abs", path);
    if (!abs.is_string()) schema_error(path + ".abs", "expected string");
    const auto t = parse_abs(abs.get<std::string>());
    if (!t) schema_error(path + ".abs", "unknown abstract type '" + abs.get<std::string>() + "'");
    g.nodes[idv] = {name.get<std::string>(), *t};
  }
  const auto& edges = require(j, "edges", "$");
  if (!edges.is_array()) schema_error("edges", "expected array");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string path = "edges[" + std::to_string(i) + "]";
    const auto& e = edges[i];
    if (!e.is_object()) schema_error(path, "expected object");
    AttrEdge edge;
    for (const char* key : {"src", "dst"}) {
      const auto& v = require(e, key, path);
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0 || std::size_t(v.get<std::int64_t>()) >= g.nodes.size())
        schema_error(path + "." + key, "expected node id");
      (std::string_view(key) == "src" ? edge.src : edge.dst) = v.get<std::uint32_t>();
    }
    const auto& op = require(e, "op", path);
    if (!op.is_string()) schema_error(path + ".op", "expected string");
    const auto parsed = parse_op(op.get<std::string>());
    if (!parsed) schema_error(path + ".op", "unknown op '" + op.get<std::string>() + "'");
    edge.op = *parsed;
    if (const auto ts = e.find("ts"); ts != e.end() && !ts->is_null()) {
      if (!ts->is_number_integer()) schema_error(path + ".ts", "expected integer");
      edge.ts = ts->get<std::int64_t>();
    }
    g.edges.push_back(edge);
  }
  if (const auto label = j.find("label"); label != j.end() && !label->is_null()) {
    if (!label->is_string()) schema_error("label", "expected string");
    g.label = label->get<std::string>();
  }
  g.validate();
  return g;
}

AttrGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("querykit", "cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("querykit", path + ": " + e.what());
  }
  try {
    return graph_from_json(j);
  } catch (const Error& e) {
    throw Error("querykit", path + ": " + std::string(e.what()).substr(e.stage().size() + 2));
  }
}

void save_graph(const AttrGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("querykit", "cannot write " + path);
  out << graph_to_json(g).dump(2) << '\n';
}

AttrGraph to_attr_graph(const ThreatGraph& tg) { return tg.graph; }

json threat_graph_to_json(const ThreatGraph& tg) {
  json j = graph_to_json(tg.graph);
  j["provenance"] = {{"ppg_nodes", tg.provenance}, {"seeds", tg.seeds}, {"truncated", tg.truncated}};
  return j;
}

ThreatGraph threat_graph_from_json(const json& j) {
  ThreatGraph tg;
  tg.graph = graph_from_json(j);
  if (const auto p = j.find("provenance"); p != j.end()) {
    tg.provenance = p->at("ppg_nodes").get<std::vector<std::vector<NodeIndex>>>();
    tg.seeds = p->at("seeds").get<std::vector<NodeIndex>>();
    tg.truncated = p->value("truncated", false);
    if (tg.provenance.size() != tg.graph.nodes.size())
      throw Error("querykit", "provenance.ppg_nodes: length differs from node count");
  } else {
    tg.provenance.resize(tg.graph.nodes.size());
  }
  return tg;
}

// ---------------------------------------------------------------------------
// POI patterns

PoiPattern make_pattern(std::string sbj, std::string op, std::string obj) {
  PoiPattern p{normalize_path(sbj), normalize_path(op), normalize_path(obj)};
  if (p.sbj == "*" && p.op == "*" && p.obj == "*")
    throw Error("querykit", "POI pattern needs at least one non-wildcard field");
  if (p.op != "*" && !parse_op(p.op)) throw Error("querykit", "POI pattern: unknown op '" + op + "'");
  return p;
}

bool PoiPattern::matches(const AuditEvent& e) const {
  if (op != "*" && op_name(e.op) != op) return false;
  if (sbj != "*") {
    const auto base = process_basename(e.sbj_name);
    if (has_wildcard(sbj)) {
      if (!glob_match(sbj, base)) return false;
    } else if (sbj != base && sbj != strip_extension(base)) {
      return false;
    }
  }
  if (obj != "*") {
    const auto path = normalize_path(e.obj_name);
    if (has_wildcard(obj)) {
      if (!glob_match(obj, path)) return false;
    } else {
      const auto slash = path.find_last_of('/');
      const auto base = slash == std::string::npos ? path : path.substr(slash + 1);
      if (obj != path && obj != base && !(e.obj_addr && obj == e.obj_addr->to_string())) return false;
    }
  }
  return true;
}

std::vector<PoiPattern> patterns_from_json(const json& j) {
  if (!j.is_array()) schema_error("$", "expected array of patterns");
  std::vector<PoiPattern> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string path = "[" + std::to_string(i) + "]";
    const auto& p = j[i];
    if (!p.is_object()) schema_error(path, "expected object");
    auto field = [&](const char* key) {
      const auto it = p.find(key);
      if (it == p.end()) return std::string("*");
      if (!it->is_string()) schema_error(path + "." + key, "expected string");
      return it->get<std::string>();
    };
    out.push_back(make_pattern(field("sbj"), field("op"), field("obj")));
  }
  return out;
}

std::vector<PoiPattern> load_patterns(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("querykit", "cannot open " + path);
  try {
    return patterns_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error("querykit", path + ": " + e.what());
  }
}

PoiMatchResult match_pois(const std::vector<AuditEvent>& events, const std::vector<PoiPattern>& patterns) {
  PoiMatchResult out;
  std::set<std::string, std::less<>> seen;
  for (std::size_t i = 0; i < events.size(); ++i) {
    for (std::size_t p = 0; p < patterns.size(); ++p) {
      if (!patterns[p].matches(events[i])) continue;
      out.log.push_back({i, p});
      if (seen.insert(events[i].sbj_id).second) out.subject_ids.push_back(events[i].sbj_id);
    }
  }
  return out;
}

PoiSet resolve_pois(const PpgView& g, const std::vector<std::string>& ids) {
  PoiSet out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto idx = g.lookup(id);
    if (!idx) throw Error("querykit", "POI id not present in graph: " + id);
    out.push_back(*idx);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace provhunt
