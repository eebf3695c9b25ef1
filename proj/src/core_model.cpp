#include "provhunt/core_model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <toml.hpp>

#include "default_rules.inc"  // kDefaultRulesToml, generated from config/abstraction_rules.toml

namespace provhunt {

namespace {

constexpr std::array<std::string_view, kEdgeOpCount> kOpNames = {
    "fork", "exec",   "modify", "open",   "create", "read",  "write", "rename", "link",
    "unlink", "delete", "load", "connect", "start",  "send", "recv",  "message"};

constexpr std::array<std::string_view, kAbsTypeCount> kAbsNames = {
    "sys_process", "usr_process", "serv_process", "util_process", "web_process",
    "unknown_process", "lib_file", "sys_file", "cfg_file", "usr_file",
    "tmp_file", "unknown_file", "private_netflow", "public_netflow"};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool prefix_at_boundary(std::string_view path, std::string_view prefix) {
  if (!path.starts_with(prefix)) return false;
  if (path.size() == prefix.size() || prefix.ends_with('/')) return true;
  return path[prefix.size()] == '/';
}

std::vector<std::string> string_list(const toml::table& t, std::string_view key,
                                     std::string_view where) {
  std::vector<std::string> out;
  const auto* node = t.get(key);
  if (node == nullptr) return out;
  const auto* arr = node->as_array();
  if (arr == nullptr) throw Error("abs-rules", std::string(where) + "." + std::string(key) + ": expected array of strings");
  for (const auto& el : *arr) {
    const auto s = el.value<std::string>();
    if (!s) throw Error("abs-rules", std::string(where) + "." + std::string(key) + ": expected array of strings");
    out.push_back(lower(*s));
  }
  return out;
}

}  // namespace

EdgeOp op_from_wire(std::uint8_t code) {
  if (code >= kWireCodeCount) throw Error("core", "edge wire code out of range: " + std::to_string(code));
  return code <= wire_code(EdgeOp::Connect) ? static_cast<EdgeOp>(code) : static_cast<EdgeOp>(code + 1);
}

std::string_view op_name(EdgeOp op) noexcept { return kOpNames[static_cast<std::size_t>(op)]; }

std::optional<EdgeOp> parse_op(std::string_view name) {
  const auto l = lower(name);
  for (std::size_t i = 0; i < kOpNames.size(); ++i)
    if (kOpNames[i] == l) return static_cast<EdgeOp>(i);
  return std::nullopt;
}

std::string_view kind_name(EntityKind kind) noexcept {
  switch (kind) {
    case EntityKind::Process: return "process";
    case EntityKind::File: return "file";
    case EntityKind::Netflow: return "netflow";
  }
  return "?";
}

std::optional<EntityKind> parse_kind(std::string_view name) {
  const auto l = lower(name);
  if (l == "process") return EntityKind::Process;
  if (l == "file") return EntityKind::File;
  if (l == "netflow") return EntityKind::Netflow;
  return std::nullopt;
}

bool op_legal_for(EdgeOp op, EntityKind obj_kind) noexcept {
  switch (obj_kind) {
    case EntityKind::Process:
      return op == EdgeOp::Fork || op == EdgeOp::Exec || op == EdgeOp::Modify || op == EdgeOp::Open;
    case EntityKind::File:
      switch (op) {
        case EdgeOp::Create: case EdgeOp::Read: case EdgeOp::Write: case EdgeOp::Rename:
        case EdgeOp::Link: case EdgeOp::Unlink: case EdgeOp::Modify: case EdgeOp::Delete:
        case EdgeOp::Load:
          return true;
        default:
          return false;
      }
    case EntityKind::Netflow:
      return op == EdgeOp::Connect || op == EdgeOp::Start || op == EdgeOp::Send ||
             op == EdgeOp::Recv || op == EdgeOp::Message;
  }
  return false;
}

AbsType abs_from_code(std::uint8_t code) {
  if (code >= kAbsTypeCount) throw Error("core", "abstract type code out of range: " + std::to_string(code));
  return static_cast<AbsType>(code);
}

std::string_view abs_name(AbsType t) noexcept { return kAbsNames[abs_code(t)]; }

std::optional<AbsType> parse_abs(std::string_view name) {
  const auto l = lower(name);
  for (std::size_t i = 0; i < kAbsNames.size(); ++i)
    if (kAbsNames[i] == l) return static_cast<AbsType>(i);
  return std::nullopt;
}

AbsSets abs_sets() noexcept {
  AbsSets s;
  for (std::uint8_t c = 0; c < kAbsTypeCount; ++c) {
    const auto t = static_cast<AbsType>(c);
    switch (parent_kind(t)) {
      case EntityKind::Process: s.processes.insert(t); break;
      case EntityKind::File: s.files.insert(t); break;
      case EntityKind::Netflow: s.netflows.insert(t); break;
    }
  }
  return s;
}

std::optional<Ipv4> Ipv4::parse(std::string_view text) {
  // Accept "a.b.c.d" optionally followed by ":port".
  if (const auto colon = text.find(':'); colon != std::string_view::npos) text = text.substr(0, colon);
  std::uint32_t value = 0;
  int parts = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  while (parts < 4) {
    unsigned octet = 0;
    auto [next, ec] = std::from_chars(p, end, octet);
    if (ec != std::errc() || next == p || octet > 255) return std::nullopt;
    value = (value << 8) | octet;
    ++parts;
    p = next;
    if (parts < 4) {
      if (p == end || *p != '.') return std::nullopt;
      ++p;
    }
  }
  if (p != end) return std::nullopt;
  return Ipv4{value};
}

std::string Ipv4::to_string() const {
  std::ostringstream os;
  os << ((value >> 24) & 255) << '.' << ((value >> 16) & 255) << '.' << ((value >> 8) & 255) << '.'
     << (value & 255);
  return os.str();
}

std::optional<Cidr> Cidr::parse(std::string_view text) {
  const auto slash = text.find('/');
  const auto ip = Ipv4::parse(text.substr(0, slash));
  if (!ip) return std::nullopt;
  int prefix = 32;
  if (slash != std::string_view::npos) {
    const auto rest = text.substr(slash + 1);
    auto [next, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), prefix);
    if (ec != std::errc() || next != rest.data() + rest.size() || prefix < 0 || prefix > 32)
      return std::nullopt;
  }
  return Cidr{*ip, prefix};
}

bool Cidr::contains(Ipv4 addr) const noexcept {
  if (prefix == 0) return true;
  const std::uint32_t mask = prefix == 32 ? 0xffffffffu : ~((1u << (32 - prefix)) - 1u);
  return (addr.value & mask) == (base.value & mask);
}

std::string normalize_path(std::string_view name) {
  auto out = lower(name);
  std::replace(out.begin(), out.end(), '\\', '/');
  return out;
}

std::string process_basename(std::string_view name) {
  const auto path = normalize_path(name);
  const auto slash = path.find_last_of('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

std::string strip_extension(std::string_view base) {
  const auto dot = base.find_last_of('.');
  if (dot == std::string_view::npos || dot == 0) return std::string(base);
  return std::string(base.substr(0, dot));
}

std::string normalized_name(EntityKind kind, std::string_view name) {
  switch (kind) {
    case EntityKind::Process: return process_basename(name);
    case EntityKind::File: return normalize_path(name);
    case EntityKind::Netflow: return lower(name);
  }
  return std::string(name);
}

bool glob_match(std::string_view pattern, std::string_view text) noexcept {
  std::size_t p = 0, t = 0, star = std::string_view::npos, mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

const AbstractionRules& AbstractionRules::defaults() {
  static const AbstractionRules rules = from_toml(kDefaultRulesToml, "<builtin>");
  return rules;
}

AbstractionRules AbstractionRules::from_toml(std::string_view text, std::string_view origin) {
  toml::table root;
  try {
    root = toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    throw Error("abs-rules", std::string(origin) + ": " + std::string(e.description()));
  }
  AbstractionRules out;
  out.version_ = root["version"].value_or(1);

  const std::array<std::pair<std::string_view, EntityKind>, 3> sections = {
      std::pair{std::string_view("process"), EntityKind::Process},
      std::pair{std::string_view("file"), EntityKind::File},
      std::pair{std::string_view("netflow"), EntityKind::Netflow}};
  for (const auto& [section, kind] : sections) {
    const auto* arr = root[section].as_array();
    if (arr == nullptr) continue;
    std::size_t i = 0;
    for (const auto& node : *arr) {
      const std::string where = std::string(section) + "[" + std::to_string(i++) + "]";
      const auto* t = node.as_table();
      if (t == nullptr) throw Error("abs-rules", where + ": expected table");
      Rule rule;
      rule.kind = kind;
      const auto type_name = (*t)["type"].value<std::string>();
      if (!type_name) throw Error("abs-rules", where + ".type: missing");
      const auto type = parse_abs(*type_name);
      if (!type) throw Error("abs-rules", where + ".type: unknown abstract type '" + *type_name + "'");
      if (parent_kind(*type) != kind)
        throw Error("abs-rules", where + ".type: '" + *type_name + "' is not a " + std::string(section) + " type");
      rule.type = *type;
      rule.names = string_list(*t, "names", where);
      rule.prefixes = string_list(*t, "prefixes", where);
      rule.globs = string_list(*t, "globs", where);
      for (const auto& c : string_list(*t, "cidrs", where)) {
        const auto cidr = Cidr::parse(c);
        if (!cidr) throw Error("abs-rules", where + ".cidrs: bad CIDR '" + c + "'");
        rule.cidrs.push_back(*cidr);
      }
      out.rules_.push_back(std::move(rule));
    }
  }
  return out;
}

AbstractionRules AbstractionRules::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("abs-rules", "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_toml(buf.str(), path);
}

AbsType AbstractionRules::abstract_node(EntityKind kind, std::string_view name,
                                        std::optional<Ipv4> addr) const {
  if (kind == EntityKind::Netflow) {
    if (!addr) addr = Ipv4::parse(name);
    if (addr) {
      for (const auto& r : rules_) {
        if (r.kind != kind) continue;
        for (const auto& c : r.cidrs)
          if (c.contains(*addr)) return r.type;
      }
    }
    return AbsType::PublicNetflow;
  }

  if (kind == EntityKind::Process) {
    const auto base = process_basename(name);
    const auto stem = strip_extension(base);
    for (const auto& r : rules_) {
      if (r.kind != kind) continue;
      for (const auto& n : r.names)
        if (n == base || n == stem) return r.type;
      for (const auto& g : r.globs)
        if (glob_match(g, base)) return r.type;
    }
    return AbsType::UnknownProcess;
  }

  const auto path = normalize_path(name);
  for (const auto& r : rules_) {
    if (r.kind != kind) continue;
    for (const auto& pfx : r.prefixes)
      if (prefix_at_boundary(path, pfx)) return r.type;
    for (const auto& g : r.globs)
      if (glob_match(g, path)) return r.type;
  }
  return AbsType::UnknownFile;
}

}  // namespace provhunt
