#pragma once

// Domain vocabulary shared by every provhunt module: entity kinds, edge
// operations with their 4-bit wire codes, the 14 abstract node types and
// the name -> abstract type mapping.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace provhunt {

/// Stage-tagged error used across the library.
class Error : public std::runtime_error {
 public:
  Error(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

enum class EntityKind : std::uint8_t { Process = 0, File = 1, Netflow = 2 };

inline constexpr std::size_t kEntityKindCount = 3;

enum class EdgeOp : std::uint8_t {
  Fork,
  Exec,
  Modify,
  Open,
  Create,
  Read,
  Write,
  Rename,
  Link,
  Unlink,
  Delete,
  Load,
  Connect,
  Start,
  Send,
  Recv,
  Message,
};

inline constexpr std::size_t kEdgeOpCount = 17;
inline constexpr std::size_t kWireCodeCount = 16;

inline constexpr std::array<EdgeOp, kEdgeOpCount> kAllEdgeOps = {
    EdgeOp::Fork,   EdgeOp::Exec,   EdgeOp::Modify,  EdgeOp::Open,
    EdgeOp::Create, EdgeOp::Read,   EdgeOp::Write,   EdgeOp::Rename,
    EdgeOp::Link,   EdgeOp::Unlink, EdgeOp::Delete,  EdgeOp::Load,
    EdgeOp::Connect, EdgeOp::Start, EdgeOp::Send,    EdgeOp::Recv,
    EdgeOp::Message};

/// 4-bit wire code. `start` shares the code of `connect`.
constexpr std::uint8_t wire_code(EdgeOp op) noexcept {
  const auto raw = static_cast<std::uint8_t>(op);
  return raw <= static_cast<std::uint8_t>(EdgeOp::Connect) ? raw : static_cast<std::uint8_t>(raw - 1);
}

/// Canonical op of a wire code; throws on codes >= 16.
EdgeOp op_from_wire(std::uint8_t code);

std::string_view op_name(EdgeOp op) noexcept;
std::optional<EdgeOp> parse_op(std::string_view name);

std::string_view kind_name(EntityKind kind) noexcept;
std::optional<EntityKind> parse_kind(std::string_view name);

/// Whether `op` is a legal Process -> `obj_kind` interaction.
bool op_legal_for(EdgeOp op, EntityKind obj_kind) noexcept;

enum class AbsType : std::uint8_t {
  SysProcess = 0,
  UsrProcess,
  ServProcess,
  UtilProcess,
  WebProcess,
  UnknownProcess,
  LibFile,
  SysFile,
  CfgFile,
  UsrFile,
  TmpFile,
  UnknownFile,
  PrivateNetflow,
  PublicNetflow,
};

inline constexpr std::size_t kAbsTypeCount = 14;

constexpr std::uint8_t abs_code(AbsType t) noexcept { return static_cast<std::uint8_t>(t); }
AbsType abs_from_code(std::uint8_t code);

constexpr EntityKind parent_kind(AbsType t) noexcept {
  const auto c = abs_code(t);
  if (c <= abs_code(AbsType::UnknownProcess)) return EntityKind::Process;
  if (c <= abs_code(AbsType::UnknownFile)) return EntityKind::File;
  return EntityKind::Netflow;
}

std::string_view abs_name(AbsType t) noexcept;
std::optional<AbsType> parse_abs(std::string_view name);

/// Bitmask over AbsType codes.
class AbsSet {
 public:
  constexpr AbsSet() = default;
  constexpr AbsSet(std::initializer_list<AbsType> types) {
    for (auto t : types) bits_ |= std::uint16_t(1u << abs_code(t));
  }
  constexpr bool contains(AbsType t) const noexcept { return (bits_ >> abs_code(t)) & 1u; }
  constexpr void insert(AbsType t) noexcept { bits_ |= std::uint16_t(1u << abs_code(t)); }
  constexpr std::size_t size() const noexcept { return static_cast<std::size_t>(__builtin_popcount(bits_)); }
  constexpr bool disjoint(AbsSet o) const noexcept { return (bits_ & o.bits_) == 0; }
  constexpr std::uint16_t bits() const noexcept { return bits_; }

 private:
  std::uint16_t bits_ = 0;
};

struct AbsSets {
  AbsSet processes;
  AbsSet files;
  AbsSet netflows;
};

/// The P / F / N partition of the abstract types.
AbsSets abs_sets() noexcept;

/// IPv4 address in host byte order.
struct Ipv4 {
  std::uint32_t value = 0;
  static std::optional<Ipv4> parse(std::string_view text);
  std::string to_string() const;
  friend bool operator==(Ipv4, Ipv4) = default;
};

struct Cidr {
  Ipv4 base;
  int prefix = 32;
  static std::optional<Cidr> parse(std::string_view text);
  bool contains(Ipv4 addr) const noexcept;
};

/// Lowercase, backslashes folded to '/'.
std::string normalize_path(std::string_view name);
/// Lowercase basename of a process image path.
std::string process_basename(std::string_view name);
/// Basename without its last extension ("gup.exe" -> "gup").
std::string strip_extension(std::string_view base);
/// Key used for name comparisons: process basename, file path, or netflow text.
std::string normalized_name(EntityKind kind, std::string_view name);

/// Case-sensitive glob with '*' and '?'. Callers normalize case first.
bool glob_match(std::string_view pattern, std::string_view text) noexcept;

/// Ordered first-match-wins abstraction table.
class AbstractionRules {
 public:
  struct Rule {
    EntityKind kind = EntityKind::Process;
    AbsType type = AbsType::UnknownProcess;
    std::vector<std::string> names;     // process: exact basename or stem
    std::vector<std::string> prefixes;  // file: path prefix at a component boundary
    std::vector<std::string> globs;     // process basename / file path
    std::vector<Cidr> cidrs;            // netflow
  };

  /// Built-in defaults (same content as config/abstraction_rules.toml).
  static const AbstractionRules& defaults();
  static AbstractionRules from_toml(std::string_view text, std::string_view origin = "<string>");
  static AbstractionRules load(const std::string& path);

  /// Total: falls back to unknown_process / unknown_file / public_netflow.
  AbsType abstract_node(EntityKind kind, std::string_view name,
                        std::optional<Ipv4> addr = std::nullopt) const;

  const std::vector<Rule>& rules() const noexcept { return rules_; }
  int version() const noexcept { return version_; }

 private:
  std::vector<Rule> rules_;
  int version_ = 1;
};

inline AbsType abstract_node(EntityKind kind, std::string_view name, std::optional<Ipv4> addr,
                             const AbstractionRules& rules) {
  return rules.abstract_node(kind, name, addr);
}

}  // namespace provhunt
