#include "provhunt/ppg.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace provhunt {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace detail {

namespace {

// header word: [abs:4|exp:1|version:16|date0:5|rsv:6]
constexpr std::uint32_t kAbsMask = 0xF;
constexpr std::uint32_t kExpBit = 1u << 4;
constexpr int kVersionShift = 5;
constexpr std::uint32_t kVersionMask = 0xFFFFu << kVersionShift;
constexpr int kDate0Shift = 21;

// sparse queue slot: [block:27|len:5]
constexpr int kLenBits = 5;
constexpr std::uint32_t kLenMask = (1u << kLenBits) - 1;

constexpr std::size_t kClassCount = 4;  // capacities 2, 4, 8, 16
constexpr std::uint32_t class_cap(std::size_t c) { return 2u << c; }
constexpr std::size_t class_for(std::uint32_t len) {
  std::size_t c = 0;
  while (class_cap(c) < len) ++c;
  return c;
}

constexpr std::int64_t kMsPerDay = codec::kMsPerDay;

}  // namespace

struct NodeRecord {
  std::uint32_t index = 0;
  std::uint32_t header = 0;
  std::uint32_t sbj_slot = 0;  // sparse: [block|len]; extended: index into ext
  std::uint32_t obj_slot = 0;  // sparse: [block|len]; extended: unused
};
static_assert(sizeof(NodeRecord) == 16);

struct ExtQueue {
  std::vector<codec::ExtSubjectWords> sbj;
  std::vector<std::uint64_t> obj;
};

/// Size-class slab of fixed-width words.
template <typename Word>
struct SlabPool {
  std::array<std::vector<Word>, kClassCount> blocks;
  std::array<std::vector<std::uint32_t>, kClassCount> free_list;

  std::uint32_t allocate(std::size_t c) {
    if (!free_list[c].empty()) {
      const auto b = free_list[c].back();
      free_list[c].pop_back();
      return b;
    }
    const auto b = static_cast<std::uint32_t>(blocks[c].size() / class_cap(c));
    if (b >= (1u << (32 - kLenBits))) throw Error("ppg", "sparse edge arena exhausted");
    blocks[c].resize(blocks[c].size() + class_cap(c));
    return b;
  }
  void release(std::size_t c, std::uint32_t b) { free_list[c].push_back(b); }
  Word* data(std::size_t c, std::uint32_t b) { return blocks[c].data() + std::size_t(b) * class_cap(c); }
  const Word* data(std::size_t c, std::uint32_t b) const {
    return blocks[c].data() + std::size_t(b) * class_cap(c);
  }
  std::size_t bytes() const {
    std::size_t n = 0;
    for (const auto& v : blocks) n += v.size() * sizeof(Word);
    for (const auto& f : free_list) n += f.size() * sizeof(std::uint32_t);
    return n;
  }
};

struct VersionKey {
  NodeIndex sbj;
  NodeIndex obj;
  std::uint8_t type;
  std::uint8_t dir;
  friend bool operator==(const VersionKey&, const VersionKey&) = default;
};
struct VersionKeyHash {
  std::size_t operator()(const VersionKey& k) const noexcept {
    std::uint64_t h = (std::uint64_t(k.sbj) << 32) | k.obj;
    h ^= (std::uint64_t(k.type) << 1 | k.dir) * 0x9e3779b97f4a7c15ULL;
    h ^= h >> 29;
    return static_cast<std::size_t>(h * 0xbf58476d1ce4e5b9ULL);
  }
};

struct PpgData {
  PpgConfig cfg;
  bool has_origin = false;
  std::int64_t origin_day = 0;
  std::size_t edge_count = 0;
  std::vector<NodeRecord> nodes;
  SlabPool<std::uint64_t> sbj_pool;
  SlabPool<std::uint32_t> obj_pool;
  std::vector<ExtQueue> ext;
  std::vector<std::string> ids;
  std::vector<std::string> names;
  std::unordered_map<std::string, NodeIndex> id_map;
  std::unordered_map<VersionKey, std::uint16_t, VersionKeyHash> last_version;

  // --- header helpers
  static AbsType abs_of(const NodeRecord& n) { return static_cast<AbsType>(n.header & kAbsMask); }
  static bool exp_of(const NodeRecord& n) { return (n.header & kExpBit) != 0; }
  static std::uint16_t version_of(const NodeRecord& n) {
    return static_cast<std::uint16_t>((n.header & kVersionMask) >> kVersionShift);
  }
  static void set_version(NodeRecord& n, std::uint16_t v) {
    n.header = (n.header & ~kVersionMask) | (std::uint32_t(v) << kVersionShift);
  }
  static std::uint32_t len_of(std::uint32_t slot) { return slot & kLenMask; }
  static std::uint32_t block_of(std::uint32_t slot) { return slot >> kLenBits; }
  static std::uint32_t make_slot(std::uint32_t block, std::uint32_t len) { return (block << kLenBits) | len; }

  std::uint32_t sbj_len(const NodeRecord& n) const {
    return exp_of(n) ? static_cast<std::uint32_t>(ext[n.sbj_slot].sbj.size()) : len_of(n.sbj_slot);
  }
  std::uint32_t obj_len(const NodeRecord& n) const {
    return exp_of(n) ? static_cast<std::uint32_t>(ext[n.sbj_slot].obj.size()) : len_of(n.obj_slot);
  }

  const NodeRecord& at(NodeIndex i) const {
    if (i >= nodes.size()) throw Error("ppg", "node index out of range: " + std::to_string(i));
    return nodes[i];
  }

  // --- decoding
  codec::SubjectEdge subject_edge(const NodeRecord& n, std::uint32_t k) const {
    if (exp_of(n)) return codec::decode_ext_subject(ext[n.sbj_slot].sbj[k]);
    const auto len = len_of(n.sbj_slot);
    return codec::decode_sparse_subject(sbj_pool.data(class_for(len), block_of(n.sbj_slot))[k]);
  }
  codec::ObjectEdge object_edge(const NodeRecord& n, std::uint32_t k) const {
    if (exp_of(n)) return codec::decode_ext_object(ext[n.sbj_slot].obj[k]);
    const auto len = len_of(n.obj_slot);
    return codec::decode_sparse_object(obj_pool.data(class_for(len), block_of(n.obj_slot))[k]);
  }

  std::int64_t absolute_ts(const codec::SubjectEdge& e) const {
    return (origin_day + e.date) * kMsPerDay + e.ts;
  }

  // --- mutation
  NodeIndex get_or_create(const std::string& id, std::string_view name, AbsType abs, std::uint8_t date) {
    if (auto it = id_map.find(id); it != id_map.end()) return it->second;
    if (nodes.size() >= std::numeric_limits<NodeIndex>::max())
      throw Error("ppg", "node index space exhausted (2^32 nodes)");
    const auto idx = static_cast<NodeIndex>(nodes.size());
    NodeRecord rec;
    rec.index = idx;
    rec.header = std::uint32_t(abs_code(abs)) | (std::uint32_t(date & 0x1F) << kDate0Shift);
    nodes.push_back(rec);
    ids.push_back(id);
    names.emplace_back(name);
    id_map.emplace(id, idx);
    return idx;
  }

  template <typename Word>
  void sparse_append(SlabPool<Word>& pool, std::uint32_t& slot, Word w) {
    const auto len = len_of(slot);
    if (len == 0) {
      const auto b = pool.allocate(0);
      pool.data(0, b)[0] = w;
      slot = make_slot(b, 1);
      return;
    }
    const auto c = class_for(len);
    if (len < class_cap(c)) {
      pool.data(c, block_of(slot))[len] = w;
      slot = make_slot(block_of(slot), len + 1);
      return;
    }
    const auto nb = pool.allocate(c + 1);
    Word* dst = pool.data(c + 1, nb);
    std::copy_n(pool.data(c, block_of(slot)), len, dst);
    dst[len] = w;
    pool.release(c, block_of(slot));
    slot = make_slot(nb, len + 1);
  }

  void promote(NodeIndex i) {
    NodeRecord& n = nodes[i];
    if (exp_of(n)) return;
    ExtQueue q;
    const auto sl = len_of(n.sbj_slot);
    const auto ol = len_of(n.obj_slot);
    q.sbj.reserve(std::max<std::size_t>(2 * sl, 32));
    q.obj.reserve(std::max<std::size_t>(2 * ol, 32));
    for (std::uint32_t k = 0; k < sl; ++k) q.sbj.push_back(codec::encode_ext_subject(subject_edge(n, k)));
    for (std::uint32_t k = 0; k < ol; ++k) q.obj.push_back(codec::encode_ext_object(object_edge(n, k)));
    if (sl > 0) sbj_pool.release(class_for(sl), block_of(n.sbj_slot));
    if (ol > 0) obj_pool.release(class_for(ol), block_of(n.obj_slot));
    if (ext.size() >= std::numeric_limits<std::uint32_t>::max()) throw Error("ppg", "extended arena exhausted");
    n.sbj_slot = static_cast<std::uint32_t>(ext.size());
    n.obj_slot = 0;
    n.header |= kExpBit;
    ext.push_back(std::move(q));
  }

  bool sparse_full(const NodeRecord& n) const {
    return len_of(n.sbj_slot) + len_of(n.obj_slot) >= cfg.sparse_queue_cap;
  }

  void append_subject(NodeIndex i, const codec::SubjectEdge& e) {
    if (!exp_of(nodes[i])) {
      const bool fits = codec::delta_fits(e.obj_delta, codec::kSparseObjDeltaBits) &&
                        e.version <= 0xFF;
      if (fits && !sparse_full(nodes[i])) {
        sparse_append(sbj_pool, nodes[i].sbj_slot, codec::encode_sparse_subject(e));
        return;
      }
      promote(i);
    }
    if (!codec::delta_fits(e.obj_delta, codec::kExtObjDeltaBits))
      throw Error("ppg", "object distance exceeds 27-bit extended field");
    ext[nodes[i].sbj_slot].sbj.push_back(codec::encode_ext_subject(e));
  }

  void append_object(NodeIndex i, const codec::ObjectEdge& e) {
    if (!exp_of(nodes[i])) {
      if (codec::delta_fits(e.sbj_delta, codec::kSparseSbjDeltaBits) && !sparse_full(nodes[i])) {
        sparse_append(obj_pool, nodes[i].obj_slot, codec::encode_sparse_object(e));
        return;
      }
      promote(i);
    }
    ext[nodes[i].sbj_slot].obj.push_back(codec::encode_ext_object(e));
  }

  void bump_version(NodeIndex i) {
    NodeRecord& n = nodes[i];
    const std::uint16_t cap = exp_of(n) ? 0xFFFF : 0xFF;
    const auto v = version_of(n);
    if (v < cap) set_version(n, static_cast<std::uint16_t>(v + 1));
  }
};

}  // namespace detail

using detail::PpgData;

// ---------------------------------------------------------------------------
// PpgView

std::size_t PpgView::node_count() const noexcept { return data_ ? data_->nodes.size() : 0; }
std::size_t PpgView::edge_count() const noexcept { return data_ ? data_->edge_count : 0; }
std::int64_t PpgView::origin_day() const noexcept { return data_ ? data_->origin_day : 0; }

NodeInfo PpgView::node(NodeIndex i) const {
  const auto& n = data_->at(i);
  NodeInfo info;
  info.index = n.index;
  info.abs = PpgData::abs_of(n);
  info.exp = PpgData::exp_of(n);
  info.version = PpgData::version_of(n);
  info.date0 = static_cast<std::uint8_t>((n.header >> 21) & 0x1F);
  info.sbj_edges = data_->sbj_len(n);
  info.obj_edges = data_->obj_len(n);
  return info;
}

AbsType PpgView::abs(NodeIndex i) const { return PpgData::abs_of(data_->at(i)); }
bool PpgView::exp(NodeIndex i) const { return PpgData::exp_of(data_->at(i)); }
const std::string& PpgView::name(NodeIndex i) const {
  data_->at(i);
  return data_->names[i];
}
const std::string& PpgView::id(NodeIndex i) const {
  data_->at(i);
  return data_->ids[i];
}

std::optional<NodeIndex> PpgView::lookup(std::string_view id) const {
  if (!data_) return std::nullopt;
  const auto it = data_->id_map.find(std::string(id));
  if (it == data_->id_map.end()) return std::nullopt;
  return it->second;
}

std::vector<NeighborEdge> PpgView::neighbors(NodeIndex i, EdgeRole role, TimeOrder order) const {
  const auto& d = *data_;
  const auto& n = d.at(i);
  std::vector<NeighborEdge> out;
  if (role == EdgeRole::Out) {
    const auto len = d.sbj_len(n);
    out.reserve(len);
    for (std::uint32_t k = 0; k < len; ++k) {
      const auto e = d.subject_edge(n, k);
      out.push_back({static_cast<NodeIndex>(std::int64_t(i) + e.obj_delta), op_from_wire(e.type),
                     static_cast<Direction>(e.dir), d.absolute_ts(e), e.version});
    }
  } else {
    const auto len = d.obj_len(n);
    out.reserve(len);
    // The j-th back-reference from subject s pairs with the j-th edge in s's
    // queue that targets this node: both queues are appended together.
    std::unordered_map<NodeIndex, std::pair<std::vector<codec::SubjectEdge>, std::size_t>> per_subject;
    for (std::uint32_t k = 0; k < len; ++k) {
      const auto b = d.object_edge(n, k);
      const auto s = static_cast<NodeIndex>(std::int64_t(i) + b.sbj_delta);
      auto [it, fresh] = per_subject.try_emplace(s);
      if (fresh) {
        const auto& sn = d.at(s);
        const auto slen = d.sbj_len(sn);
        for (std::uint32_t q = 0; q < slen; ++q) {
          const auto se = d.subject_edge(sn, q);
          if (std::int64_t(s) + se.obj_delta == std::int64_t(i)) it->second.first.push_back(se);
        }
      }
      auto& [list, cursor] = it->second;
      if (cursor >= list.size()) throw Error("ppg", "dangling back-reference on node " + std::to_string(i));
      const auto& se = list[cursor++];
      out.push_back({s, op_from_wire(se.type), static_cast<Direction>(se.dir), d.absolute_ts(se), se.version});
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const NeighborEdge& a, const NeighborEdge& b) { return a.ts < b.ts; });
  if (order == TimeOrder::TimeDesc) std::reverse(out.begin(), out.end());
  return out;
}

std::vector<DecodedEdge> PpgView::edges() const {
  std::vector<DecodedEdge> out;
  if (!data_) return out;
  const auto& d = *data_;
  out.reserve(d.edge_count);
  for (NodeIndex i = 0; i < d.nodes.size(); ++i) {
    const auto& n = d.nodes[i];
    const auto len = d.sbj_len(n);
    for (std::uint32_t k = 0; k < len; ++k) {
      const auto e = d.subject_edge(n, k);
      out.push_back({i, static_cast<NodeIndex>(std::int64_t(i) + e.obj_delta), op_from_wire(e.type),
                     static_cast<Direction>(e.dir), d.absolute_ts(e)});
    }
  }
  return out;
}

MemoryReport PpgView::memory_report() const {
  MemoryReport r;
  r.bytes_per_node = sizeof(detail::NodeRecord);
  r.bytes_per_sparse_subject_edge = sizeof(std::uint64_t);
  r.bytes_per_sparse_object_edge = sizeof(std::uint32_t);
  r.bytes_per_ext_subject_edge = sizeof(codec::ExtSubjectWords);
  r.bytes_per_ext_object_edge = sizeof(std::uint64_t);
  r.fixed_overhead = sizeof(PpgData);
  if (!data_) {
    r.total_bytes = r.fixed_overhead;
    return r;
  }
  const auto& d = *data_;
  r.node_count = d.nodes.size();
  r.edge_count = d.edge_count;
  for (const auto& n : d.nodes) {
    if (PpgData::exp_of(n)) {
      ++r.exp_node_count;
      r.node_bytes_extended += sizeof(detail::NodeRecord);
    } else {
      r.node_bytes_sparse += sizeof(detail::NodeRecord);
    }
  }
  r.node_bytes_extended += d.ext.size() * sizeof(detail::ExtQueue);
  r.sparse_subject_bytes = d.sbj_pool.bytes();
  r.sparse_object_bytes = d.obj_pool.bytes();
  for (const auto& q : d.ext) {
    r.ext_subject_bytes += q.sbj.size() * sizeof(codec::ExtSubjectWords);
    r.ext_object_bytes += q.obj.size() * sizeof(std::uint64_t);
  }
  r.total_bytes = r.fixed_overhead + r.node_bytes_sparse + r.node_bytes_extended + r.sparse_subject_bytes +
                  r.sparse_object_bytes + r.ext_subject_bytes + r.ext_object_bytes;

  for (const auto& [id, idx] : d.id_map)
    r.id_map_bytes += sizeof(std::string) + id.size() + sizeof(NodeIndex) + 2 * sizeof(void*);
  for (std::size_t i = 0; i < d.names.size(); ++i)
    r.name_table_bytes += 2 * sizeof(std::string) + d.names[i].size() + d.ids[i].size();
  r.version_index_bytes = d.last_version.size() * (sizeof(detail::VersionKey) + sizeof(std::uint16_t) + sizeof(void*));
  return r;
}

// ---------------------------------------------------------------------------
// Ppg

Ppg::Ppg(PpgConfig cfg, const AbstractionRules& rules)
    : data_(std::make_shared<PpgData>()), rules_(std::make_shared<AbstractionRules>(rules)) {
  if (cfg.sparse_queue_cap == 0 || cfg.sparse_queue_cap > 16)
    throw Error("ppg", "sparse_queue_cap must be in [1, 16]");
  data_->cfg = cfg;
}

const PpgConfig& Ppg::config() const noexcept { return data_->cfg; }

PpgData& Ppg::mutable_data() {
  if (data_.use_count() > 1) data_ = std::make_shared<PpgData>(*data_);
  return *data_;
}

AddResult Ppg::add_event(const AuditEvent& e) {
  auto& d = mutable_data();
  if (e.ts < 0) throw Error("ppg", "negative timestamp");
  const std::int64_t day = e.ts / codec::kMsPerDay;
  if (!d.has_origin) {
    d.has_origin = true;
    d.origin_day = day;
  }
  const std::int64_t date = day - d.origin_day;
  if (date < 0 || date > codec::kMaxDate)
    throw Error("ppg", "event at relative day " + std::to_string(date) +
                           " outside the 5-bit date range [0, 31] of this graph");
  const auto date8 = static_cast<std::uint8_t>(date);

  const NodeIndex s = d.get_or_create(e.sbj_id, e.sbj_name,
                                      rules_->abstract_node(EntityKind::Process, e.sbj_name), date8);
  const NodeIndex o = d.get_or_create(e.obj_id, e.obj_name,
                                      rules_->abstract_node(e.obj_kind, e.obj_name, e.obj_addr), date8);
  const auto type = wire_code(e.op);
  const auto dir = static_cast<std::uint8_t>(e.dir);

  const detail::VersionKey key{s, o, type, dir};
  if (d.cfg.versioning_enabled) {
    const auto it = d.last_version.find(key);
    if (it != d.last_version.end() && it->second == PpgData::version_of(d.nodes[o]))
      return AddResult::SuppressedByVersion;
  }

  // Information flowing into the object advances its version.
  if (e.dir == Direction::SbjToObj) d.bump_version(o);
  const auto version = PpgData::version_of(d.nodes[o]);

  codec::SubjectEdge se;
  se.obj_delta = static_cast<std::int32_t>(std::int64_t(o) - std::int64_t(s));
  se.type = type;
  se.dir = dir;
  se.ts = static_cast<std::uint32_t>(e.ts % codec::kMsPerDay);
  se.date = date8;
  se.version = version;
  d.append_subject(s, se);
  d.append_object(o, codec::ObjectEdge{static_cast<std::int32_t>(std::int64_t(s) - std::int64_t(o)), type, dir});
  ++d.edge_count;

  if (d.cfg.versioning_enabled) d.last_version[key] = version;
  return AddResult::Inserted;
}

void Ppg::promote(NodeIndex i) {
  auto& d = mutable_data();
  d.at(i);
  d.promote(i);
}

Ppg build_ppg(const std::vector<AuditEvent>& events, PpgConfig cfg, const AbstractionRules& rules) {
  Ppg g(cfg, rules);
  for (const auto& e : events) g.add_event(e);
  return g;
}

// ---------------------------------------------------------------------------
// Checkpoint
//
//   magic "PPGCKPT\0", u32 format version (1)
//   u8 versioning_enabled, u32 sparse_queue_cap, u8 has_origin, i64 origin_day, u64 edge_count
//   u64 node count, NodeRecord[count]
//   sparse subject pool: 4 x (u64 n, u64[n]), 4 x (u64 n, u32[n] free list)
//   sparse object pool:  4 x (u64 n, u32[n]), 4 x (u64 n, u32[n] free list)
//   u64 ext count, per queue: u64 n, u32[3n], u64 m, u64[m]
//   per node: u32 len + id bytes, u32 len + name bytes
//   u64 version entries, per entry: u32 sbj, u32 obj, u8 type, u8 dir, u16 version
// All integers little-endian.

namespace {

constexpr char kMagic[8] = {'P', 'P', 'G', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}
  template <typename T>
  void pod(const T& v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  template <typename T>
  void vec(const std::vector<T>& v) {
    pod<std::uint64_t>(v.size());
    if (!v.empty()) os_.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(T)));
  }
  void str(const std::string& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    os_.write(s.data(), std::streamsize(s.size()));
  }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}
  template <typename T>
  T pod() {
    T v{};
    is_.read(reinterpret_cast<char*>(&v), sizeof(T));
    check();
    return v;
  }
  template <typename T>
  std::vector<T> vec() {
    const auto n = pod<std::uint64_t>();
    if (n > (std::uint64_t{1} << 36) / sizeof(T)) throw Error("ppg", "checkpoint: implausible array length");
    std::vector<T> v(n);
    if (n) is_.read(reinterpret_cast<char*>(v.data()), std::streamsize(n * sizeof(T)));
    check();
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    std::string s(n, '\0');
    is_.read(s.data(), n);
    check();
    return s;
  }

 private:
  void check() {
    if (!is_) throw Error("ppg", "checkpoint truncated");
  }
  std::istream& is_;
};

}  // namespace

void Ppg::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("ppg", "cannot write " + path);
  const auto& d = *data_;
  Writer w(os);
  os.write(kMagic, sizeof kMagic);
  w.pod(kPpgFormatVersion);
  w.pod<std::uint8_t>(d.cfg.versioning_enabled);
  w.pod<std::uint32_t>(d.cfg.sparse_queue_cap);
  w.pod<std::uint8_t>(d.has_origin);
  w.pod<std::int64_t>(d.origin_day);
  w.pod<std::uint64_t>(d.edge_count);
  w.vec(d.nodes);
  for (const auto& b : d.sbj_pool.blocks) w.vec(b);
  for (const auto& f : d.sbj_pool.free_list) w.vec(f);
  for (const auto& b : d.obj_pool.blocks) w.vec(b);
  for (const auto& f : d.obj_pool.free_list) w.vec(f);
  w.pod<std::uint64_t>(d.ext.size());
  for (const auto& q : d.ext) {
    w.vec(q.sbj);
    w.vec(q.obj);
  }
  for (std::size_t i = 0; i < d.nodes.size(); ++i) {
    w.str(d.ids[i]);
    w.str(d.names[i]);
  }
  w.pod<std::uint64_t>(d.last_version.size());
  for (const auto& [k, v] : d.last_version) {
    w.pod(k.sbj);
    w.pod(k.obj);
    w.pod(k.type);
    w.pod(k.dir);
    w.pod(v);
  }
  if (!os) throw Error("ppg", "write failed: " + path);
}

Ppg Ppg::load(const std::string& path, const AbstractionRules& rules) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("ppg", "cannot open " + path);
  char magic[sizeof kMagic];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw Error("ppg", path + ": not a PPG checkpoint");
  Reader r(is);
  if (r.pod<std::uint32_t>() != kPpgFormatVersion) throw Error("ppg", path + ": unsupported checkpoint version");
  PpgConfig cfg;
  cfg.versioning_enabled = r.pod<std::uint8_t>() != 0;
  cfg.sparse_queue_cap = r.pod<std::uint32_t>();
  Ppg g(cfg, rules);
  auto& d = *g.data_;
  d.has_origin = r.pod<std::uint8_t>() != 0;
  d.origin_day = r.pod<std::int64_t>();
  d.edge_count = r.pod<std::uint64_t>();
  d.nodes = r.vec<detail::NodeRecord>();
  for (auto& b : d.sbj_pool.blocks) b = r.vec<std::uint64_t>();
  for (auto& f : d.sbj_pool.free_list) f = r.vec<std::uint32_t>();
  for (auto& b : d.obj_pool.blocks) b = r.vec<std::uint32_t>();
  for (auto& f : d.obj_pool.free_list) f = r.vec<std::uint32_t>();
  d.ext.resize(r.pod<std::uint64_t>());
  for (auto& q : d.ext) {
    q.sbj = r.vec<codec::ExtSubjectWords>();
    q.obj = r.vec<std::uint64_t>();
  }
  d.ids.reserve(d.nodes.size());
  d.names.reserve(d.nodes.size());
  for (std::size_t i = 0; i < d.nodes.size(); ++i) {
    d.ids.push_back(r.str());
    d.names.push_back(r.str());
    d.id_map.emplace(d.ids.back(), static_cast<NodeIndex>(i));
  }
  const auto nv = r.pod<std::uint64_t>();
  for (std::uint64_t k = 0; k < nv; ++k) {
    detail::VersionKey key{};
    key.sbj = r.pod<NodeIndex>();
    key.obj = r.pod<NodeIndex>();
    key.type = r.pod<std::uint8_t>();
    key.dir = r.pod<std::uint8_t>();
    d.last_version[key] = r.pod<std::uint16_t>();
  }
  return g;
}

}  // namespace provhunt
