#pragma once

// Fixed-width packed edge records.
//
//   sparse subject edge   one 64-bit word  [delta:11|type:4|dir:1|ts:27|date:5|ver:8|rsv:8]
//   sparse object edge    one 32-bit word  [delta:16|type:4|dir:1|rsv:11]
//   extended subject edge three 32-bit words
//                           w0 [delta:27|type:4|dir:1]  w1 [ts:27|date:5]  w2 [ver:16|rsv:16]
//   extended object edge  one 64-bit word  [delta:32|type:4|dir:1|rsv:27]
//
// Deltas are two's-complement. Fields are listed from the least significant bit.

#include <array>
#include <cstdint>

namespace provhunt::codec {

inline constexpr int kSparseObjDeltaBits = 11;
inline constexpr int kSparseSbjDeltaBits = 16;
inline constexpr int kExtObjDeltaBits = 27;
inline constexpr int kExtSbjDeltaBits = 32;
inline constexpr int kTimestampBits = 27;
inline constexpr int kDateBits = 5;
inline constexpr int kSparseVersionBits = 8;
inline constexpr int kExtVersionBits = 16;

inline constexpr std::uint32_t kMsPerDay = 86'400'000;
inline constexpr std::uint32_t kMaxDate = (1u << kDateBits) - 1;

constexpr std::int64_t delta_min(int bits) { return -(std::int64_t{1} << (bits - 1)); }
constexpr std::int64_t delta_max(int bits) { return (std::int64_t{1} << (bits - 1)) - 1; }
constexpr bool delta_fits(std::int64_t delta, int bits) {
  return delta >= delta_min(bits) && delta <= delta_max(bits);
}

/// Decoded full edge record as held in a subject's queue.
struct SubjectEdge {
  std::int32_t obj_delta = 0;
  std::uint8_t type = 0;  // EdgeOp wire code
  std::uint8_t dir = 0;
  std::uint32_t ts = 0;   // milliseconds within the day
  std::uint8_t date = 0;  // relative day
  std::uint16_t version = 0;
  friend bool operator==(const SubjectEdge&, const SubjectEdge&) = default;
};

/// Decoded back-reference as held in an object's queue.
struct ObjectEdge {
  std::int32_t sbj_delta = 0;
  std::uint8_t type = 0;
  std::uint8_t dir = 0;
  friend bool operator==(const ObjectEdge&, const ObjectEdge&) = default;
};

using ExtSubjectWords = std::array<std::uint32_t, 3>;

namespace detail {
constexpr std::uint64_t mask(int bits) { return bits >= 64 ? ~0ULL : ((1ULL << bits) - 1); }
constexpr std::int32_t sign_extend(std::uint64_t raw, int bits) {
  const std::uint64_t m = 1ULL << (bits - 1);
  return static_cast<std::int32_t>(static_cast<std::int64_t>((raw ^ m) - m));
}
}  // namespace detail

/// Callers must check delta_fits(e.obj_delta, kSparseObjDeltaBits) and field ranges first.
constexpr std::uint64_t encode_sparse_subject(const SubjectEdge& e) {
  using detail::mask;
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(e.obj_delta)) & mask(11)) |
         (std::uint64_t(e.type & 0xF) << 11) | (std::uint64_t(e.dir & 1) << 15) |
         ((std::uint64_t(e.ts) & mask(27)) << 16) | (std::uint64_t(e.date & 0x1F) << 43) |
         (std::uint64_t(e.version & 0xFF) << 48);
}

constexpr SubjectEdge decode_sparse_subject(std::uint64_t w) {
  using detail::mask;
  SubjectEdge e;
  e.obj_delta = detail::sign_extend(w & mask(11), 11);
  e.type = static_cast<std::uint8_t>((w >> 11) & 0xF);
  e.dir = static_cast<std::uint8_t>((w >> 15) & 1);
  e.ts = static_cast<std::uint32_t>((w >> 16) & mask(27));
  e.date = static_cast<std::uint8_t>((w >> 43) & 0x1F);
  e.version = static_cast<std::uint16_t>((w >> 48) & 0xFF);
  return e;
}

constexpr std::uint32_t encode_sparse_object(const ObjectEdge& e) {
  return (static_cast<std::uint32_t>(e.sbj_delta) & 0xFFFFu) | (std::uint32_t(e.type & 0xF) << 16) |
         (std::uint32_t(e.dir & 1) << 20);
}

constexpr ObjectEdge decode_sparse_object(std::uint32_t w) {
  ObjectEdge e;
  e.sbj_delta = detail::sign_extend(w & 0xFFFFu, 16);
  e.type = static_cast<std::uint8_t>((w >> 16) & 0xF);
  e.dir = static_cast<std::uint8_t>((w >> 20) & 1);
  return e;
}

constexpr ExtSubjectWords encode_ext_subject(const SubjectEdge& e) {
  using detail::mask;
  return {static_cast<std::uint32_t>((static_cast<std::uint32_t>(e.obj_delta) & mask(27)) |
                                     (std::uint32_t(e.type & 0xF) << 27) | (std::uint32_t(e.dir & 1) << 31)),
          static_cast<std::uint32_t>((e.ts & mask(27)) | (std::uint32_t(e.date & 0x1F) << 27)),
          static_cast<std::uint32_t>(e.version)};
}

constexpr SubjectEdge decode_ext_subject(const ExtSubjectWords& w) {
  using detail::mask;
  SubjectEdge e;
  e.obj_delta = detail::sign_extend(w[0] & mask(27), 27);
  e.type = static_cast<std::uint8_t>((w[0] >> 27) & 0xF);
  e.dir = static_cast<std::uint8_t>((w[0] >> 31) & 1);
  e.ts = static_cast<std::uint32_t>(w[1] & mask(27));
  e.date = static_cast<std::uint8_t>((w[1] >> 27) & 0x1F);
  e.version = static_cast<std::uint16_t>(w[2] & 0xFFFF);
  return e;
}

constexpr std::uint64_t encode_ext_object(const ObjectEdge& e) {
  return std::uint64_t(static_cast<std::uint32_t>(e.sbj_delta)) | (std::uint64_t(e.type & 0xF) << 32) |
         (std::uint64_t(e.dir & 1) << 36);
}

constexpr ObjectEdge decode_ext_object(std::uint64_t w) {
  ObjectEdge e;
  e.sbj_delta = static_cast<std::int32_t>(static_cast<std::uint32_t>(w & 0xFFFFFFFFULL));
  e.type = static_cast<std::uint8_t>((w >> 32) & 0xF);
  e.dir = static_cast<std::uint8_t>((w >> 36) & 1);
  return e;
}

static_assert(decode_sparse_subject(encode_sparse_subject({-1024, 15, 1, 86'399'999, 31, 255})) ==
              SubjectEdge{-1024, 15, 1, 86'399'999, 31, 255});
static_assert(decode_sparse_object(encode_sparse_object({-32768, 9, 1})) == ObjectEdge{-32768, 9, 1});

}  // namespace provhunt::codec
