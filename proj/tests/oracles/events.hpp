#pragma once

// Small builders for hand-written and randomized event streams.

#include <random>
#include <string>
#include <vector>

#include "provhunt/ingest.hpp"

namespace provhunt::testing {

inline AuditEvent ev(std::int64_t ts, std::string sbj, EdgeOp op, std::string obj,
                     EntityKind kind = EntityKind::File, Direction dir = Direction::SbjToObj) {
  AuditEvent e;
  e.ts = ts;
  e.sbj_id = sbj;
  e.sbj_name = sbj;
  e.obj_id = obj;
  e.obj_name = obj;
  e.obj_kind = kind;
  e.op = op;
  e.dir = dir;
  if (kind == EntityKind::Netflow) e.obj_addr = Ipv4::parse(obj);
  return e;
}

inline AuditEvent read(std::int64_t ts, std::string sbj, std::string file) {
  return ev(ts, std::move(sbj), EdgeOp::Read, std::move(file), EntityKind::File, Direction::ObjToSbj);
}
inline AuditEvent write(std::int64_t ts, std::string sbj, std::string file) {
  return ev(ts, std::move(sbj), EdgeOp::Write, std::move(file));
}
inline AuditEvent fork(std::int64_t ts, std::string parent, std::string child) {
  return ev(ts, std::move(parent), EdgeOp::Fork, std::move(child), EntityKind::Process);
}
inline AuditEvent send(std::int64_t ts, std::string sbj, std::string addr) {
  return ev(ts, std::move(sbj), EdgeOp::Send, std::move(addr), EntityKind::Netflow);
}
inline AuditEvent recv(std::int64_t ts, std::string sbj, std::string addr) {
  return ev(ts, std::move(sbj), EdgeOp::Recv, std::move(addr), EntityKind::Netflow, Direction::ObjToSbj);
}

/// Random legal event over small entity pools; timestamps non-decreasing.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, int processes, int files, int sockets)
      : rng_(seed), processes_(processes), files_(files), sockets_(sockets) {}

  std::vector<AuditEvent> generate(std::size_t n, std::int64_t start_ts = 1'600'000'000'000,
                                   std::int64_t max_gap_ms = 60'000) {
    std::vector<AuditEvent> out;
    std::int64_t ts = start_ts;
    std::uniform_int_distribution<std::int64_t> gap(0, max_gap_ms);
    for (std::size_t i = 0; i < n; ++i) {
      ts += gap(rng_);
      out.push_back(next(ts));
    }
    return out;
  }

  AuditEvent next(std::int64_t ts) {
    static const std::vector<std::string> exe = {"bash", "sshd", "firefox", "python", "cron", "gup.exe", "ls"};
    static const std::vector<std::string> dirs = {"/etc/", "/tmp/", "/home/u/", "/usr/lib/", "/var/log/", "/bin/"};
    std::uniform_int_distribution<int> kind(0, 9);
    const auto p = pick(processes_);
    const std::string sbj = "p" + std::to_string(p);
    AuditEvent e;
    e.ts = ts;
    e.sbj_id = sbj;
    e.sbj_name = exe[p % exe.size()];
    const int k = kind(rng_);
    if (k < 2) {
      const auto c = pick(processes_);
      e.obj_id = "p" + std::to_string(c);
      e.obj_name = exe[c % exe.size()];
      e.obj_kind = EntityKind::Process;
      static const EdgeOp ops[] = {EdgeOp::Fork, EdgeOp::Exec, EdgeOp::Modify, EdgeOp::Open};
      e.op = ops[pick(4)];
      e.dir = Direction::SbjToObj;
    } else if (k < 8) {
      const auto f = pick(files_);
      e.obj_id = "f" + std::to_string(f);
      e.obj_name = dirs[f % dirs.size()] + "file" + std::to_string(f);
      e.obj_kind = EntityKind::File;
      static const EdgeOp ops[] = {EdgeOp::Read, EdgeOp::Write, EdgeOp::Create, EdgeOp::Modify,
                                   EdgeOp::Rename, EdgeOp::Load, EdgeOp::Delete};
      e.op = ops[pick(7)];
      e.dir = (e.op == EdgeOp::Read || e.op == EdgeOp::Load) ? Direction::ObjToSbj : Direction::SbjToObj;
    } else {
      const auto s = pick(sockets_);
      const std::string addr = (s % 2 ? "10.0.0." : "93.184.0.") + std::to_string(s % 250 + 1);
      e.obj_id = "s" + std::to_string(s);
      e.obj_name = addr;
      e.obj_addr = Ipv4::parse(addr);
      e.obj_kind = EntityKind::Netflow;
      static const EdgeOp ops[] = {EdgeOp::Send, EdgeOp::Recv, EdgeOp::Connect};
      e.op = ops[pick(3)];
      e.dir = e.op == EdgeOp::Recv ? Direction::ObjToSbj : Direction::SbjToObj;
    }
    return e;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
  std::mt19937_64 rng_;
  int processes_, files_, sockets_;
};

}  // namespace provhunt::testing
