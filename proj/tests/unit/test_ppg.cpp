#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles/events.hpp"
#include "oracles/reference.hpp"
#include "provhunt/bitcodec.hpp"
#include "provhunt/ppg.hpp"

using namespace provhunt;
using namespace provhunt::testing;
namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kDay0 = 1'600'000'000'000 - 1'600'000'000'000 % 86'400'000;

std::vector<NaiveEdge> ppg_edges_by_id(const PpgView& g) {
  std::vector<NaiveEdge> out;
  for (const auto& e : g.edges()) out.push_back({g.id(e.sbj), g.id(e.obj), e.op, e.dir, e.ts});
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("bit layouts round trip at the field limits") {
  using namespace codec;
  const SubjectEdge s{delta_max(11), 15, 1, (1 << 27) - 1, 31, 255};
  CHECK(decode_sparse_subject(encode_sparse_subject(s)) == s);
  const SubjectEdge neg{delta_min(11), 3, 0, 0, 0, 0};
  CHECK(decode_sparse_subject(encode_sparse_subject(neg)) == neg);
  const ObjectEdge o{delta_min(16), 9, 1};
  CHECK(decode_sparse_object(encode_sparse_object(o)) == o);
  const SubjectEdge x{delta_min(27), 15, 1, (1 << 27) - 1, 31, 65535};
  CHECK(decode_ext_subject(encode_ext_subject(x)) == x);
  const ObjectEdge xo{delta_max(32), 0, 0};
  CHECK(decode_ext_object(encode_ext_object(xo)) == xo);
  CHECK(delta_fits(1023, 11));
  CHECK_FALSE(delta_fits(1024, 11));
  CHECK(delta_fits(-1024, 11));
  CHECK_FALSE(delta_fits(-1025, 11));
}

TEST_CASE("process reading a file") {
  Ppg g;
  CHECK(g.add_event(read(kDay0 + 5000, "p", "/etc/hosts")) == AddResult::Inserted);
  CHECK(g.node_count() == 2);
  CHECK(g.edge_count() == 1);
  const auto p = *g.lookup("p");
  const auto f = *g.lookup("/etc/hosts");
  const auto out = g.neighbors(p, EdgeRole::Out, TimeOrder::TimeAsc);
  REQUIRE(out.size() == 1);
  CHECK(out[0].neighbor == f);
  CHECK(out[0].op == EdgeOp::Read);
  CHECK(out[0].dir == Direction::ObjToSbj);
  CHECK(out[0].ts == kDay0 + 5000);
  const auto in = g.neighbors(f, EdgeRole::In, TimeOrder::TimeAsc);
  REQUIRE(in.size() == 1);
  CHECK(in[0].neighbor == p);
  CHECK(in[0].ts == kDay0 + 5000);
  CHECK(g.node(f).abs == AbsType::CfgFile);
  CHECK_FALSE(g.node(p).exp);
}

TEST_CASE("the seventeenth edge promotes the node") {
  Ppg g;
  for (int i = 0; i < 16; ++i) g.add_event(read(kDay0 + i, "p", "/tmp/f" + std::to_string(i)));
  const auto p = *g.lookup("p");
  CHECK_FALSE(g.node(p).exp);
  const auto before = g.neighbors(p, EdgeRole::Out, TimeOrder::TimeAsc);
  g.add_event(read(kDay0 + 16, "p", "/tmp/f16"));
  CHECK(g.node(p).exp);
  const auto after = g.neighbors(p, EdgeRole::Out, TimeOrder::TimeAsc);
  REQUIRE(after.size() == 17);
  CHECK(std::equal(before.begin(), before.end(), after.begin()));
}

TEST_CASE("wide deltas promote early") {
  Ppg g;
  g.add_event(read(kDay0, "p", "/tmp/a"));
  for (int i = 0; i < 1100; ++i) g.add_event(read(kDay0 + 1, "q" + std::to_string(i), "/tmp/pad"));
  // /tmp/a was index 1; the new object is > 1024 away from "p"
  g.add_event(read(kDay0 + 2, "p", "/tmp/b"));
  const auto p = *g.lookup("p");
  CHECK(g.node(p).exp);
  CHECK(g.neighbors(p, EdgeRole::Out, TimeOrder::TimeAsc).size() == 2);
  // the pad file has 1100 in-edges: extended object queue
  CHECK(g.node(*g.lookup("/tmp/pad")).exp);
  CHECK(g.neighbors(*g.lookup("/tmp/pad"), EdgeRole::In, TimeOrder::TimeAsc).size() == 1100);
}

TEST_CASE("version suppression") {
  SUBCASE("read, read, write, read with versioning") {
    Ppg g(PpgConfig{.versioning_enabled = true});
    CHECK(g.add_event(read(kDay0 + 1, "p", "/x")) == AddResult::Inserted);
    CHECK(g.add_event(read(kDay0 + 2, "p", "/x")) == AddResult::SuppressedByVersion);
    CHECK(g.add_event(write(kDay0 + 3, "q", "/x")) == AddResult::Inserted);
    CHECK(g.add_event(read(kDay0 + 4, "p", "/x")) == AddResult::Inserted);
    CHECK(g.edge_count() == 3);
  }
  SUBCASE("disabled keeps everything") {
    Ppg g;
    g.add_event(read(kDay0 + 1, "p", "/x"));
    g.add_event(read(kDay0 + 2, "p", "/x"));
    CHECK(g.edge_count() == 2);
  }
}

TEST_CASE("dates outside the 32-day window are rejected") {
  Ppg g;
  g.add_event(read(kDay0, "p", "/x"));
  g.add_event(read(kDay0 + 31LL * 86'400'000, "p", "/y"));
  CHECK_THROWS_AS(g.add_event(read(kDay0 + 32LL * 86'400'000, "p", "/z")), Error);
}

TEST_CASE("time orders are exact reverses") {
  Ppg g;
  for (int i = 0; i < 30; ++i) g.add_event(read(kDay0 + (i * 7919) % 101, "p", "/tmp/f" + std::to_string(i % 5)));
  const auto p = *g.lookup("p");
  auto asc = g.neighbors(p, EdgeRole::Out, TimeOrder::TimeAsc);
  auto desc = g.neighbors(p, EdgeRole::Out, TimeOrder::TimeDesc);
  CHECK(std::is_sorted(asc.begin(), asc.end(), [](auto& a, auto& b) { return a.ts < b.ts; }));
  std::reverse(desc.begin(), desc.end());
  CHECK(asc == desc);
}

TEST_CASE("replay matches a naive store on random streams") {
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    for (bool versioning : {false, true}) {
      RandomStream gen(seed, 6, 10, 4);
      const auto events = gen.generate(300, kDay0, 20'000);
      const auto ppg = build_ppg(events, PpgConfig{.versioning_enabled = versioning});
      const auto view = ppg.snapshot();
      CHECK(ppg_edges_by_id(view) == reference_replay(events, versioning));
      // every out-edge of s to o appears as an in-edge of o from s
      std::size_t in_total = 0, out_total = 0;
      for (NodeIndex i = 0; i < view.node_count(); ++i) {
        in_total += view.neighbors(i, EdgeRole::In, TimeOrder::TimeAsc).size();
        out_total += view.neighbors(i, EdgeRole::Out, TimeOrder::TimeAsc).size();
      }
      CHECK(in_total == view.edge_count());
      CHECK(out_total == view.edge_count());
    }
  }
}

TEST_CASE("promotion preserves every neighborhood") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    RandomStream gen(1000 + trial, 5, 8, 3);
    auto g = build_ppg(gen.generate(100, kDay0, 1000));
    const auto before = g.snapshot();
    for (NodeIndex i = 0; i < before.node_count(); ++i)
      if (rng() % 2) g.promote(i);
    const auto after = g.snapshot();
    for (NodeIndex i = 0; i < before.node_count(); ++i)
      for (auto role : {EdgeRole::In, EdgeRole::Out})
        CHECK(before.neighbors(i, role, TimeOrder::TimeAsc) == after.neighbors(i, role, TimeOrder::TimeAsc));
  }
}

TEST_CASE("snapshots are isolated from later writes") {
  Ppg g;
  g.add_event(read(kDay0, "p", "/x"));
  const auto snap = g.snapshot();
  g.add_event(read(kDay0 + 1, "p", "/y"));
  g.promote(0);
  CHECK(snap.edge_count() == 1);
  CHECK(snap.node_count() == 2);
  CHECK_FALSE(snap.exp(0));
  CHECK(g.edge_count() == 2);
}

TEST_CASE("save and load round trip") {
  RandomStream gen(5, 6, 10, 4);
  const auto g = build_ppg(gen.generate(500, kDay0, 5000));
  const auto path = (fs::temp_directory_path() / "provhunt_ppg_test.bin").string();
  g.save(path);
  const auto h = Ppg::load(path);
  const auto a = g.snapshot(), b = h.snapshot();
  CHECK(a.node_count() == b.node_count());
  CHECK(a.edges() == b.edges());
  for (NodeIndex i = 0; i < a.node_count(); ++i) {
    CHECK(a.id(i) == b.id(i));
    CHECK(a.name(i) == b.name(i));
    CHECK(a.abs(i) == b.abs(i));
    CHECK(a.exp(i) == b.exp(i));
  }
  {
    std::ofstream bad(path, std::ios::binary);
    bad << "garbage";
  }
  CHECK_THROWS_AS(Ppg::load(path), Error);
  fs::remove(path);
}

TEST_CASE("memory report accounts for every arena") {
  RandomStream gen(9, 20, 50, 10);
  const auto g = build_ppg(gen.generate(2000, kDay0, 500));
  const auto m = g.memory_report();
  CHECK(m.node_count == g.node_count());
  CHECK(m.edge_count == g.edge_count());
  CHECK(m.bytes_per_node == 16);
  CHECK(m.bytes_per_sparse_subject_edge == 8);
  CHECK(m.bytes_per_sparse_object_edge == 4);
  CHECK(m.bytes_per_ext_subject_edge == 12);
  CHECK(m.bytes_per_ext_object_edge == 8);
  CHECK(m.total_bytes == m.fixed_overhead + m.node_bytes_sparse + m.node_bytes_extended + m.sparse_subject_bytes +
                             m.sparse_object_bytes + m.ext_subject_bytes + m.ext_object_bytes);
}
