#include <doctest.h>

#include <sstream>

#include "oracles/events.hpp"
#include "oracles/reference.hpp"
#include "provhunt/ingest.hpp"

using namespace provhunt;
using namespace provhunt::testing;

namespace {
const char* kLine1 =
    R"({"ts":1000,"sbj_id":"p1","sbj_name":"bash","obj_id":"f1","obj_name":"/etc/passwd","obj_kind":"file","op":"read","dir":"in"})";
const char* kLine2 =
    R"({"ts":1001,"sbj_id":"p1","sbj_name":"bash","obj_id":"s1","obj_name":"1.2.3.4:80","obj_kind":"netflow","op":"send","dir":"out","obj_addr":"1.2.3.4"})";
const char* kLine3 =
    R"({"ts":1002,"sbj_id":"p1","sbj_name":"bash","obj_id":"p2","obj_name":"ls","obj_kind":"process","op":"fork","dir":"out"})";
}  // namespace

TEST_CASE("parse_stream keeps file order") {
  std::istringstream in(std::string(kLine1) + "\n" + kLine2 + "\n" + kLine3 + "\n");
  const auto r = parse_stream(in);
  REQUIRE(r.events.size() == 3);
  CHECK(r.issues.empty());
  CHECK(r.events[0].op == EdgeOp::Read);
  CHECK(r.events[0].dir == Direction::ObjToSbj);
  CHECK(r.events[1].obj_addr->to_string() == "1.2.3.4");
  CHECK(r.events[2].obj_kind == EntityKind::Process);
}

TEST_CASE("malformed lines are skipped with line numbers") {
  const std::string bad_netflow =
      R"({"ts":5,"sbj_id":"p1","sbj_name":"bash","obj_id":"s1","obj_name":"x","obj_kind":"netflow","op":"send","dir":"out"})";
  const std::string illegal_op =
      R"({"ts":5,"sbj_id":"p1","sbj_name":"bash","obj_id":"f","obj_name":"/x","obj_kind":"file","op":"fork","dir":"out"})";
  std::istringstream in(std::string(kLine1) + "\n" + bad_netflow + "\n{oops\n\n" + illegal_op + "\n" + kLine3 + "\n");
  const auto r = parse_stream(in);
  CHECK(r.events.size() == 2);
  REQUIRE(r.issues.size() == 3);
  CHECK(r.issues[0].line == 2);
  CHECK(r.issues[0].reason.find("obj_addr") != std::string::npos);
  CHECK(r.issues[1].line == 3);
  CHECK(r.issues[2].line == 5);
}

TEST_CASE("empty stream") {
  std::istringstream in("");
  const auto r = parse_stream(in);
  CHECK(r.events.empty());
  CHECK(r.issues.empty());
}

TEST_CASE("unreadable source throws") { CHECK_THROWS_AS(parse_file("/nonexistent/events.jsonl"), Error); }

TEST_CASE("json line round trip") {
  for (const char* l : {kLine1, kLine2, kLine3}) {
    const auto e = parse_event_line(l);
    REQUIRE(e);
    CHECK(parse_event_line(event_to_json_line(*e)) == e);
  }
}

TEST_CASE("S1 examples") {
  {
    const auto out = dedup_s1({read(1, "p", "f1"), read(2, "p", "f1"), read(3, "p", "f1")});
    CHECK(out.events.size() == 1);
    CHECK(out.removed == 2);
  }
  {
    const auto out = dedup_s1({read(1, "p", "f1"), write(2, "p", "f2"), read(3, "p", "f1"), write(4, "p", "f2"),
                               read(5, "p", "f1")});
    REQUIRE(out.events.size() == 2);
    CHECK(out.events[0].op == EdgeOp::Read);
    CHECK(out.events[1].op == EdgeOp::Write);
    CHECK(out.removed == 3);
  }
  {
    const std::vector<AuditEvent> in = {read(1, "p", "f1"), write(2, "p", "f2"), fork(3, "p", "p3")};
    const auto out = dedup_s1(in);
    CHECK(out.events == in);
    CHECK(out.removed == 0);
  }
}

TEST_CASE("S2 examples") {
  std::vector<AuditEvent> burst;
  for (int i = 0; i < 10; ++i) burst.push_back(send(i * 6000, "p", "8.8.8.8"));
  auto out = dedup_s2(burst);
  CHECK(out.events.size() == 1);
  CHECK(out.removed == 9);

  out = dedup_s2({send(0, "p", "8.8.8.8"), send(6 * 60'000, "p", "8.8.8.8")});
  CHECK(out.events.size() == 2);

  const std::vector<AuditEvent> mixed = {send(0, "p", "8.8.8.8"), recv(10, "p", "8.8.8.8")};
  out = dedup_s2(mixed);
  CHECK(out.events.size() == 2);
  CHECK(reference_s2(mixed, kDefaultWindowMs).size() == 2);

  // non-network events are never filtered
  out = dedup_s2({read(0, "p", "f"), read(1, "p", "f")});
  CHECK(out.removed == 0);
  CHECK_THROWS_AS(dedup_s2(mixed, 0), Error);
}

TEST_CASE("S2 windows are tumbling from the first event") {
  // 0 and 299999 share window 0; 300000 opens window 1.
  const auto out = dedup_s2({send(1000, "p", "8.8.8.8"), send(300'999, "p", "8.8.8.8"), send(301'000, "p", "8.8.8.8")});
  CHECK(out.events.size() == 2);
  CHECK(out.events[1].ts == 301'000);
}

TEST_CASE("dedup properties on random streams") {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    RandomStream gen(seed, 3, 4, 2);
    const auto events = gen.generate(80, 0, 40'000);
    const auto s1 = dedup_s1(events);
    CHECK(s1.events == reference_s1(events));
    CHECK(dedup_s1(s1.events).events == s1.events);
    const auto s2 = dedup_s2(events, 120'000);
    CHECK(s2.events == reference_s2(events, 120'000));
    CHECK(dedup_s2(s2.events, 120'000).events == s2.events);
    DedupStats stats;
    const auto all = deduplicate(events, stats, 120'000);
    CHECK(stats.conserved());
    CHECK(all.size() == stats.remaining);
    // subsequence: order preserved
    std::size_t j = 0;
    for (const auto& e : events)
      if (j < all.size() && e == all[j]) ++j;
    CHECK(j == all.size());
  }
}
