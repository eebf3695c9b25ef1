#include <doctest.h>

#include <filesystem>

#include <nlohmann/json.hpp>

#include "oracles/events.hpp"
#include "provhunt/ppg.hpp"
#include "provhunt/querykit.hpp"

using namespace provhunt;
using namespace provhunt::testing;
using nlohmann::json;

namespace {

AttrGraph small_graph() {
  AttrGraph g;
  g.nodes = {{"gup.exe", AbsType::UnknownProcess}, {"/tmp/payload", AbsType::TmpFile}, {"53.192.68.50", AbsType::PublicNetflow}};
  g.edges = {{0, 1, EdgeOp::Write, 10}, {0, 2, EdgeOp::Recv, std::nullopt}};
  g.label = "upgrade";
  return g;
}

}  // namespace

TEST_CASE("graph json round trip") {
  const auto g = small_graph();
  CHECK(graph_from_json(graph_to_json(g)) == g);
  const auto path = (std::filesystem::temp_directory_path() / "provhunt_q.json").string();
  save_graph(g, path);
  CHECK(load_graph(path) == g);
  std::filesystem::remove(path);
}

TEST_CASE("graph json errors name the field") {
  auto j = graph_to_json(small_graph());
  j["edges"][1]["op"] = "teleport";
  try {
    graph_from_json(j);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("edges[1].op") != std::string::npos);
  }
  j = graph_to_json(small_graph());
  j["edges"][0]["dst"] = 7;
  CHECK_THROWS_AS(graph_from_json(j), Error);
  j = graph_to_json(small_graph());
  j["nodes"][0]["abs"] = "martian";
  CHECK_THROWS_AS(graph_from_json(j), Error);
}

TEST_CASE("validate and normalize") {
  auto g = small_graph();
  g.edges.push_back({0, 1, EdgeOp::Write, 5});
  CHECK_THROWS_AS(g.validate(), Error);
  g.normalize_edges();
  CHECK_NOTHROW(g.validate());
  REQUIRE(g.edges.size() == 2);
  CHECK(g.edges[0].ts == 5);
}

TEST_CASE("threat graph json keeps the provenance annex") {
  ThreatGraph tg;
  tg.graph = small_graph();
  tg.provenance = {{3, 9}, {4}, {5}};
  tg.seeds = {3};
  tg.truncated = true;
  const auto back = threat_graph_from_json(threat_graph_to_json(tg));
  CHECK(back.graph == tg.graph);
  CHECK(back.provenance == tg.provenance);
  CHECK(back.seeds == tg.seeds);
  CHECK(back.truncated);
  CHECK(to_attr_graph(tg) == tg.graph);
  // a threat graph is also a plain query graph
  CHECK(graph_from_json(threat_graph_to_json(tg)) == tg.graph);
}

TEST_CASE("poi patterns") {
  const auto p = make_pattern("*", "read", "/etc/passwd");
  CHECK(p.matches(read(1, "p", "/etc/passwd")));
  CHECK_FALSE(p.matches(write(1, "p", "/etc/passwd")));
  CHECK_FALSE(p.matches(read(1, "p", "/etc/passwd2")));

  auto e = read(1, "p", "C:\\Program Files\\X\\a.TXT");
  e.sbj_name = "C:\\Program Files\\Mozilla\\firefox.exe";
  CHECK(make_pattern("firefox", "*", "*").matches(e));
  CHECK(make_pattern("firefox.exe", "read", "*.txt").matches(e));
  CHECK(make_pattern("*", "*", "a.txt").matches(e));
  CHECK_FALSE(make_pattern("chrome", "*", "*").matches(e));

  CHECK(make_pattern("*", "send", "8.8.8.8").matches(send(1, "p", "8.8.8.8")));

  CHECK_THROWS_AS(make_pattern("*", "*", "*"), Error);
  CHECK_THROWS_AS(make_pattern("*", "teleport", "x"), Error);
  CHECK_THROWS_AS(patterns_from_json(json::parse(R"([{"sbj":"*"}])")), Error);
  CHECK(patterns_from_json(json::parse(R"([{"sbj":"*","op":"read","obj":"/etc/shadow"}])")).size() == 1);
}

TEST_CASE("poi matching collects unique subjects in order") {
  const std::vector<AuditEvent> events = {read(1, "a", "/etc/passwd"), read(2, "b", "/tmp/x"), read(3, "c", "/etc/passwd"),
                                          read(4, "a", "/etc/passwd")};
  const auto r = match_pois(events, {make_pattern("*", "read", "/etc/passwd")});
  CHECK(r.subject_ids == std::vector<std::string>{"a", "c"});
  CHECK(r.log.size() == 3);
  CHECK(match_pois(events, {make_pattern("zzz", "*", "*")}).subject_ids.empty());

  const auto g = build_ppg(events);
  const auto pois = resolve_pois(g.snapshot(), {"c", "a", "c"});
  CHECK(pois.size() == 2);
  CHECK(std::is_sorted(pois.begin(), pois.end()));
  CHECK_THROWS_AS(resolve_pois(g.snapshot(), {"nobody"}), Error);
}
