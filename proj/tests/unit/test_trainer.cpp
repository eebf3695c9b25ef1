#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <set>

#include "oracles/events.hpp"
#include "oracles/ged.hpp"
#include "oracles/graphs.hpp"
#include "provhunt/trainer.hpp"

using namespace provhunt;
using namespace provhunt::testing;

namespace {

// direct evaluation of the loss formula, one anchor at a time
double scalar_loss(const std::vector<AnchorSims>& sims, double tau) {
  double total = 0;
  for (const auto& s : sims) {
    double denom = 0;
    for (double x : s.neg) denom += std::exp(x / tau);
    total += -std::log(std::exp(s.pos / tau) / denom);
  }
  return total / double(sims.size());
}

std::size_t count_processes(const AttrGraph& g) {
  return std::size_t(std::count_if(g.nodes.begin(), g.nodes.end(),
                                   [](const AttrNode& n) { return parent_kind(n.abs) == EntityKind::Process; }));
}

Ppg benign_ppg(std::uint64_t seed) {
  RandomStream gen(seed, 60, 150, 12);
  return build_ppg(gen.generate(500, 1'600'000'000'000, 2000));
}

}  // namespace

TEST_CASE("assignment solver matches brute force") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 10);
  for (int t = 0; t < 50; ++t) {
    const int n = 1 + t % 6;
    Eigen::MatrixXd c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = std::floor(u(rng));
    const auto col = solve_assignment(c);
    double got = 0;
    std::set<int> cols;
    for (int i = 0; i < n; ++i) {
      got += c(i, col[std::size_t(i)]);
      cols.insert(col[std::size_t(i)]);
    }
    CHECK(cols.size() == std::size_t(n));
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e18;
    do {
      double s = 0;
      for (int i = 0; i < n; ++i) s += c(i, perm[std::size_t(i)]);
      best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(got == doctest::Approx(best));
  }
}

TEST_CASE("approx GED bounds the exact distance from above") {
  std::mt19937_64 rng(15);
  for (int t = 0; t < 120; ++t) {
    const auto a = random_graph(rng, 2 + std::uint32_t(t % 5), 0.5);
    const auto b = random_graph(rng, 2 + std::uint32_t((t / 5) % 5), 0.5);
    const double approx = approx_ged(a, b);
    const double exact = exact_ged(a, b);
    CHECK(approx >= exact);
    CHECK(approx_ged(a, a) == 0.0);
    CHECK(exact_ged(a, a) == 0.0);
    CHECK(approx_ged(a, permute(a, random_permutation(rng, std::uint32_t(a.nodes.size())))) == 0.0);
  }
  AttrGraph lone;
  lone.nodes = {{"x", AbsType::PublicNetflow}};
  CHECK(approx_ged(random_graph(rng, 4, 0.5), lone) >= 1.0);
}

TEST_CASE("edit cost of a node map") {
  AttrGraph a, b;
  a.nodes = {{"p", AbsType::UtilProcess}, {"f", AbsType::TmpFile}};
  a.edges = {{0, 1, EdgeOp::Write, std::nullopt}};
  b.nodes = {{"p", AbsType::UtilProcess}, {"f", AbsType::CfgFile}};
  b.edges = {{0, 1, EdgeOp::Write, std::nullopt}};
  CHECK(edit_cost(a, b, {0, 1}) == 1.0);      // one relabel
  CHECK(edit_cost(a, b, {-1, -1}) == 6.0);    // delete and insert everything
  CHECK(edit_cost(a, b, {1, 0}) == 4.0);      // two relabels plus edge del+ins
  CHECK_THROWS_AS(edit_cost(a, b, {0, 0}), Error);
  CHECK(ged_threshold(a, b) == 3.0);
}

TEST_CASE("augmentation") {
  std::mt19937_64 rng(6);
  std::vector<AttrGraph> donors;
  for (int i = 0; i < 5; ++i) donors.push_back(random_graph(rng, 12, 0.3));
  for (int t = 0; t < 200; ++t) {
    const auto g = random_graph(rng, 10 + std::uint32_t(t % 10), 0.3);
    CHECK(augment(g, 0.0, std::uint64_t(t)) == g);
    const auto a = augment(g, 0.2, std::uint64_t(t), &donors);
    CHECK_NOTHROW(a.validate());
    CHECK_FALSE(a.empty());
    CHECK(a == augment(g, 0.2, std::uint64_t(t), &donors));
    // processes survive: node removal only touches files and sockets
    CHECK(count_processes(a) >= count_processes(g));
    if (a.nodes == g.nodes) {
      // edge perturbation path (or a no-op): bounded change, Process -> File/Netflow only
      std::set<std::tuple<std::uint32_t, std::uint32_t, EdgeOp>> ea, eg;
      for (const auto& e : a.edges) ea.emplace(e.src, e.dst, e.op);
      for (const auto& e : g.edges) eg.emplace(e.src, e.dst, e.op);
      std::vector<std::tuple<std::uint32_t, std::uint32_t, EdgeOp>> diff;
      std::set_symmetric_difference(ea.begin(), ea.end(), eg.begin(), eg.end(), std::back_inserter(diff));
      CHECK(diff.size() <= std::size_t(std::ceil(0.2 * double(g.edges.size()))));
      for (const auto& [s, d, op] : diff) {
        CHECK(parent_kind(g.nodes[s].abs) == EntityKind::Process);
        CHECK(parent_kind(g.nodes[d].abs) != EntityKind::Process);
      }
    }
  }
}

TEST_CASE("loss examples") {
  CHECK(contrastive_loss({{1.0, {-1.0}}}, 0.1).loss == doctest::Approx(-20.0));
  CHECK(contrastive_loss({{0.3, {0.3}}}, 0.1).loss == doctest::Approx(0.0));
  double prev = 1e9;
  for (double p = -1.0; p <= 1.0; p += 0.1) {
    const double l = contrastive_loss({{p, {0.2, -0.4}}}, 0.1).loss;
    CHECK(l < prev);
    prev = l;
  }
  CHECK_THROWS_AS(contrastive_loss({{0.5, {}}}, 0.1), Error);
  CHECK_THROWS_AS(contrastive_loss(std::vector<AnchorSims>{}, 0.1), Error);
}

TEST_CASE("loss matches the scalar formula and its derivative") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 100; ++t) {
    std::vector<AnchorSims> sims(1 + std::size_t(t % 7));
    for (auto& s : sims) {
      s.pos = u(rng);
      s.neg.resize(1 + std::size_t(rng() % 4));
      for (auto& x : s.neg) x = u(rng);
    }
    const auto lv = contrastive_loss(sims, 0.1);
    CHECK(std::abs(lv.loss - scalar_loss(sims, 0.1)) <= 1e-9 * std::max(1.0, std::abs(lv.loss)));
    auto shifted = sims;
    shifted[0].neg[0] += 1e-6;
    const double up = scalar_loss(shifted, 0.1);
    shifted[0].neg[0] -= 2e-6;
    const double down = scalar_loss(shifted, 0.1);
    CHECK(lv.grad[0].neg[0] == doctest::Approx((up - down) / 2e-6).epsilon(1e-5));
  }
}

TEST_CASE("train config from toml") {
  const auto cfg = train_config_from_toml(R"(
[train]
tau = 0.2
epochs = 3
hops = [2, 3]
precision = "double"
[model]
dim = 32
inter = false
)");
  CHECK(cfg.tau == 0.2);
  CHECK(cfg.epochs == 3);
  CHECK(cfg.hops == std::vector<int>{2, 3});
  CHECK(cfg.precision == Precision::Double);
  CHECK(cfg.model.dim == 32);
  CHECK_FALSE(cfg.model.inter);
  CHECK(cfg.batch == 16);
  CHECK_THROWS_AS(train_config_from_toml("[train]\ntau = -1\n"), Error);
  CHECK_THROWS_AS(train_config_from_toml("[train]\nwarp = 9\n"), Error);
  CHECK_THROWS_AS(train_config_from_toml("[optimizer]\nlr = 1\n"), Error);
}

TEST_CASE("benign corpus sampling") {
  const auto g = benign_ppg(3).snapshot();
  TrainConfig cfg;
  cfg.corpus_size = 40;
  const auto corpus = sample_benign_corpus(g, cfg);
  CHECK(corpus.size() == 40);
  for (const auto& c : corpus) {
    CHECK(c.nodes.size() >= 10);
    CHECK(c.nodes.size() <= 30);
    CHECK_NOTHROW(c.validate());
  }
  CHECK(sample_benign_corpus(g, cfg) == corpus);
  cfg.min_nodes = 100000;
  cfg.max_nodes = 100000;
  cfg.seed_attempts_per_graph = 2;
  CHECK_THROWS_AS(sample_benign_corpus(g, cfg), Error);
}

TEST_CASE("pairs and a short training run") {
  const auto g = benign_ppg(8).snapshot();
  TrainConfig cfg;
  cfg.corpus_size = 48;
  cfg.epochs = 6;
  cfg.batch = 8;
  cfg.model.dim = 32;
  cfg.precision = Precision::Double;
  const auto corpus = sample_benign_corpus(g, cfg);
  const auto pairs = build_pairs(corpus, cfg);
  REQUIRE(pairs.positives.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    REQUIRE(pairs.negatives[i].size() == std::size_t(cfg.negatives_per_anchor));
    for (const auto j : pairs.negatives[i]) {
      CHECK(j != i);
      CHECK((pairs.relaxed[i] || approx_ged(corpus[i], corpus[j]) > ged_threshold(corpus[i], corpus[j])));
    }
  }
  const auto again = build_pairs(corpus, cfg);
  CHECK(again.negatives == pairs.negatives);
  CHECK(again.positives == pairs.positives);

  const auto a = train(cfg, corpus, pairs);
  REQUIRE(a.epoch_loss.size() == 6);
  CHECK(a.epoch_loss.back() < a.epoch_loss.front());
  const auto b = train(cfg, corpus, pairs);
  CHECK(a.model.parameters() == b.model.parameters());
  const auto sep = pair_separation(a.model, corpus, pairs);
  CHECK(sep.mean_pos > sep.mean_neg);

  const auto path = (std::filesystem::temp_directory_path() / "provhunt_trained.ckpt").string();
  a.model.save(path);
  CHECK(ReprModel::load(path).parameters() == a.model.parameters());
  std::filesystem::remove(path);
}
