#pragma once

// Contrastive training: benign corpus sampling, augmentation, GED-filtered
// negatives, InfoNCE-style loss and an Adam loop over PairBatch.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "provhunt/ppg.hpp"
#include "provhunt/querykit.hpp"
#include "provhunt/reprnet.hpp"

namespace provhunt {

struct TrainConfig {
  double tau = 0.1;
  int epochs = 100;
  int batch = 16;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double perturb_ratio = 0.2;
  std::size_t corpus_size = 1500;
  std::uint64_t seed = 7;
  int negatives_per_anchor = 2;
  std::uint32_t min_nodes = 10;
  std::uint32_t max_nodes = 30;
  std::vector<int> hops = {2, 3, 4};
  std::size_t seed_attempts_per_graph = 200;  // bound on rejected BFS seeds
  std::size_t negative_scan = 300;            // candidates examined per anchor
  Precision precision = Precision::Float;
  ReprConfig model;

  void validate() const;
};

/// Reads [train] and [model] tables; unknown keys are errors.
TrainConfig train_config_from_toml(const std::string& text, TrainConfig base = {});
TrainConfig load_train_config(const std::string& path, TrainConfig base = {});

// ---------------------------------------------------------------------------
// corpus

/// Plain BFS (both edge directions) from random seeds to a hop drawn from
/// cfg.hops; keeps balls of min_nodes..max_nodes nodes after consolidation.
std::vector<AttrGraph> sample_benign_corpus(const PpgView& g, const TrainConfig& cfg);

/// Edge or node perturbation with equal probability. Only Process->File and
/// Process->Netflow edges are added or removed; processes are never deleted.
/// Grafting draws from donors when given.
AttrGraph augment(const AttrGraph& g, double ratio, std::uint64_t seed, const std::vector<AttrGraph>* donors = nullptr);

// ---------------------------------------------------------------------------
// graph edit distance

/// Minimum-cost perfect assignment on a square matrix; returns col per row.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

/// Cost of the edit path induced by a node map (map[u] = v, or -1 = delete).
/// Node substitution costs 1 when abstract types differ; node and edge
/// insertion/deletion cost 1 each; edges are (src, dst, op) triples.
double edit_cost(const AttrGraph& a, const AttrGraph& b, const std::vector<int>& map);

/// Bipartite approximation: solve the node assignment with local edge
/// estimates, then return the induced edit cost (never below the exact GED).
double approx_ged(const AttrGraph& a, const AttrGraph& b);

/// min(|Va|+|Ea|, |Vb|+|Eb|)
double ged_threshold(const AttrGraph& a, const AttrGraph& b);

struct PairSet {
  std::vector<AttrGraph> positives;                 // positives[i] augments corpus[i]
  std::vector<std::vector<std::size_t>> negatives;  // per anchor
  std::vector<bool> relaxed;                        // anchor fell back to its max-GED partner
};

PairSet build_pairs(const std::vector<AttrGraph>& corpus, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// loss

struct AnchorSims {
  double pos = 0;
  std::vector<double> neg;
};

struct LossValue {
  double loss = 0;
  std::vector<AnchorSims> grad;  // d loss / d sim, same shape as the input
};

/// L = -(1/N) sum_i log( exp(pos_i/tau) / sum_k exp(neg_ik/tau) )
LossValue contrastive_loss(const std::vector<AnchorSims>& sims, double tau);

struct EmbeddingPair {
  Eigen::VectorXd a, b;
};
struct AnchorEmbeddings {
  EmbeddingPair pos;
  std::vector<EmbeddingPair> neg;
};
/// Same loss with sim = cosine of each embedding pair.
double contrastive_loss(const std::vector<AnchorEmbeddings>& items, double tau);

// ---------------------------------------------------------------------------
// training

struct TrainResult {
  ReprModel model;
  std::vector<double> epoch_loss;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

TrainResult train(const TrainConfig& cfg, const std::vector<AttrGraph>& corpus, const PairSet& pairs,
                  const EpochCallback& on_epoch = {});

/// Mean positive and negative similarity over a pair set.
struct Separation {
  double mean_pos = 0;
  double mean_neg = 0;
};
Separation pair_separation(const ReprModel& m, const std::vector<AttrGraph>& corpus, const PairSet& pairs);

}  // namespace provhunt
