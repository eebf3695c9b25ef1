#pragma once

// Graph matching network: one-hot node types, multi-hot edge codes,
// intra-graph sum aggregation, degree-gated cross-graph attention,
// MLP updates, sum readout and cosine scoring. Forward and backward
// passes are written out by hand over Eigen matrices.

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "provhunt/querykit.hpp"

namespace provhunt {

inline constexpr int kNodeFeatDim = static_cast<int>(kAbsTypeCount);  // 14
inline constexpr int kEdgeFeatDim = 17;                                // 16 wire codes + direction bit
inline constexpr int kDirectionBit = 16;
inline constexpr std::uint32_t kModelFormatVersion = 1;  // checkpoint layout

/// Per-graph inputs. Neighborhoods are undirected and deduplicated: s is a
/// neighbor of t when any edge joins them in either direction.
struct GraphFeatures {
  std::uint32_t n = 0;
  std::vector<std::uint8_t> type;  // abs code per node; h0 is one-hot on it
  // CSR over targets: neighbors of t are nbr[off[t] .. off[t+1])
  std::vector<std::uint32_t> off;
  std::vector<std::uint32_t> nbr;
  // e_st rows aligned with nbr: bits 0..15 = ops between s and t (either
  // direction), bit 16 = some edge runs s -> t
  std::vector<std::uint32_t> edge_bits;

  std::uint32_t degree(std::uint32_t t) const { return off[t + 1] - off[t]; }
  Eigen::MatrixXd node_matrix() const;  // n x 14
  Eigen::MatrixXd edge_vector(std::uint32_t t, std::uint32_t k) const;  // 1 x 17 for the k-th neighbor of t
};

GraphFeatures init_features(const AttrGraph& g);

struct ReprConfig {
  int dim = 128;
  int layers = 3;
  int gate_degree = 3;  // attention only for nodes with more neighbors than this
  bool inter = true;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Parameter tensor location inside the flat vector (column-major).
struct TensorSlot {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return std::size_t(rows) * std::size_t(cols); }
};

class ReprModel {
 public:
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
  static ReprModel init(const ReprConfig& cfg);

  const ReprConfig& config() const noexcept { return cfg_; }
  void set_inter(bool on) noexcept { cfg_.inter = on; }
  std::size_t parameter_count() const noexcept { return std::size_t(theta_.size()); }
  Eigen::VectorXd& parameters() noexcept { return theta_; }
  const Eigen::VectorXd& parameters() const noexcept { return theta_; }
  const std::vector<TensorSlot>& slots() const noexcept { return slots_; }
  int layer_input_dim(int layer) const { return layer == 0 ? kNodeFeatDim : cfg_.dim; }

  // per layer: w_intra (d x (2*din+17)), w1 (d x 2d), b1 (d), w2 (d x d), b2 (d)
  const TensorSlot& slot(int layer, int which) const { return slots_[std::size_t(layer) * 5 + std::size_t(which)]; }

  void save(const std::string& path) const;
  static ReprModel load(const std::string& path);
  /// FNV-1a over the configuration and parameter bytes, hex encoded.
  std::string hash() const;

 private:
  ReprConfig cfg_;
  Eigen::VectorXd theta_;
  std::vector<TensorSlot> slots_;
  void layout();
};

enum class Precision { Double, Float };

/// Forward/backward over a batch of graph pairs. All graphs of the batch are
/// stacked so the dense products run as a few large matrix multiplies.
class PairBatch {
 public:
  using Pair = std::pair<const GraphFeatures*, const GraphFeatures*>;

  PairBatch(const ReprModel& model, std::vector<Pair> pairs, Precision precision = Precision::Double);
  ~PairBatch();
  PairBatch(PairBatch&&) noexcept;
  PairBatch& operator=(PairBatch&&) noexcept;

  /// Runs the forward pass and keeps the trace. Throws on non-finite values.
  void forward();
  std::size_t size() const noexcept;
  double score(std::size_t pair) const;
  Eigen::VectorXd embedding(std::size_t pair, int side) const;  // side 0 = first graph

  /// Accumulates d(loss)/d(theta) into grad given d(loss)/d(score) per pair.
  void backward(const std::vector<double>& dscore, Eigen::VectorXd& grad) const;

 public:
  struct Impl;  // defined with the engine

 private:
  std::unique_ptr<Impl> impl_;
};

struct PairOutput {
  Eigen::VectorXd eq;
  Eigen::VectorXd ep;
  double score = 0;
};

PairOutput forward_pair(const ReprModel& m, const GraphFeatures& q, const GraphFeatures& p);
/// Gradient of upstream * score with respect to every parameter.
Eigen::VectorXd backward_pair(const ReprModel& m, const GraphFeatures& q, const GraphFeatures& p, double upstream);

/// Stand-alone graph embedding: forward with no partner, so no attention messages.
Eigen::VectorXd embed(const ReprModel& m, const GraphFeatures& g);

/// Cosine with a tiny norm guard; d/da and d/db in closed form.
double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
std::pair<Eigen::VectorXd, Eigen::VectorXd> cosine_grad(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace provhunt
