#include "provhunt/reprnet.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>

namespace provhunt {

namespace {

constexpr char kModelMagic[8] = {'P', 'H', 'M', 'O', 'D', 'E', 'L', '\0'};
constexpr double kNormGuard = 1e-30;

enum Which { kIntra = 0, kW1 = 1, kB1 = 2, kW2 = 3, kB2 = 4 };

template <typename V>
void put(std::ostream& out, const V& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}
template <typename V>
V take(std::istream& in, const std::string& path) {
  V v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(V))) throw Error("reprnet", "truncated model file " + path);
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// features

GraphFeatures init_features(const AttrGraph& g) {
  g.validate();
  GraphFeatures f;
  f.n = static_cast<std::uint32_t>(g.nodes.size());
  f.type.reserve(f.n);
  for (const auto& node : g.nodes) f.type.push_back(abs_code(node.abs));

  // (t, s) -> e_st bits
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> bits;
  for (const auto& e : g.edges) {
    const std::uint32_t op_bit = 1u << wire_code(e.op);
    bits[{e.dst, e.src}] |= op_bit | (1u << kDirectionBit);
    if (e.src != e.dst) bits[{e.src, e.dst}] |= op_bit;
  }
  f.off.assign(f.n + 1, 0);
  for (const auto& [key, b] : bits) {
    ++f.off[key.first + 1];
    f.nbr.push_back(key.second);
    f.edge_bits.push_back(b);
  }
  for (std::uint32_t t = 0; t < f.n; ++t) f.off[t + 1] += f.off[t];
  return f;
}

Eigen::MatrixXd GraphFeatures::node_matrix() const {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, kNodeFeatDim);
  for (std::uint32_t i = 0; i < n; ++i) h(i, type[i]) = 1.0;
  return h;
}

Eigen::MatrixXd GraphFeatures::edge_vector(std::uint32_t t, std::uint32_t k) const {
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(1, kEdgeFeatDim);
  const auto b = edge_bits.at(off.at(t) + k);
  for (int i = 0; i < kEdgeFeatDim; ++i) e(0, i) = (b >> i) & 1u;
  return e;
}

// ---------------------------------------------------------------------------
// model

void ReprConfig::validate() const {
  if (dim < 1) throw Error("reprnet", "dim must be >= 1");
  if (layers < 1) throw Error("reprnet", "layers must be >= 1");
  if (gate_degree < 0) throw Error("reprnet", "gate_degree must be >= 0");
}

void ReprModel::layout() {
  slots_.clear();
  std::size_t off = 0;
  auto add = [&](std::string name, int rows, int cols) {
    slots_.push_back({std::move(name), off, rows, cols});
    off += std::size_t(rows) * std::size_t(cols);
  };
  const int d = cfg_.dim;
  for (int l = 0; l < cfg_.layers; ++l) {
    const auto p = "layer" + std::to_string(l) + ".";
    add(p + "w_intra", d, 2 * layer_input_dim(l) + kEdgeFeatDim);
    add(p + "w1", d, 2 * d);
    add(p + "b1", d, 1);
    add(p + "w2", d, d);
    add(p + "b2", d, 1);
  }
  theta_ = Eigen::VectorXd::Zero(Eigen::Index(off));
}

ReprModel ReprModel::init(const ReprConfig& cfg) {
  cfg.validate();
  ReprModel m;
  m.cfg_ = cfg;
  m.layout();
  std::mt19937_64 rng(cfg.seed);
  for (std::size_t i = 0; i < m.slots_.size(); ++i) {
    const auto& s = m.slots_[i];
    // biases share the fan-in of the weight they follow
    const int fan_in = s.cols == 1 ? m.slots_[i - 1].cols : s.cols;
    const double bound = 1.0 / std::sqrt(double(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t k = 0; k < s.size(); ++k) m.theta_[Eigen::Index(s.offset + k)] = u(rng);
  }
  return m;
}

void ReprModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("reprnet", "cannot write model " + path);
  out.write(kModelMagic, sizeof kModelMagic);
  put(out, kModelFormatVersion);
  put(out, std::int32_t(cfg_.dim));
  put(out, std::int32_t(cfg_.layers));
  put(out, std::int32_t(cfg_.gate_degree));
  put(out, std::uint8_t(cfg_.inter));
  put(out, cfg_.seed);
  put(out, std::uint64_t(theta_.size()));
  out.write(reinterpret_cast<const char*>(theta_.data()), std::streamsize(theta_.size() * sizeof(double)));
  if (!out) throw Error("reprnet", "short write to " + path);
}

ReprModel ReprModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("reprnet", "cannot open model " + path);
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kModelMagic, sizeof magic) != 0)
    throw Error("reprnet", path + " is not a model checkpoint");
  if (const auto v = take<std::uint32_t>(in, path); v != kModelFormatVersion)
    throw Error("reprnet", "unsupported model format " + std::to_string(v));
  ReprModel m;
  m.cfg_.dim = take<std::int32_t>(in, path);
  m.cfg_.layers = take<std::int32_t>(in, path);
  m.cfg_.gate_degree = take<std::int32_t>(in, path);
  m.cfg_.inter = take<std::uint8_t>(in, path) != 0;
  m.cfg_.seed = take<std::uint64_t>(in, path);
  m.cfg_.validate();
  m.layout();
  if (take<std::uint64_t>(in, path) != std::uint64_t(m.theta_.size()))
    throw Error("reprnet", "parameter count does not match the stored shape");
  if (!in.read(reinterpret_cast<char*>(m.theta_.data()), std::streamsize(m.theta_.size() * sizeof(double))))
    throw Error("reprnet", "truncated model file " + path);
  if (!m.theta_.allFinite()) throw Error("reprnet", "non-finite parameters in " + path);
  return m;
}

std::string ReprModel::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) h = (h ^ b[i]) * 1099511628211ULL;
  };
  const std::int32_t hdr[4] = {cfg_.dim, cfg_.layers, cfg_.gate_degree, cfg_.inter};
  mix(hdr, sizeof hdr);
  mix(theta_.data(), std::size_t(theta_.size()) * sizeof(double));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// cosine

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = std::sqrt(a.squaredNorm() + kNormGuard);
  const double nb = std::sqrt(b.squaredNorm() + kNormGuard);
  return a.dot(b) / (na * nb);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> cosine_grad(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na2 = a.squaredNorm() + kNormGuard;
  const double nb2 = b.squaredNorm() + kNormGuard;
  const double inv = 1.0 / std::sqrt(na2 * nb2);
  const double c = a.dot(b) * inv;
  return {b * inv - a * (c / na2), a * inv - b * (c / nb2)};
}

// ---------------------------------------------------------------------------
// batched engine

struct PairBatch::Impl {
  virtual ~Impl() = default;
  virtual void forward() = 0;
  virtual std::size_t size() const = 0;
  virtual double score(std::size_t) const = 0;
  virtual Eigen::VectorXd embedding(std::size_t, int) const = 0;
  virtual void backward(const std::vector<double>&, Eigen::VectorXd&) const = 0;
};

namespace {

template <typename T>
class Engine final : public PairBatch::Impl {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  using Sparse = Eigen::SparseMatrix<T, Eigen::RowMajor>;
  using CMap = Eigen::Map<const Mat>;
  using MMap = Eigen::Map<Mat>;

  Engine(const ReprModel& m, std::vector<PairBatch::Pair> pairs)
      : model_(m), cfg_(m.config()), theta_(m.parameters().cast<T>()), pairs_(std::move(pairs)) {
    stack();
  }

  std::size_t size() const override { return pairs_.size(); }
  double score(std::size_t k) const override { return scores_.at(k); }
  Eigen::VectorXd embedding(std::size_t k, int side) const override {
    const int s = slot_of(k, side);
    if (s < 0) throw Error("reprnet", "pair has no second graph");
    return emb_.row(s).transpose().template cast<double>();
  }

  void forward() override {
    const int d = cfg_.dim;
    trace_.assign(std::size_t(cfg_.layers), {});
    Mat hin = h0_;
    for (int l = 0; l < cfg_.layers; ++l) {
      auto& L = trace_[std::size_t(l)];
      const int din = model_.layer_input_dim(l);
      const auto wi = weight(l, kIntra);
      const auto w1 = weight(l, kW1);
      const auto w2 = weight(l, kW2);
      const auto b1 = weight(l, kB1);
      const auto b2 = weight(l, kB2);

      // intra: sum over neighbors of [h_t || h_s || e_st]
      L.x.resize(n_, 2 * din + kEdgeFeatDim);
      L.x.leftCols(din) = deg_.asDiagonal() * hin;
      L.x.middleCols(din, din) = adj_ * hin;
      L.x.rightCols(kEdgeFeatDim) = esum_;
      L.hp.noalias() = L.x * wi.transpose();
      L.hp = L.hp.cwiseMax(T(0));

      // inter: attention between gated nodes of the two graphs
      L.z.resize(n_, 2 * d);
      L.z.leftCols(d) = L.hp;
      L.z.rightCols(d).setZero();
      L.p1.assign(pairs_.size(), {});
      L.p2.assign(pairs_.size(), {});
      if (cfg_.inter) {
        for (std::size_t k = 0; k < pairs_.size(); ++k) {
          const int a = slot_of(k, 0), b = slot_of(k, 1);
          if (b < 0 || gated_[a].empty() || gated_[b].empty()) continue;
          const Mat q = L.hp(gated_[a], Eigen::all);
          const Mat kk = L.hp(gated_[b], Eigen::all);
          const Mat s = q * kk.transpose();
          L.p1[k] = softmax_rows(s);
          L.p2[k] = softmax_rows(s.transpose());
          L.z(gated_[a], Eigen::seqN(d, d)) = L.p1[k] * kk;
          L.z(gated_[b], Eigen::seqN(d, d)) = L.p2[k] * q;
        }
      }

      // update MLP
      L.u.noalias() = L.z * w1.transpose();
      L.u.rowwise() += b1.col(0).transpose();
      L.u = L.u.cwiseMax(T(0));
      Mat hout;
      hout.noalias() = L.u * w2.transpose();
      hout.rowwise() += b2.col(0).transpose();
      hin = std::move(hout);
    }

    emb_.resize(Eigen::Index(slot_off_.size() - 1), d);
    for (std::size_t s = 0; s + 1 < slot_off_.size(); ++s)
      emb_.row(Eigen::Index(s)) = hin.middleRows(slot_off_[s], slot_off_[s + 1] - slot_off_[s]).colwise().sum();
    if (!emb_.allFinite()) throw Error("reprnet", "non-finite activation in forward pass");

    scores_.assign(pairs_.size(), 0.0);
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      const int b = slot_of(k, 1);
      if (b < 0) continue;
      const int a = slot_of(k, 0);
      scores_[k] = std::clamp(cosine(emb_.row(a).transpose().template cast<double>(),
                                     emb_.row(b).transpose().template cast<double>()),
                              -1.0, 1.0);
    }
  }

  void backward(const std::vector<double>& dscore, Eigen::VectorXd& grad) const override {
    if (trace_.empty()) throw Error("reprnet", "backward called before forward");
    if (dscore.size() != pairs_.size()) throw Error("reprnet", "one upstream gradient per pair required");
    if (grad.size() != theta_.size()) grad = Eigen::VectorXd::Zero(theta_.size());
    const int d = cfg_.dim;
    Vec g = Vec::Zero(theta_.size());

    Mat dh = Mat::Zero(n_, d);
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      const int a = slot_of(k, 0), b = slot_of(k, 1);
      if (b < 0 || dscore[k] == 0.0) continue;
      auto [ga, gb] = cosine_grad(emb_.row(a).transpose().template cast<double>(),
                                  emb_.row(b).transpose().template cast<double>());
      const auto ra = (ga * dscore[k]).template cast<T>().transpose().eval();
      const auto rb = (gb * dscore[k]).template cast<T>().transpose().eval();
      dh.middleRows(slot_off_[a], slot_off_[a + 1] - slot_off_[a]).rowwise() += ra;
      dh.middleRows(slot_off_[b], slot_off_[b + 1] - slot_off_[b]).rowwise() += rb;
    }

    for (int l = cfg_.layers - 1; l >= 0; --l) {
      const auto& L = trace_[std::size_t(l)];
      const int din = model_.layer_input_dim(l);
      const auto wi = weight(l, kIntra);
      const auto w1 = weight(l, kW1);
      const auto w2 = weight(l, kW2);

      // update MLP
      grad_map(g, l, kW2).noalias() += dh.transpose() * L.u;
      grad_map(g, l, kB2) += dh.colwise().sum().transpose();
      Mat du = (dh * w2).cwiseProduct(positive(L.u));
      grad_map(g, l, kW1).noalias() += du.transpose() * L.z;
      grad_map(g, l, kB1) += du.colwise().sum().transpose();
      Mat dz;
      dz.noalias() = du * w1;
      Mat dhp = dz.leftCols(d);

      // inter
      if (cfg_.inter) {
        for (std::size_t k = 0; k < pairs_.size(); ++k) {
          if (L.p1[k].size() == 0) continue;
          const int a = slot_of(k, 0), b = slot_of(k, 1);
          const Mat q = L.hp(gated_[a], Eigen::all);
          const Mat kk = L.hp(gated_[b], Eigen::all);
          const Mat dmq = dz(gated_[a], Eigen::seqN(d, d));
          const Mat dmp = dz(gated_[b], Eigen::seqN(d, d));
          const auto& p1 = L.p1[k];
          const auto& p2 = L.p2[k];
          Mat dq = Mat::Zero(q.rows(), d);
          Mat dk = Mat::Zero(kk.rows(), d);
          // m_q = softmax(q k^T) k
          dk.noalias() += p1.transpose() * dmq;
          const Mat ds1 = softmax_backward(p1, dmq * kk.transpose());
          dq.noalias() += ds1 * kk;
          dk.noalias() += ds1.transpose() * q;
          // m_p = softmax(k q^T) q
          dq.noalias() += p2.transpose() * dmp;
          const Mat ds2 = softmax_backward(p2, dmp * q.transpose());
          dk.noalias() += ds2 * q;
          dq.noalias() += ds2.transpose() * kk;
          dhp(gated_[a], Eigen::all) += dq;
          dhp(gated_[b], Eigen::all) += dk;
        }
      }

      // intra
      const Mat dpre = dhp.cwiseProduct(positive(L.hp));
      grad_map(g, l, kIntra).noalias() += dpre.transpose() * L.x;
      if (l == 0) break;
      Mat dx;
      dx.noalias() = dpre * wi;
      dh = deg_.asDiagonal() * dx.leftCols(din);
      dh.noalias() += adj_ * dx.middleCols(din, din);  // adjacency is symmetric
    }

    if (!g.allFinite()) throw Error("reprnet", "non-finite gradient");
    grad += g.template cast<double>();
  }

 private:
  struct LayerTrace {
    Mat x, hp, z, u;
    std::vector<Mat> p1, p2;
  };

  const ReprModel& model_;
  ReprConfig cfg_;
  Vec theta_;
  std::vector<PairBatch::Pair> pairs_;
  std::vector<Eigen::Index> slot_off_;
  Eigen::Index n_ = 0;
  Sparse adj_;
  Vec deg_;
  Mat esum_, h0_;
  std::vector<std::vector<Eigen::Index>> gated_;  // per slot, global rows
  std::vector<LayerTrace> trace_;
  Mat emb_;
  std::vector<double> scores_;

  // slot 2k is the first graph of pair k, 2k+1 the second (absent when null)
  int slot_of(std::size_t k, int side) const {
    if (side == 1 && pairs_[k].second == nullptr) return -1;
    return int(2 * k) + side;
  }

  CMap weight(int l, int which) const {
    const auto& s = model_.slot(l, which);
    return CMap(theta_.data() + s.offset, s.rows, s.cols);
  }
  MMap grad_map(Vec& g, int l, int which) const {
    const auto& s = model_.slot(l, which);
    return MMap(g.data() + s.offset, s.rows, s.cols);
  }

  static Mat positive(const Mat& m) { return (m.array() > T(0)).template cast<T>().matrix(); }

  static Mat softmax_rows(const Mat& s) {
    Mat p = (s.colwise() - s.rowwise().maxCoeff()).array().exp().matrix();
    p.array().colwise() /= p.rowwise().sum().array();
    return p;
  }
  // ds = p * (dp - rowsum(dp * p))
  static Mat softmax_backward(const Mat& p, const Mat& dp) {
    const Vec inner = dp.cwiseProduct(p).rowwise().sum();
    return p.cwiseProduct(dp.colwise() - inner);
  }

  void stack() {
    for (const auto& [a, b] : pairs_) {
      if (a == nullptr) throw Error("reprnet", "pair without a first graph");
      if (a->n == 0 || (b != nullptr && b->n == 0)) throw Error("reprnet", "empty graph in pair");
    }
    const std::size_t slots = pairs_.size() * 2;
    slot_off_.assign(slots + 1, 0);
    for (std::size_t s = 0; s < slots; ++s) {
      const GraphFeatures* g = s % 2 ? pairs_[s / 2].second : pairs_[s / 2].first;
      slot_off_[s + 1] = slot_off_[s] + (g ? Eigen::Index(g->n) : 0);
    }
    n_ = slot_off_.back();
    h0_ = Mat::Zero(n_, kNodeFeatDim);
    esum_ = Mat::Zero(n_, kEdgeFeatDim);
    deg_ = Vec::Zero(n_);
    gated_.assign(slots, {});
    std::vector<Eigen::Triplet<T>> trips;
    for (std::size_t s = 0; s < slots; ++s) {
      const GraphFeatures* g = s % 2 ? pairs_[s / 2].second : pairs_[s / 2].first;
      if (!g) continue;
      const auto base = slot_off_[s];
      for (std::uint32_t t = 0; t < g->n; ++t) {
        const auto row = base + Eigen::Index(t);
        h0_(row, g->type[t]) = T(1);
        deg_[row] = T(g->degree(t));
        if (int(g->degree(t)) > cfg_.gate_degree) gated_[s].push_back(row);
        for (auto i = g->off[t]; i < g->off[t + 1]; ++i) {
          trips.emplace_back(row, base + Eigen::Index(g->nbr[i]), T(1));
          for (int bit = 0; bit < kEdgeFeatDim; ++bit)
            if ((g->edge_bits[i] >> bit) & 1u) esum_(row, bit) += T(1);
        }
      }
    }
    adj_.resize(n_, n_);
    adj_.setFromTriplets(trips.begin(), trips.end());
  }
};

}  // namespace

PairBatch::PairBatch(const ReprModel& model, std::vector<Pair> pairs, Precision precision) {
  if (precision == Precision::Float)
    impl_ = std::make_unique<Engine<float>>(model, std::move(pairs));
  else
    impl_ = std::make_unique<Engine<double>>(model, std::move(pairs));
}
PairBatch::~PairBatch() = default;
PairBatch::PairBatch(PairBatch&&) noexcept = default;
PairBatch& PairBatch::operator=(PairBatch&&) noexcept = default;

void PairBatch::forward() { impl_->forward(); }
std::size_t PairBatch::size() const noexcept { return impl_->size(); }
double PairBatch::score(std::size_t pair) const { return impl_->score(pair); }
Eigen::VectorXd PairBatch::embedding(std::size_t pair, int side) const { return impl_->embedding(pair, side); }
void PairBatch::backward(const std::vector<double>& dscore, Eigen::VectorXd& grad) const {
  impl_->backward(dscore, grad);
}

PairOutput forward_pair(const ReprModel& m, const GraphFeatures& q, const GraphFeatures& p) {
  PairBatch batch(m, {{&q, &p}});
  batch.forward();
  return {batch.embedding(0, 0), batch.embedding(0, 1), batch.score(0)};
}

Eigen::VectorXd backward_pair(const ReprModel& m, const GraphFeatures& q, const GraphFeatures& p, double upstream) {
  PairBatch batch(m, {{&q, &p}});
  batch.forward();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(Eigen::Index(m.parameter_count()));
  batch.backward({upstream}, grad);
  return grad;
}

Eigen::VectorXd embed(const ReprModel& m, const GraphFeatures& g) {
  PairBatch batch(m, {{&g, nullptr}});
  batch.forward();
  return batch.embedding(0, 0);
}

}  // namespace provhunt
