#pragma once
// The three training objectives and the mini-batch Adam loop.
//
//   hsg     skip-gram with negative sampling on free embeddings θ
//   hsg-sr  hsg plus γ·‖θ_v − f(Y_v)‖² pulling content-node rows toward
//           the text encoder (gradients flow into both)
//   se-hsg  skip-gram on the enhanced view Θ, where a content node is
//           represented by the encoder output alone and owns no free row
//
// The paper-side objectives are maximized; everything here is the negated
// loss, minimized. Batches are processed batch-synchronously: workers
// compute gradients against a read-only parameter snapshot and a single
// reducer applies the Adam step, so results are reproducible.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <map>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hetembed/common.hpp"
#include "hetembed/graph.hpp"
#include "hetembed/model.hpp"
#include "hetembed/rng.hpp"
#include "hetembed/text_encoder.hpp"
#include "hetembed/walker.hpp"

namespace hetembed {

struct TrainConfig {
  Variant variant = Variant::kSeHsg;
  Eigen::Index dim = 128;      // d
  size_t negatives = 1;        // M, negatives per context pair
  double gamma = 1.0;          // regularization trade-off (hsg-sr)
  size_t batch_size = 512;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  size_t max_epochs = 200;
  double tolerance = 1e-4;     // relative epoch-loss change; non-finite disables early stop
  uint64_t seed = 1;
  size_t workers = 1;
  size_t max_tokens = 100;     // t_max for content tokenization
  NoiseSupport noise_support = NoiseSupport::kCorpusVisited;
  std::string word_vec_path;   // recorded in the model as a reload hint

  void validate() const {
    if (dim < 1) throw DataError("dim must be >= 1");
    if (negatives < 1) throw DataError("negatives must be >= 1");
    if (gamma < 0.0) throw DataError("gamma must be >= 0");
    if (batch_size < 1) throw DataError("batch_size must be >= 1");
    if (max_epochs < 1) throw DataError("max_epochs must be >= 1");
    if (lr <= 0.0) throw DataError("lr must be > 0");
  }
};

// Per-triplet loss and the sparse gradients it touches. Rows are merged, so
// a node appearing twice in a triplet shows up once with the summed gradient.
struct TripletGrads {
  double loss = 0.0;
  std::vector<std::pair<NodeIndex, Vec>> dtheta;  // free-row gradients
  std::vector<std::pair<NodeIndex, Vec>> denc;    // dL/dE_v, routed into the encoder

  static void merge(std::vector<std::pair<NodeIndex, Vec>>& into, NodeIndex v, const Vec& g) {
    for (auto& [node, grad] : into) {
      if (node == v) {
        grad += g;
        return;
      }
    }
    into.emplace_back(v, g);
  }
};

namespace detail {

// Shared skip-gram-with-one-negative pieces on three resolved vectors.
struct SgTerms {
  double loss;
  Vec gv, gc, gn;
};

inline SgTerms skipgram_terms(const Vec& tv, const Vec& tc, const Vec& tn) {
  double sp = tc.dot(tv);
  double sn = tn.dot(tv);
  SgTerms t;
  t.loss = -(log_sigmoid(sp) + log_sigmoid(-sn));
  double a = sigmoid(sp) - 1.0;  // d(-log σ(sp))/dsp
  double b = sigmoid(sn);        // d(-log σ(-sn))/dsn
  t.gv = a * tc + b * tn;
  t.gc = a * tv;
  t.gn = b * tv;
  return t;
}

}  // namespace detail

// Plain skip-gram loss on free rows: every node resolves through theta.
template <typename ThetaFn>
TripletGrads triplet_loss_hsg(const ContextTriplet& t, ThetaFn&& theta) {
  Vec tv = theta(t.center), tc = theta(t.context), tn = theta(t.negative);
  detail::SgTerms s = detail::skipgram_terms(tv, tc, tn);
  TripletGrads g;
  g.loss = s.loss;
  TripletGrads::merge(g.dtheta, t.center, s.gv);
  TripletGrads::merge(g.dtheta, t.context, s.gc);
  TripletGrads::merge(g.dtheta, t.negative, s.gn);
  return g;
}

// Skip-gram on θ plus γ·‖θ_v* − E_v*‖² for each distinct content node v*
// in the triplet; the penalty pushes the row and pulls the encoder.
template <typename ThetaFn, typename EncFn, typename ContentFn>
TripletGrads triplet_loss_hsg_sr(const ContextTriplet& t, ThetaFn&& theta, EncFn&& enc,
                                 ContentFn&& is_content, double gamma) {
  TripletGrads g = triplet_loss_hsg(t, theta);
  NodeIndex nodes[3] = {t.center, t.context, t.negative};
  for (int i = 0; i < 3; ++i) {
    bool seen = false;
    for (int j = 0; j < i; ++j) seen = seen || nodes[j] == nodes[i];
    if (seen || !is_content(nodes[i])) continue;
    Vec diff = Vec(theta(nodes[i])) - Vec(enc(nodes[i]));
    g.loss += gamma * diff.squaredNorm();
    TripletGrads::merge(g.dtheta, nodes[i], Vec(2.0 * gamma * diff));
    TripletGrads::merge(g.denc, nodes[i], Vec(-2.0 * gamma * diff));
  }
  return g;
}

// Skip-gram on the enhanced view Θ: content nodes resolve to the encoder
// output (gradient routed into Φ), all others to their free row.
template <typename RepFn, typename ContentFn>
TripletGrads triplet_loss_se_hsg(const ContextTriplet& t, RepFn&& rep, ContentFn&& is_content) {
  Vec tv = rep(t.center), tc = rep(t.context), tn = rep(t.negative);
  detail::SgTerms s = detail::skipgram_terms(tv, tc, tn);
  TripletGrads g;
  g.loss = s.loss;
  auto route = [&](NodeIndex v, const Vec& grad) {
    if (is_content(v)) TripletGrads::merge(g.denc, v, grad);
    else TripletGrads::merge(g.dtheta, v, grad);
  };
  route(t.center, s.gv);
  route(t.context, s.gc);
  route(t.negative, s.gn);
  return g;
}

// Explicit heterogeneous softmax over one node type (test oracle only;
// training always uses the negative-sampling surrogate above).
inline std::vector<double> hetero_softmax(const std::vector<Vec>& type_rows, const Vec& center) {
  if (type_rows.empty()) throw DataError("empty type row set");
  std::vector<double> scores(type_rows.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < type_rows.size(); ++i) {
    scores[i] = type_rows[i].dot(center);
    mx = std::max(mx, scores[i]);
  }
  double total = 0.0;
  for (double& s : scores) {
    s = std::exp(s - mx);
    total += s;
  }
  for (double& s : scores) s /= total;
  return scores;
}

struct AdamHyper {
  double lr = 0.001, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

// Lazy per-row Adam: a row's moments and step counter advance only when a
// batch touches the row (untouched rows keep their moments undecayed).
class RowAdam {
 public:
  RowAdam(Eigen::Index dim, Eigen::Index rows)
      : m_(Mat::Zero(dim, rows)), v_(Mat::Zero(dim, rows)), step_(static_cast<size_t>(rows), 0) {}

  void apply(Mat& params, Eigen::Index row, const Vec& grad, const AdamHyper& hp) {
    if (!grad.allFinite())
      throw NumericError("non-finite gradient on embedding row " + std::to_string(row));
    uint64_t t = ++step_[static_cast<size_t>(row)];
    m_.col(row) = hp.beta1 * m_.col(row) + (1.0 - hp.beta1) * grad;
    v_.col(row) = hp.beta2 * v_.col(row) + (1.0 - hp.beta2) * grad.cwiseProduct(grad);
    double mc = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
    double vc = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
    Vec mhat = m_.col(row) / mc;
    Vec vhat = v_.col(row) / vc;
    params.col(row) -=
        hp.lr * mhat.cwiseQuotient(vhat.cwiseSqrt() + Vec::Constant(vhat.size(), hp.eps));
  }

 private:
  Mat m_, v_;
  std::vector<uint64_t> step_;
};

// Dense Adam over the six GRU matrices with a single step counter.
class GruAdam {
 public:
  GruAdam(Eigen::Index d, Eigen::Index dw)
      : m_(GruParams::zero(d, dw)), v_(GruParams::zero(d, dw)) {}

  void apply(GruParams& params, const GruParams& grad, const AdamHyper& hp) {
    ++step_;
    double mc = 1.0 - std::pow(hp.beta1, static_cast<double>(step_));
    double vc = 1.0 - std::pow(hp.beta2, static_cast<double>(step_));
    auto pm = params.matrices();
    auto gm = grad.matrices();
    auto mm = m_.matrices();
    auto vm = v_.matrices();
    for (size_t i = 0; i < pm.size(); ++i) {
      if (!gm[i]->allFinite())
        throw NumericError(std::string("non-finite gradient on encoder matrix ") +
                           GruParams::names()[i]);
      *mm[i] = hp.beta1 * (*mm[i]) + (1.0 - hp.beta1) * (*gm[i]);
      *vm[i] = hp.beta2 * (*vm[i]) + (1.0 - hp.beta2) * gm[i]->cwiseProduct(*gm[i]);
      *pm[i] -= hp.lr * (mm[i]->array() / mc / ((vm[i]->array() / vc).sqrt() + hp.eps)).matrix();
    }
  }

  uint64_t steps() const { return step_; }

 private:
  GruParams m_, v_;
  uint64_t step_ = 0;
};

// Snapshot of everything a gradient evaluation reads. Kept separate from
// the optimizer so tests can perturb parameters and re-evaluate.
struct TrainState {
  Variant variant = Variant::kHsg;
  double gamma = 1.0;
  Eigen::Index dim = 0;
  Eigen::Index word_dim = 0;
  Mat theta;                      // dim x (#owned rows)
  std::vector<int64_t> row_of;    // node -> column of theta, -1 if none
  GruParams phi;
  bool has_phi = false;
  std::vector<uint8_t> is_content;
  std::vector<Mat> content_inputs;  // node -> d_w x len (empty for non-content)

  Eigen::Index row(NodeIndex v) const {
    int64_t r = row_of.at(v);
    if (r < 0) throw DataError("node owns no embedding row");
    return static_cast<Eigen::Index>(r);
  }
};

// Summed loss and merged gradients over a set of triplets. Encoder
// gradients are already folded through BPTT into dphi.
struct BatchGrads {
  double loss_sum = 0.0;
  size_t count = 0;
  std::map<NodeIndex, Vec> dtheta;
  GruParams dphi;
  bool touched_encoder = false;
};

namespace detail {

inline BatchGrads accumulate_chunk(const TrainState& st, const ContextTriplet* ts, size_t n) {
  BatchGrads out;
  out.count = n;
  if (st.has_phi) out.dphi = GruParams::zero(st.dim, st.word_dim);

  // Encode each distinct content node appearing in the chunk exactly once.
  std::unordered_map<NodeIndex, EncodeResult> encoded;
  if (st.variant != Variant::kHsg) {
    for (size_t i = 0; i < n; ++i) {
      for (NodeIndex v : {ts[i].center, ts[i].context, ts[i].negative}) {
        if (st.is_content[v] && !encoded.count(v))
          encoded.emplace(v, encode_forward(st.phi, st.content_inputs[v]));
      }
    }
  }

  auto theta_of = [&](NodeIndex v) -> Vec { return st.theta.col(st.row(v)); };
  auto enc_of = [&](NodeIndex v) -> Vec { return encoded.at(v).embedding; };
  auto is_content = [&](NodeIndex v) { return st.is_content[v] != 0; };
  auto rep_of = [&](NodeIndex v) -> Vec {
    return st.is_content[v] ? Vec(encoded.at(v).embedding) : Vec(st.theta.col(st.row(v)));
  };

  std::map<NodeIndex, Vec> denc;
  for (size_t i = 0; i < n; ++i) {
    TripletGrads g;
    switch (st.variant) {
      case Variant::kHsg: g = triplet_loss_hsg(ts[i], theta_of); break;
      case Variant::kHsgSr:
        g = triplet_loss_hsg_sr(ts[i], theta_of, enc_of, is_content, st.gamma);
        break;
      case Variant::kSeHsg: g = triplet_loss_se_hsg(ts[i], rep_of, is_content); break;
    }
    out.loss_sum += g.loss;
    for (auto& [node, grad] : g.dtheta) {
      auto [it, fresh] = out.dtheta.try_emplace(node, std::move(grad));
      if (!fresh) it->second += grad;
    }
    for (auto& [node, grad] : g.denc) {
      auto [it, fresh] = denc.try_emplace(node, std::move(grad));
      if (!fresh) it->second += grad;
    }
  }

  // Fold accumulated dL/dE_v through the encoder (ascending node order).
  for (const auto& [node, dE] : denc) {
    GruParams g = encode_backward(st.phi, encoded.at(node).cache, dE);
    auto dst = out.dphi.matrices();
    auto src = g.matrices();
    for (size_t i = 0; i < dst.size(); ++i) *dst[i] += *src[i];
    out.touched_encoder = true;
  }
  return out;
}

}  // namespace detail

// Loss and gradients over [begin, end) of the triplet list against a
// read-only parameter snapshot. With several workers the range is split
// into contiguous chunks merged in chunk order, so the result does not
// depend on scheduling.
inline BatchGrads accumulate_triplets(const TrainState& st, const std::vector<ContextTriplet>& ts,
                                      size_t begin, size_t end, size_t workers = 1) {
  size_t n = end - begin;
  workers = std::max<size_t>(1, workers);
  if (workers == 1 || n < 2 * workers)
    return detail::accumulate_chunk(st, ts.data() + begin, n);

  size_t chunk = (n + workers - 1) / workers;
  std::vector<BatchGrads> parts(workers);
  std::vector<std::thread> pool;
  for (size_t w = 0; w < workers; ++w) {
    size_t lo = begin + w * chunk;
    size_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(
        [&, w, lo, hi] { parts[w] = detail::accumulate_chunk(st, ts.data() + lo, hi - lo); });
  }
  for (auto& t : pool) t.join();

  BatchGrads out;
  if (st.has_phi) out.dphi = GruParams::zero(st.dim, st.word_dim);
  for (auto& part : parts) {
    if (part.count == 0) continue;
    out.loss_sum += part.loss_sum;
    out.count += part.count;
    for (auto& [node, grad] : part.dtheta) {
      auto [it, fresh] = out.dtheta.try_emplace(node, std::move(grad));
      if (!fresh) it->second += grad;
    }
    if (part.touched_encoder) {
      auto dst = out.dphi.matrices();
      auto src = part.dphi.matrices();
      for (size_t i = 0; i < dst.size(); ++i) *dst[i] += *src[i];
      out.touched_encoder = true;
    }
  }
  return out;
}

struct TrainResult {
  TrainedModel model;
  std::vector<EpochStat> log;
  size_t triplet_count = 0;
  size_t negative_collisions = 0;
  size_t empty_content_nodes = 0;
};

class Trainer {
 public:
  Trainer(const HetGraph& g, TrainConfig cfg, WalkConfig walk_cfg, const WordTable* words)
      : graph_(g), cfg_(std::move(cfg)), walk_cfg_(std::move(walk_cfg)), words_(words) {
    cfg_.validate();
    if (cfg_.variant != Variant::kHsg && words_ == nullptr)
      throw DataError(variant_name(cfg_.variant) + " requires word vectors");
  }

  // Corpus, noise table, triplets, and parameter initialization. Idempotent.
  void prepare() {
    if (prepared_) return;
    corpus_ = generate_corpus(graph_, walk_cfg_);
    freq_ = corpus_frequencies(corpus_, graph_.num_nodes());
    noise_ = NoiseTable(freq_, graph_, cfg_.noise_support);
    Rng neg_rng = make_rng(cfg_.seed, "negatives");
    TripletSet ts =
        sample_triplets(corpus_, walk_cfg_.window, noise_, graph_, neg_rng, cfg_.negatives);
    triplets_ = std::move(ts.triplets);
    collisions_ = ts.negative_collisions;
    if (triplets_.empty()) throw DataError("empty triplet set");

    st_.variant = cfg_.variant;
    st_.gamma = cfg_.gamma;
    st_.dim = cfg_.dim;
    st_.is_content.assign(graph_.num_nodes(), 0);
    for (NodeIndex v = 0; v < graph_.num_nodes(); ++v)
      st_.is_content[v] = graph_.has_content(v) ? 1 : 0;

    st_.row_of.assign(graph_.num_nodes(), -1);
    int64_t rows = 0;
    for (NodeIndex v = 0; v < graph_.num_nodes(); ++v) {
      if (cfg_.variant == Variant::kSeHsg && st_.is_content[v]) continue;
      st_.row_of[v] = rows++;
    }
    st_.theta.resize(cfg_.dim, rows);
    Rng theta_rng = make_rng(cfg_.seed, "theta");
    double bound = 0.5 / static_cast<double>(cfg_.dim);
    for (Eigen::Index c = 0; c < st_.theta.cols(); ++c)
      for (Eigen::Index r = 0; r < st_.theta.rows(); ++r)
        st_.theta(r, c) = uniform_range(theta_rng, -bound, bound);

    if (cfg_.variant != Variant::kHsg) {
      st_.has_phi = true;
      st_.word_dim = words_->dim();
      Rng phi_rng = make_rng(cfg_.seed, "phi");
      st_.phi = GruParams::init(cfg_.dim, st_.word_dim, phi_rng);
      st_.content_inputs.resize(graph_.num_nodes());
      for (NodeIndex v = 0; v < graph_.num_nodes(); ++v) {
        if (!st_.is_content[v]) continue;
        auto tokens = tokenize(graph_.content(v), cfg_.max_tokens);
        if (tokens.empty()) ++empty_content_;
        st_.content_inputs[v] = words_->embed_sequence(tokens);
      }
      if (empty_content_ > 0 && log_level() >= 1)
        std::cerr << "[hetembed] warning: " << empty_content_
                  << " content node(s) tokenize to nothing; using zero vectors\n";
    }
    prepared_ = true;
  }

  TrainResult run() {
    prepare();
    RowAdam row_adam(st_.theta.rows(), st_.theta.cols());
    GruAdam gru_adam(cfg_.dim, st_.has_phi ? st_.word_dim : 1);
    AdamHyper hp{cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.eps};

    std::vector<size_t> order(triplets_.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<ContextTriplet> batch;
    std::vector<EpochStat> log;
    double prev_loss = 0.0;

    for (size_t epoch = 1; epoch <= cfg_.max_epochs; ++epoch) {
      auto t0 = std::chrono::steady_clock::now();
      // Fresh negatives every epoch (seeded by the epoch number, so runs stay
      // reproducible). Reusing one draw forever would leave a finite
      // constraint set the model can satisfy by memorizing the sampled pairs
      // instead of pushing unrelated nodes apart.
      Rng neg_rng = make_rng(cfg_.seed, "negatives", epoch);
      for (ContextTriplet& t : triplets_) {
        TypeId ty = graph_.type_of(t.context);
        NodeIndex neg = noise_.sample(ty, neg_rng);
        for (int attempt = 0; neg == t.context && attempt < 10; ++attempt)
          neg = noise_.sample(ty, neg_rng);
        if (neg == t.context) ++collisions_;
        t.negative = neg;
      }
      Rng shuffle_rng = make_rng(cfg_.seed, "shuffle", epoch);
      shuffle(order, shuffle_rng);

      double loss_sum = 0.0;
      for (size_t start = 0; start < order.size(); start += cfg_.batch_size) {
        size_t stop = std::min(order.size(), start + cfg_.batch_size);
        batch.clear();
        for (size_t i = start; i < stop; ++i) batch.push_back(triplets_[order[i]]);
        BatchGrads bg = accumulate_triplets(st_, batch, 0, batch.size(), cfg_.workers);
        loss_sum += bg.loss_sum;
        for (const auto& [node, grad] : bg.dtheta)
          row_adam.apply(st_.theta, st_.row(node), grad, hp);
        if (bg.touched_encoder) gru_adam.apply(st_.phi, bg.dphi, hp);
      }

      double epoch_loss = loss_sum / static_cast<double>(triplets_.size());
      if (!std::isfinite(epoch_loss)) throw NumericError("training diverged: non-finite loss");
      double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log.push_back({epoch, epoch_loss, seconds});
      if (log_level() >= 2)
        std::cerr << "[hetembed] epoch " << epoch << " loss " << epoch_loss << "\n";

      if (epoch > 1 && std::isfinite(cfg_.tolerance)) {
        double rel = std::abs(prev_loss - epoch_loss) / std::max(prev_loss, 1e-12);
        if (rel < cfg_.tolerance) {
          prev_loss = epoch_loss;
          break;
        }
      }
      prev_loss = epoch_loss;
    }

    TrainResult res;
    res.model = finalize();
    res.log = std::move(log);
    for (const auto& e : res.log) res.model.epoch_losses.push_back(e.loss);
    res.triplet_count = triplets_.size();
    res.negative_collisions = collisions_;
    res.empty_content_nodes = empty_content_;
    return res;
  }

  // Test hooks: evaluate loss/gradients at the current (possibly perturbed)
  // parameter snapshot without stepping the optimizer.
  const TrainState& state() const { return st_; }
  TrainState& mutable_state() { return st_; }
  const std::vector<ContextTriplet>& triplets() const { return triplets_; }
  const NoiseTable& noise() const { return noise_; }
  const WalkCorpus& corpus() const { return corpus_; }
  BatchGrads evaluate(const std::vector<ContextTriplet>& ts) const {
    return accumulate_triplets(st_, ts, 0, ts.size(), 1);
  }

 private:
  TrainedModel finalize() const {
    TrainedModel m;
    m.variant = cfg_.variant;
    m.dim = cfg_.dim;
    m.word_dim = st_.has_phi ? st_.word_dim : 0;
    m.gamma = cfg_.gamma;
    m.negatives = cfg_.negatives;
    m.seed = cfg_.seed;
    m.window = walk_cfg_.window;
    m.walks_per_node = walk_cfg_.walks_per_node;
    m.walk_length = walk_cfg_.walk_length;
    m.walk_mode = walk_cfg_.mode;
    m.noise_support = cfg_.noise_support;
    for (const auto& s : walk_cfg_.schemes) m.scheme_names.push_back(s.name);
    m.word_vec_path = cfg_.word_vec_path;
    m.schema = graph_.schema();
    m.labels.reserve(graph_.num_nodes());
    for (NodeIndex v = 0; v < graph_.num_nodes(); ++v) {
      m.labels.push_back(graph_.label(v));
      m.types.push_back(graph_.type_of(v));
    }
    m.is_content = st_.is_content;
    m.corpus_freq = freq_;
    m.theta = st_.theta;
    m.has_phi = st_.has_phi;
    if (st_.has_phi) {
      m.phi = st_.phi;
      auto content = graph_.content_nodes();
      m.content_reps.resize(cfg_.dim, static_cast<Eigen::Index>(content.size()));
      for (size_t i = 0; i < content.size(); ++i)
        m.content_reps.col(static_cast<Eigen::Index>(i)) =
            encode_forward(st_.phi, st_.content_inputs[content[i]]).embedding;
    } else {
      m.content_reps = Mat(cfg_.dim, 0);
    }
    m.rebuild_lookups();
    return m;
  }

  const HetGraph& graph_;
  TrainConfig cfg_;
  WalkConfig walk_cfg_;
  const WordTable* words_;
  bool prepared_ = false;
  WalkCorpus corpus_;
  std::vector<uint64_t> freq_;
  NoiseTable noise_;
  std::vector<ContextTriplet> triplets_;
  size_t collisions_ = 0;
  size_t empty_content_ = 0;
  TrainState st_;
};

inline TrainResult train(const HetGraph& g, const TrainConfig& cfg, const WalkConfig& walk_cfg,
                         const WordTable* words = nullptr) {
  Trainer t(g, cfg, walk_cfg, words);
  return t.run();
}

}  // namespace hetembed
