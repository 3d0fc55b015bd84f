#pragma once
// Evaluation protocols over trained representations: link prediction with a
// logistic classifier on Hadamard link features, ranking retrieval
// (HitRatio@k), venue recommendation (Recall@k), and top-k similarity
// search. All metrics are pure reads; every node resolves through one
// central representation matrix.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hetembed/common.hpp"
#include "hetembed/graph.hpp"
#include "hetembed/model.hpp"
#include "hetembed/rng.hpp"
#include "hetembed/tsv.hpp"

namespace hetembed {

// Every node's evaluation-facing vector as one d x |V| matrix (encoder
// output for content nodes under the encoder variants, free row otherwise).
inline Mat resolved_reps(const TrainedModel& m) {
  Mat reps(m.dim, static_cast<Eigen::Index>(m.num_nodes()));
  for (NodeIndex v = 0; v < m.num_nodes(); ++v)
    reps.col(static_cast<Eigen::Index>(v)) = m.resolve(v);
  return reps;
}

// Cosine similarity; -inf when either vector has zero norm, so degenerate
// candidates sink to the bottom of every ranking.
inline double cosine(const Vec& a, const Vec& b) {
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return -std::numeric_limits<double>::infinity();
  return a.dot(b) / (na * nb);
}

// Element-wise product of the two endpoint representations.
inline Vec link_features(const Vec& u, const Vec& v) {
  if (u.size() != v.size()) throw DataError("link feature dimension mismatch");
  return u.cwiseProduct(v);
}

struct RankedItem {
  NodeIndex node;
  double score;
};

// Candidates ranked by descending cosine to the query vector; equal scores
// break toward the smaller internal index.
inline std::vector<RankedItem> rank_by_cosine(const Vec& query, const Mat& reps,
                                              const std::vector<NodeIndex>& candidates) {
  std::vector<RankedItem> ranked;
  ranked.reserve(candidates.size());
  for (NodeIndex c : candidates)
    ranked.push_back({c, cosine(query, reps.col(static_cast<Eigen::Index>(c)))});
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedItem& a, const RankedItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.node < b.node;
  });
  return ranked;
}

// Top-k nodes of one type most similar to the query node (the query itself
// is excluded -- its self-similarity of 1 carries no information).
inline std::vector<RankedItem> top_k_relevant(const Mat& reps, const std::vector<TypeId>& types,
                                              NodeIndex query, TypeId target_type, size_t k) {
  if (query >= types.size()) throw DataError("unknown node index");
  std::vector<NodeIndex> candidates;
  for (NodeIndex v = 0; v < types.size(); ++v)
    if (types[v] == target_type && v != query) candidates.push_back(v);
  auto ranked = rank_by_cosine(reps.col(static_cast<Eigen::Index>(query)), reps, candidates);
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

struct RankingQuery {
  NodeIndex query;
  NodeIndex positive;
  std::vector<NodeIndex> negatives;  // same type as the positive, exclude query & positive
};

// Fraction of queries whose positive lands in the top k among
// positive + negatives, scored by cosine to the query node.
inline double hit_ratio_at_k(const Mat& reps, const std::vector<RankingQuery>& queries, size_t k) {
  if (queries.empty()) throw DataError("no ranking queries");
  size_t hits = 0;
  for (const auto& q : queries) {
    if (k > q.negatives.size() + 1)
      throw DataError("k exceeds candidate count (" + std::to_string(q.negatives.size() + 1) + ")");
    Vec qv = reps.col(static_cast<Eigen::Index>(q.query));
    double pos_score = cosine(qv, reps.col(static_cast<Eigen::Index>(q.positive)));
    size_t better = 0;
    for (NodeIndex n : q.negatives) {
      double s = cosine(qv, reps.col(static_cast<Eigen::Index>(n)));
      if (s > pos_score || (s == pos_score && n < q.positive)) ++better;
    }
    if (better < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}

// Mean over queried nodes of |top-k candidates ∩ truth| / |truth|.
// Entries with an empty truth set are excluded from the mean.
inline double recall_at_k(const Mat& reps,
                          const std::vector<std::pair<NodeIndex, std::vector<NodeIndex>>>& truth,
                          const std::vector<NodeIndex>& candidates, size_t k) {
  double total = 0.0;
  size_t counted = 0;
  for (const auto& [node, relevant] : truth) {
    if (relevant.empty()) continue;
    auto ranked = rank_by_cosine(reps.col(static_cast<Eigen::Index>(node)), reps, candidates);
    std::unordered_set<NodeIndex> relevant_set(relevant.begin(), relevant.end());
    size_t found = 0;
    for (size_t i = 0; i < std::min(k, ranked.size()); ++i)
      if (relevant_set.count(ranked[i].node)) ++found;
    total += static_cast<double>(found) / static_cast<double>(relevant.size());
    ++counted;
  }
  if (counted == 0) throw DataError("no nodes with a non-empty truth set");
  return total / static_cast<double>(counted);
}

// ---------- logistic classifier for link prediction ----------

struct LogisticHyper {
  double l2 = 1e-4;        // ridge on the weights (not on the bias)
  double tol = 1e-6;       // stop when the gradient norm drops below this
  size_t max_iters = 5000;
};

struct LogisticModel {
  Vec w;
  double b = 0.0;

  double score(const Vec& x) const { return w.dot(x) + b; }
  int classify(const Vec& x) const { return score(x) >= 0.0 ? 1 : 0; }
};

// Full-batch gradient descent with Armijo backtracking on the mean
// cross-entropy plus (l2/2)·‖w‖². Deterministic, no sampling.
inline LogisticModel train_logistic(const std::vector<Vec>& features,
                                    const std::vector<int>& labels,
                                    const LogisticHyper& hyper = {}) {
  if (features.empty() || features.size() != labels.size())
    throw DataError("logistic training needs matching features and labels");
  bool has0 = false, has1 = false;
  for (int y : labels) (y ? has1 : has0) = true;
  if (!has0 || !has1) throw DataError("logistic training needs both classes");

  Eigen::Index d = features[0].size();
  double n = static_cast<double>(features.size());
  LogisticModel model;
  model.w = Vec::Zero(d);

  auto loss_at = [&](const Vec& w, double b) {
    double loss = 0.0;
    for (size_t i = 0; i < features.size(); ++i) {
      double z = w.dot(features[i]) + b;
      // -[y log p + (1-y) log(1-p)] written via log-sigmoid for stability
      loss += labels[i] ? -log_sigmoid(z) : -log_sigmoid(-z);
    }
    return loss / n + 0.5 * hyper.l2 * w.squaredNorm();
  };

  double loss = loss_at(model.w, model.b);
  double step = 1.0;
  for (size_t iter = 0; iter < hyper.max_iters; ++iter) {
    Vec gw = hyper.l2 * model.w;
    double gb = 0.0;
    for (size_t i = 0; i < features.size(); ++i) {
      double p = sigmoid(model.w.dot(features[i]) + model.b);
      double err = (p - static_cast<double>(labels[i])) / n;
      gw += err * features[i];
      gb += err;
    }
    double gnorm2 = gw.squaredNorm() + gb * gb;
    if (std::sqrt(gnorm2) < hyper.tol) break;

    step = std::min(step * 2.0, 1e6);  // re-grow after previous shrinking
    while (true) {
      Vec w2 = model.w - step * gw;
      double b2 = model.b - step * gb;
      double l2 = loss_at(w2, b2);
      if (l2 <= loss - 0.5 * step * gnorm2 || step < 1e-12) {
        model.w = w2;
        model.b = b2;
        loss = l2;
        break;
      }
      step *= 0.5;
    }
    if (!model.w.allFinite()) throw NumericError("logistic training diverged");
  }
  return model;
}

struct ClassificationReport {
  double accuracy = 0.0;
  double f1 = 0.0;  // positive class = link present
  size_t count = 0;
};

inline ClassificationReport accuracy_f1(const std::vector<int>& preds,
                                        const std::vector<int>& labels) {
  if (preds.empty() || preds.size() != labels.size())
    throw DataError("prediction/label size mismatch");
  size_t tp = 0, fp = 0, fn = 0, correct = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == labels[i]) ++correct;
    if (preds[i] == 1 && labels[i] == 1) ++tp;
    if (preds[i] == 1 && labels[i] == 0) ++fp;
    if (preds[i] == 0 && labels[i] == 1) ++fn;
  }
  ClassificationReport r;
  r.count = preds.size();
  r.accuracy = static_cast<double>(correct) / static_cast<double>(preds.size());
  double prec = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  double rec = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = (prec + rec) > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
  return r;
}

// ---------- event files and protocol drivers ----------

// `label_a<TAB>label_b` per line; identical pairs collapse, and with
// unordered=true so do the two orientations of a pair.
inline std::vector<std::pair<std::string, std::string>> load_event_pairs(const std::string& path,
                                                                         bool unordered) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::set<std::pair<std::string, std::string>> seen;
  for_each_tsv_row(path, [&](size_t lineno, const std::vector<std::string>& f) {
    if (f.size() != 2) throw DataError(tsv_context(path, lineno) + ": expected `a<TAB>b`");
    auto key = std::make_pair(f[0], f[1]);
    if (unordered && key.second < key.first) std::swap(key.first, key.second);
    if (seen.insert(key).second) pairs.push_back(key);
  });
  return pairs;
}

// Maps event labels to model indices, rejecting nodes absent from training
// (evaluation events must reference the pre-split graph only).
inline std::vector<std::pair<NodeIndex, NodeIndex>> resolve_event_pairs(
    const TrainedModel& m, const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::vector<std::pair<NodeIndex, NodeIndex>> out;
  out.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    if (!m.has_node(a)) throw DataError("evaluation event references unknown node: " + a);
    if (!m.has_node(b)) throw DataError("evaluation event references unknown node: " + b);
    out.emplace_back(m.node(a), m.node(b));
  }
  return out;
}

struct LinkPredictionReport {
  double accuracy = 0.0;
  double f1 = 0.0;
  size_t train_count = 0;
  size_t test_count = 0;
};

namespace detail {

inline bool share_neighbor(const HetGraph& g, NodeIndex u, NodeIndex w) {
  const auto& nu = g.neighbors(u);
  const auto& nw = g.neighbors(w);
  size_t i = 0, j = 0;  // both sorted ascending
  while (i < nu.size() && j < nw.size()) {
    if (nu[i] == nw[j]) return true;
    if (nu[i] < nw[j]) ++i;
    else ++j;
  }
  return false;
}

}  // namespace detail

// Link prediction: positives are the held-out future pairs; an equal number
// of negatives is drawn uniformly over same-type pairs that neither appear
// among the positives nor interact in the training graph (no direct edge and
// no shared neighbor, which is what "collaboration" means through papers).
// Hadamard features, seeded 70/30 split, logistic classifier, metrics on
// the held-out 30%.
inline LinkPredictionReport link_prediction(const Mat& reps, const HetGraph& g,
                                            const TrainedModel& m,
                                            const std::vector<std::pair<NodeIndex, NodeIndex>>& positives,
                                            uint64_t seed,
                                            const LogisticHyper& hyper = {}) {
  if (positives.empty()) throw DataError("no positive evaluation pairs");
  TypeId type = m.types[positives[0].first];
  std::set<std::pair<NodeIndex, NodeIndex>> known;
  for (auto [a, b] : positives) {
    if (m.types[a] != type || m.types[b] != type)
      throw DataError("evaluation pairs mix node types");
    known.insert(std::minmax(a, b));
  }

  std::vector<NodeIndex> pool;
  for (NodeIndex v = 0; v < m.num_nodes(); ++v)
    if (m.types[v] == type) pool.push_back(v);
  if (pool.size() < 2) throw DataError("not enough nodes to sample negative pairs");

  // The training graph carries the same labels under its own indices.
  auto g_index = [&](NodeIndex model_idx) { return g.index_of(m.labels[model_idx]); };

  Rng rng = make_rng(seed, "linkpred-neg");
  std::vector<std::pair<NodeIndex, NodeIndex>> negatives;
  size_t attempts = 0, cap = 1000 * positives.size() + 1000;
  while (negatives.size() < positives.size()) {
    if (++attempts > cap)
      throw DataError("could not sample enough non-interacting negative pairs");
    NodeIndex a = pool[uniform_index(rng, pool.size())];
    NodeIndex b = pool[uniform_index(rng, pool.size())];
    if (a == b) continue;
    std::pair<NodeIndex, NodeIndex> key = std::minmax(a, b);
    if (known.count(key)) continue;
    NodeIndex ga = g_index(a), gb = g_index(b);
    if (detail::share_neighbor(g, ga, gb)) continue;
    const auto& nbrs = g.neighbors(ga);
    if (std::binary_search(nbrs.begin(), nbrs.end(), gb)) continue;
    known.insert(key);
    negatives.push_back(key);
  }

  std::vector<Vec> features;
  std::vector<int> labels;
  for (auto [a, b] : positives) {
    features.push_back(link_features(reps.col(a), reps.col(b)));
    labels.push_back(1);
  }
  for (auto [a, b] : negatives) {
    features.push_back(link_features(reps.col(a), reps.col(b)));
    labels.push_back(0);
  }

  std::vector<size_t> order(features.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng = make_rng(seed, "linkpred-split");
  shuffle(order, split_rng);
  size_t test_count = std::max<size_t>(1, order.size() * 3 / 10);
  size_t train_count = order.size() - test_count;

  std::vector<Vec> train_x, test_x;
  std::vector<int> train_y, test_y;
  for (size_t i = 0; i < order.size(); ++i) {
    if (i < train_count) {
      train_x.push_back(features[order[i]]);
      train_y.push_back(labels[order[i]]);
    } else {
      test_x.push_back(features[order[i]]);
      test_y.push_back(labels[order[i]]);
    }
  }

  LogisticModel clf = train_logistic(train_x, train_y, hyper);
  std::vector<int> preds;
  preds.reserve(test_x.size());
  for (const Vec& x : test_x) preds.push_back(clf.classify(x));
  ClassificationReport r = accuracy_f1(preds, test_y);

  LinkPredictionReport report;
  report.accuracy = r.accuracy;
  report.f1 = r.f1;
  report.train_count = train_count;
  report.test_count = test_count;
  return report;
}

// One ranking query per event pair: the first node queries, the second is
// the positive, and `num_negatives` distinct same-type nodes (excluding
// query and positive) are drawn per query from its own seed stream; pass
// shared_negatives to reuse one stream across queries instead.
inline std::vector<RankingQuery> make_ranking_queries(
    const TrainedModel& m, const std::vector<std::pair<NodeIndex, NodeIndex>>& pairs,
    size_t num_negatives, uint64_t seed, bool shared_negatives = false) {
  if (pairs.empty()) throw DataError("no evaluation pairs");
  std::vector<RankingQuery> queries;
  Rng shared_rng = make_rng(seed, "rank-neg");
  for (size_t qi = 0; qi < pairs.size(); ++qi) {
    auto [query, positive] = pairs[qi];
    TypeId t = m.types[positive];
    std::vector<NodeIndex> pool;
    for (NodeIndex v = 0; v < m.num_nodes(); ++v)
      if (m.types[v] == t && v != query && v != positive) pool.push_back(v);
    if (pool.size() < num_negatives)
      throw DataError("only " + std::to_string(pool.size()) + " candidates for " +
                      std::to_string(num_negatives) + " negatives");
    Rng own_rng = make_rng(seed, "rank-neg", qi);
    Rng& rng = shared_negatives ? shared_rng : own_rng;
    // Partial Fisher-Yates: first num_negatives entries are a uniform draw
    // without replacement.
    for (size_t i = 0; i < num_negatives; ++i) {
      size_t j = i + uniform_index(rng, pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(num_negatives);
    queries.push_back({query, positive, std::move(pool)});
  }
  return queries;
}

// Groups (subject, venue-like) event pairs into subject -> distinct targets.
inline std::vector<std::pair<NodeIndex, std::vector<NodeIndex>>> group_truth(
    const std::vector<std::pair<NodeIndex, NodeIndex>>& pairs) {
  std::map<NodeIndex, std::set<NodeIndex>> grouped;
  for (auto [subject, target] : pairs) grouped[subject].insert(target);
  std::vector<std::pair<NodeIndex, std::vector<NodeIndex>>> out;
  for (auto& [subject, targets] : grouped)
    out.emplace_back(subject, std::vector<NodeIndex>(targets.begin(), targets.end()));
  return out;
}

// ---------- exports ----------

// Two files for an embedding-projector import: the vectors as bare
// tab-separated floats, and row-aligned metadata (label, type, category).
inline void export_projector_tsv(const Mat& reps, const std::vector<std::string>& labels,
                                 const std::vector<std::string>& types,
                                 const std::vector<std::string>& categories,
                                 const std::string& vectors_path, const std::string& meta_path) {
  size_t n = labels.size();
  if (static_cast<size_t>(reps.cols()) != n || types.size() != n || categories.size() != n)
    throw DataError("projector export column mismatch");
  std::ofstream vec(vectors_path);
  if (!vec) throw DataError("cannot open " + vectors_path);
  vec.precision(17);
  for (size_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < reps.rows(); ++j)
      vec << (j ? "\t" : "") << reps(j, static_cast<Eigen::Index>(i));
    vec << "\n";
  }
  std::ofstream meta(meta_path);
  if (!meta) throw DataError("cannot open " + meta_path);
  meta << "label\ttype\tcategory\n";
  for (size_t i = 0; i < n; ++i)
    meta << labels[i] << "\t" << types[i] << "\t" << categories[i] << "\n";
}

struct MetricRow {
  std::string task;
  std::string parameter;  // k or threshold, as text
  double value = 0.0;
  size_t queries = 0;
  uint64_t seed = 0;
};

// Metric report CSV: task, k/threshold, value, #queries, seed.
inline void write_metric_report(const std::vector<MetricRow>& rows, std::ostream& out) {
  out << "task,parameter,value,queries,seed\n";
  out.precision(17);
  for (const auto& r : rows)
    out << r.task << "," << r.parameter << "," << r.value << "," << r.queries << "," << r.seed
        << "\n";
}

}  // namespace hetembed
