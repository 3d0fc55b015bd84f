#pragma once
// Representations for nodes that arrive after training, with all trained
// parameters frozen. A new content node goes straight through the trained
// encoder. A new content-less node gets a free vector fitted by SGD against
// contexts collected from short meta-path walks rooted at the node, scored
// against the frozen representations Θ* of the existing graph.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hetembed/common.hpp"
#include "hetembed/graph.hpp"
#include "hetembed/model.hpp"
#include "hetembed/rng.hpp"
#include "hetembed/text_encoder.hpp"
#include "hetembed/trainer.hpp"
#include "hetembed/walker.hpp"

namespace hetembed {

struct OnlineConfig {
  size_t num_walks = 100;   // rooted walks per content-less node
  double lr = 0.025;        // SGD step, decays linearly across sweeps
  double tolerance = 1e-4;  // relative change of the fitted vector between sweeps
  size_t max_sweeps = 50;   // 0 returns the initialization unchanged
  std::string scheme;       // meta-path for rooted walks, e.g. "APVPA"
  uint64_t seed = 1;
  size_t max_tokens = 100;  // t_max for new content

  void validate() const {
    if (num_walks < 1) throw DataError("num_walks must be >= 1");
    if (lr <= 0.0) throw DataError("lr must be > 0");
  }
};

struct OnlineNodeResult {
  std::string label;
  Vec rep;
  bool content = false;      // resolved by encoder inference
  bool empty_text = false;   // content tokenized to nothing; rep is zero
  size_t sweeps = 0;
  size_t dropped_contexts = 0;          // walk contexts with no frozen representation
  std::vector<NodeIndex> contexts;      // multiset over all rooted walks, sampling order
  std::vector<double> objective_trace;  // fitted objective after each sweep (maximized)
};

// One meta-path walk of `steps` steps away from the root; every visited node
// is a context of the root. To spread the few steps over distinct contexts,
// each step prefers nodes the walk has not visited (falling back to visited
// ones), and never returns to the root, which cannot be its own context.
// A step with no admissible neighbor at all is an error naming the blockage.
inline std::vector<NodeIndex> rooted_context_walk(const HetGraph& g, NodeIndex root,
                                                  const MetaPathScheme& scheme, size_t steps,
                                                  Rng& rng) {
  if (g.type_of(root) != scheme.types.front())
    throw DataError("scheme '" + scheme.name + "' does not start with the type of '" +
                    g.label(root) + "'");
  std::vector<NodeIndex> contexts;
  std::unordered_set<NodeIndex> visited{root};
  NodeIndex cur = root;
  std::vector<NodeIndex> pool;
  for (size_t k = 1; k <= steps; ++k) {
    TypeId want = scheme.type_at(k);
    const auto& nbrs = g.neighbors_of_type(cur, want);
    pool.clear();
    for (NodeIndex u : nbrs)
      if (u != root && !visited.count(u)) pool.push_back(u);
    if (pool.empty())
      for (NodeIndex u : nbrs)
        if (u != root) pool.push_back(u);
    if (pool.empty())
      throw DataError("rooted walk blocked at step " + std::to_string(k) + ": no " +
                      g.schema().node_type_name(want) + " neighbor of '" + g.label(cur) + "'");
    cur = pool[uniform_index(rng, pool.size())];
    visited.insert(cur);
    contexts.push_back(cur);
  }
  return contexts;
}

// Holds a trained model plus the grown graph and resolves representations
// for both trained nodes (by label) and nodes processed this session. The
// model itself is never written to.
class OnlineSession {
 public:
  OnlineSession(const TrainedModel& model, const HetGraph& g, const WordTable* words)
      : model_(model), graph_(g), words_(words), noise_(model.make_noise_table()) {
    model_of_.assign(g.num_nodes(), -1);
    for (NodeIndex v = 0; v < g.num_nodes(); ++v) {
      const std::string& label = g.label(v);
      if (!model_.has_node(label)) continue;
      NodeIndex mv = model_.node(label);
      if (model_.schema.node_type_name(model_.types[mv]) !=
          g.schema().node_type_name(g.type_of(v)))
        throw DataError("node '" + label + "' changed type since training");
      model_of_[v] = mv;
    }
  }

  const TrainedModel& model() const { return model_; }

  bool is_new(NodeIndex v) const { return model_of_[v] < 0; }
  bool resolvable(NodeIndex v) const { return model_of_[v] >= 0 || session_.count(v) > 0; }

  // Frozen representation: trained nodes resolve through the model, nodes
  // processed earlier this session through the session table.
  Vec rep(NodeIndex v) const {
    if (model_of_[v] >= 0) return model_.resolve(static_cast<NodeIndex>(model_of_[v]));
    auto it = session_.find(v);
    if (it == session_.end()) throw DataError("no representation yet for '" + graph_.label(v) + "'");
    return it->second;
  }

  // New content node: one deterministic encoder pass, no parameters change.
  OnlineNodeResult infer_content_node(NodeIndex v, size_t max_tokens = 100) {
    OnlineNodeResult res;
    res.label = graph_.label(v);
    res.content = true;
    if (words_ == nullptr) throw DataError("content inference requires word vectors");
    EncodeResult enc = model_.infer_text(*words_, graph_.content(v), max_tokens);
    res.rep = enc.embedding;
    res.empty_text = enc.empty_input;
    if (res.empty_text && log_level() >= 1)
      std::cerr << "[hetembed] warning: content of '" << res.label
                << "' tokenizes to nothing; zero vector\n";
    session_[v] = res.rep;
    return res;
  }

  // New content-less node: collect contexts from rooted walks, pair each
  // with a negative from the trained noise table, then fit one vector by
  // SGD while every other representation stays frozen.
  OnlineNodeResult update_new_node(NodeIndex v, const OnlineConfig& cfg) {
    cfg.validate();
    OnlineNodeResult res;
    res.label = graph_.label(v);
    if (graph_.degree(v) == 0) throw DataError("isolated new node: '" + res.label + "'");
    MetaPathScheme scheme = parse_scheme(graph_.schema(), cfg.scheme);
    scheme.validate(graph_.schema());
    size_t steps = model_.window;  // walk length = trained window distance

    for (size_t w = 0; w < cfg.num_walks; ++w) {
      Rng rng = make_rng(cfg.seed, "online-walk", v, w);
      auto walk = rooted_context_walk(graph_, v, scheme, steps, rng);
      res.contexts.insert(res.contexts.end(), walk.begin(), walk.end());
    }

    // Freeze context/negative representations for the whole fit.
    std::vector<Vec> ctx_reps, neg_reps;
    Rng neg_rng = make_rng(cfg.seed, "online-neg", v);
    for (NodeIndex c : res.contexts) {
      if (!resolvable(c)) {
        ++res.dropped_contexts;
        continue;
      }
      TypeId t = graph_.type_of(c);
      if (!noise_.covers(t))
        throw DataError("no trained nodes of type " + graph_.schema().node_type_name(t) +
                        " to sample negatives from");
      NodeIndex neg = noise_.sample(t, neg_rng);
      for (int attempt = 0; attempt < 10 && model_.labels[neg] == graph_.label(c); ++attempt)
        neg = noise_.sample(t, neg_rng);
      ctx_reps.push_back(rep(c));
      neg_reps.push_back(model_.resolve(neg));
    }
    if (res.dropped_contexts > 0 && log_level() >= 1)
      std::cerr << "[hetembed] warning: dropped " << res.dropped_contexts
                << " context(s) of '" << res.label << "' with no representation\n";
    if (ctx_reps.empty()) throw DataError("no resolvable contexts for '" + res.label + "'");

    // Warm start: mean frozen representation of the direct neighbors.
    Vec theta = Vec::Zero(model_.dim);
    size_t used = 0;
    for (NodeIndex u : graph_.neighbors(v)) {
      if (!resolvable(u)) continue;
      theta += rep(u);
      ++used;
    }
    if (used > 0) theta /= static_cast<double>(used);

    auto objective = [&](const Vec& th) {
      double obj = 0.0;
      for (size_t i = 0; i < ctx_reps.size(); ++i)
        obj += log_sigmoid(ctx_reps[i].dot(th)) + log_sigmoid(-neg_reps[i].dot(th));
      return obj;
    };

    for (size_t sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
      double lr = cfg.lr * std::max(1e-4, 1.0 - static_cast<double>(sweep - 1) /
                                               static_cast<double>(cfg.max_sweeps));
      Vec prev = theta;
      for (size_t i = 0; i < ctx_reps.size(); ++i) {
        double a = sigmoid(ctx_reps[i].dot(theta)) - 1.0;
        double b = sigmoid(neg_reps[i].dot(theta));
        theta -= lr * (a * ctx_reps[i] + b * neg_reps[i]);
      }
      if (!theta.allFinite()) throw NumericError("online update diverged for '" + res.label + "'");
      res.objective_trace.push_back(objective(theta));
      res.sweeps = sweep;
      double rel = (theta - prev).norm() / std::max(prev.norm(), 1e-12);
      if (rel < cfg.tolerance) break;
    }

    res.rep = theta;
    session_[v] = res.rep;
    return res;
  }

  // Processes a batch of new nodes: content nodes first (their encoder
  // representations then serve as frozen contexts), then the rest, each
  // group in the given order.
  std::vector<OnlineNodeResult> process(const std::vector<NodeIndex>& new_nodes,
                                        const OnlineConfig& cfg) {
    std::vector<OnlineNodeResult> out;
    for (NodeIndex v : new_nodes)
      if (graph_.has_content(v)) out.push_back(infer_content_node(v, cfg.max_tokens));
    for (NodeIndex v : new_nodes)
      if (!graph_.has_content(v)) out.push_back(update_new_node(v, cfg));
    return out;
  }

 private:
  const TrainedModel& model_;
  const HetGraph& graph_;
  const WordTable* words_;
  NoiseTable noise_;
  std::vector<int64_t> model_of_;
  std::unordered_map<NodeIndex, Vec> session_;
};

}  // namespace hetembed
