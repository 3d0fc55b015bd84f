#pragma once
// Walk generation over the typed graph: plain random walks, meta-path-guided
// walks (scheme recursed until the length budget), windowed context pairs,
// the 3/4-power negative-sampling table, and training triplets.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "hetembed/common.hpp"
#include "hetembed/graph.hpp"
#include "hetembed/rng.hpp"

namespace hetembed {

// Node-type sequence with first type == last type, so position i of an
// arbitrarily long walk has type types[i mod (len-1)].
struct MetaPathScheme {
  std::vector<TypeId> types;
  std::string name;  // as written in config, e.g. "APA"

  TypeId type_at(size_t i) const { return types[i % (types.size() - 1)]; }

  void validate(const GraphSchema& schema) const {
    if (types.size() < 2) throw DataError("meta-path scheme too short: " + name);
    if (types.front() != types.back())
      throw DataError("meta-path scheme must start and end with the same type: " + name);
    for (size_t i = 0; i + 1 < types.size(); ++i) {
      if (!schema.types_connectable(types[i], types[i + 1]))
        throw DataError("meta-path scheme step " + std::to_string(i) + " of '" + name +
                        "' connects types with no relation");
    }
  }
};

// Parses "APA" (one letter per type, matched against the unique node type
// starting with that letter) or "author-paper-author" (full names).
inline MetaPathScheme parse_scheme(const GraphSchema& schema, const std::string& s) {
  MetaPathScheme scheme;
  scheme.name = s;
  if (s.find('-') != std::string::npos) {
    size_t start = 0;
    while (start <= s.size()) {
      size_t pos = s.find('-', start);
      std::string part = s.substr(start, pos == std::string::npos ? pos : pos - start);
      scheme.types.push_back(schema.node_type_id(part));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    return scheme;
  }
  for (char c : s) {
    TypeId match = 0;
    int hits = 0;
    for (TypeId t = 0; t < schema.num_node_types(); ++t) {
      const std::string& name = schema.node_type_name(t);
      if (!name.empty() &&
          std::tolower(static_cast<unsigned char>(name[0])) ==
              std::tolower(static_cast<unsigned char>(c))) {
        match = t;
        ++hits;
      }
    }
    if (hits == 0) throw DataError("scheme letter '" + std::string(1, c) + "' matches no node type");
    if (hits > 1) throw DataError("scheme letter '" + std::string(1, c) + "' is ambiguous");
    scheme.types.push_back(match);
  }
  return scheme;
}

enum class WalkMode { kRandom, kMetaPath };

struct WalkConfig {
  size_t walks_per_node = 10;  // N
  size_t walk_length = 30;     // L
  size_t window = 7;           // tau
  WalkMode mode = WalkMode::kMetaPath;
  std::vector<MetaPathScheme> schemes;
  uint64_t seed = 1;
  size_t workers = 1;

  void validate() const {
    if (walks_per_node < 1) throw DataError("walks_per_node must be >= 1");
    if (walk_length < 2) throw DataError("walk_length must be >= 2");
    if (window < 1 || window >= walk_length)
      throw DataError("window must satisfy 1 <= window < walk_length");
    if (mode == WalkMode::kMetaPath && schemes.empty())
      throw DataError("metapath mode requires at least one scheme");
  }
};

using Walk = std::vector<NodeIndex>;

struct WalkCorpus {
  std::vector<Walk> walks;
};

// Uniform step over all neighbors regardless of type; dead ends truncate.
inline Walk random_walk(const HetGraph& g, NodeIndex start, size_t length, Rng& rng) {
  Walk walk{start};
  while (walk.size() < length) {
    const auto& nbrs = g.neighbors(walk.back());
    if (nbrs.empty()) break;
    walk.push_back(nbrs[uniform_index(rng, nbrs.size())]);
  }
  return walk;
}

// Uniform step over neighbors of the type the recursed scheme demands next;
// truncates when no neighbor of that type exists.
inline Walk metapath_walk(const HetGraph& g, NodeIndex start, const MetaPathScheme& scheme,
                          size_t length, Rng& rng) {
  if (g.type_of(start) != scheme.types.front())
    throw DataError("walk start '" + g.label(start) + "' does not match scheme '" + scheme.name +
                    "' first type");
  Walk walk{start};
  while (walk.size() < length) {
    TypeId want = scheme.type_at(walk.size());
    const auto& nbrs = g.neighbors_of_type(walk.back(), want);
    if (nbrs.empty()) break;
    walk.push_back(nbrs[uniform_index(rng, nbrs.size())]);
  }
  return walk;
}

// N walks per eligible start node. Eligible = every node in random mode, or
// nodes whose type opens at least one scheme in metapath mode; such a node
// round-robins over its matching schemes (walk i uses matching[i mod k]).
// Each walk draws from its own seed stream, so worker count never changes
// the corpus.
inline WalkCorpus generate_corpus(const HetGraph& g, const WalkConfig& cfg) {
  cfg.validate();
  for (const auto& s : cfg.schemes) s.validate(g.schema());

  std::vector<NodeIndex> starts;
  std::vector<std::vector<size_t>> matching;  // scheme indices per start
  for (NodeIndex v = 0; v < g.num_nodes(); ++v) {
    if (cfg.mode == WalkMode::kRandom) {
      starts.push_back(v);
      continue;
    }
    std::vector<size_t> m;
    for (size_t s = 0; s < cfg.schemes.size(); ++s)
      if (cfg.schemes[s].types.front() == g.type_of(v)) m.push_back(s);
    if (!m.empty()) {
      starts.push_back(v);
      matching.push_back(std::move(m));
    }
  }
  if (starts.empty()) throw DataError("no eligible start nodes");

  WalkCorpus corpus;
  corpus.walks.resize(starts.size() * cfg.walks_per_node);
  auto run = [&](size_t begin, size_t end) {
    for (size_t si = begin; si < end; ++si) {
      NodeIndex start = starts[si];
      for (size_t i = 0; i < cfg.walks_per_node; ++i) {
        Rng rng = make_rng(cfg.seed, "walk", start, i);
        Walk& slot = corpus.walks[si * cfg.walks_per_node + i];
        if (cfg.mode == WalkMode::kRandom) {
          slot = random_walk(g, start, cfg.walk_length, rng);
        } else {
          const auto& m = matching[si];
          slot = metapath_walk(g, start, cfg.schemes[m[i % m.size()]], cfg.walk_length, rng);
        }
      }
    }
  };
  size_t workers = std::max<size_t>(1, cfg.workers);
  if (workers == 1 || starts.size() < 2 * workers) {
    run(0, starts.size());
  } else {
    std::vector<std::thread> pool;
    size_t chunk = (starts.size() + workers - 1) / workers;
    for (size_t w = 0; w < workers; ++w) {
      size_t begin = w * chunk;
      size_t end = std::min(starts.size(), begin + chunk);
      if (begin < end) pool.emplace_back(run, begin, end);
    }
    for (auto& t : pool) t.join();
  }
  return corpus;
}

// Emits (walk[i], walk[j]) for every i and every j != i with |j - i| <= window.
inline void for_each_context_pair(
    const WalkCorpus& corpus, size_t window,
    const std::function<void(NodeIndex, NodeIndex)>& fn) {
  for (const Walk& walk : corpus.walks) {
    for (size_t i = 0; i < walk.size(); ++i) {
      size_t lo = i > window ? i - window : 0;
      size_t hi = std::min(walk.size() - 1, i + window);
      for (size_t j = lo; j <= hi; ++j)
        if (j != i) fn(walk[i], walk[j]);
    }
  }
}

inline std::vector<std::pair<NodeIndex, NodeIndex>> extract_context_pairs(const WalkCorpus& corpus,
                                                                          size_t window) {
  std::vector<std::pair<NodeIndex, NodeIndex>> pairs;
  for_each_context_pair(corpus, window, [&](NodeIndex v, NodeIndex c) { pairs.emplace_back(v, c); });
  return pairs;
}

// Occurrence count of every node over all walk positions.
inline std::vector<uint64_t> corpus_frequencies(const WalkCorpus& corpus, size_t num_nodes) {
  std::vector<uint64_t> freq(num_nodes, 0);
  for (const Walk& walk : corpus.walks)
    for (NodeIndex v : walk) ++freq[v];
  return freq;
}

enum class NoiseSupport {
  kCorpusVisited,  // weight = freq^0.75 over nodes seen in the corpus (default)
  kAllNodes,       // weight = (freq+1)^0.75 over every node of the type
};

// Per-type unigram^{3/4} sampler. Sampling walks a cumulative-weight table
// with a binary search, so draws are reproducible across platforms.
class NoiseTable {
 public:
  NoiseTable() = default;

  NoiseTable(const std::vector<uint64_t>& freq, const std::vector<TypeId>& types,
             size_t num_types, NoiseSupport support = NoiseSupport::kCorpusVisited) {
    if (freq.size() != types.size()) throw DataError("noise table shape mismatch");
    uint64_t total = 0;
    for (uint64_t f : freq) total += f;
    if (total == 0) throw DataError("empty corpus");
    entries_.resize(num_types);
    cum_.resize(num_types);
    for (NodeIndex v = 0; v < freq.size(); ++v) {
      double w = 0.0;
      if (support == NoiseSupport::kCorpusVisited) {
        if (freq[v] == 0) continue;
        w = std::pow(static_cast<double>(freq[v]), 0.75);
      } else {
        w = std::pow(static_cast<double>(freq[v] + 1), 0.75);
      }
      TypeId t = types[v];
      entries_.at(t).push_back(v);
      cum_.at(t).push_back((cum_[t].empty() ? 0.0 : cum_[t].back()) + w);
    }
  }

  NoiseTable(const std::vector<uint64_t>& freq, const HetGraph& g,
             NoiseSupport support = NoiseSupport::kCorpusVisited)
      : NoiseTable(freq, node_types_of(g), g.schema().num_node_types(), support) {}

  bool covers(TypeId t) const { return t < entries_.size() && !entries_[t].empty(); }

  NodeIndex sample(TypeId t, Rng& rng) const {
    if (!covers(t)) throw DataError("type absent from noise table");
    const auto& cum = cum_[t];
    double u = uniform_unit(rng) * cum.back();
    size_t idx = std::upper_bound(cum.begin(), cum.end(), u) - cum.begin();
    if (idx >= cum.size()) idx = cum.size() - 1;
    return entries_[t][idx];
  }

  // Analytic probability of drawing v among type-t nodes (for tests).
  double probability(TypeId t, NodeIndex v) const {
    if (!covers(t)) throw DataError("type absent from noise table");
    const auto& nodes = entries_[t];
    const auto& cum = cum_[t];
    for (size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i] == v) return (cum[i] - (i ? cum[i - 1] : 0.0)) / cum.back();
    return 0.0;
  }

  const std::vector<NodeIndex>& nodes_of_type(TypeId t) const { return entries_.at(t); }

 private:
  static std::vector<TypeId> node_types_of(const HetGraph& g) {
    std::vector<TypeId> types(g.num_nodes());
    for (NodeIndex v = 0; v < g.num_nodes(); ++v) types[v] = g.type_of(v);
    return types;
  }

  std::vector<std::vector<NodeIndex>> entries_;  // [type] -> nodes
  std::vector<std::vector<double>> cum_;         // [type] -> cumulative weights
};

struct ContextTriplet {
  NodeIndex center;    // v
  NodeIndex context;   // v_c
  NodeIndex negative;  // v_c', same type as v_c
};

struct TripletSet {
  std::vector<ContextTriplet> triplets;
  size_t negative_collisions = 0;  // draws where v_c' == v_c survived resampling
};

// One (or M) negatives per context pair, drawn from the context-type noise
// distribution; a negative equal to the context is rejected up to 10 times,
// then kept and counted.
inline TripletSet sample_triplets(const WalkCorpus& corpus, size_t window, const NoiseTable& noise,
                                  const HetGraph& g, Rng& rng, size_t negatives_per_pair = 1) {
  TripletSet out;
  for_each_context_pair(corpus, window, [&](NodeIndex v, NodeIndex vc) {
    TypeId t = g.type_of(vc);
    for (size_t m = 0; m < negatives_per_pair; ++m) {
      NodeIndex neg = noise.sample(t, rng);
      for (int attempt = 0; neg == vc && attempt < 10; ++attempt) neg = noise.sample(t, rng);
      if (neg == vc) ++out.negative_collisions;
      out.triplets.push_back({v, vc, neg});
    }
  });
  return out;
}

// One walk per line, space-separated node labels.
inline void save_corpus(const WalkCorpus& corpus, const HetGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path);
  for (const Walk& walk : corpus.walks) {
    for (size_t i = 0; i < walk.size(); ++i) out << (i ? " " : "") << g.label(walk[i]);
    out << "\n";
  }
}

}  // namespace hetembed
