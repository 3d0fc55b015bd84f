#pragma once
// Synthetic bibliographic fixture generator: a seeded author/paper/venue
// graph with planted communities, paper text drawn from per-community
// vocabularies, block-structured word vectors carrying the community signal,
// held-out "future paper" event files for the evaluation protocols, and a
// small delta (new author + paper) for the online stage.
//
// Every affiliation decision (co-author, venue, citation) stays inside the
// home community except with probability cross_prob; the Bernoulli trials
// are counted so tests can check the realized rate against expectation.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hetembed/common.hpp"
#include "hetembed/graph.hpp"
#include "hetembed/rng.hpp"

namespace hetembed {

struct SynthConfig {
  size_t communities = 2;
  size_t authors_per = 60;
  size_t papers_per = 80;
  size_t venues_per = 3;
  double cross_prob = 0.05;        // chance an affiliation leaves its community
  size_t vocab_per_community = 50;
  size_t tokens_per_paper = 10;
  Eigen::Index word_dim = 16;
  size_t future_papers_per = 30;   // unpublished papers that only drive event files
  size_t delta_authors = 1;        // new author+paper pairs emitted as the delta
  uint64_t seed = 1;

  void validate() const {
    if (cross_prob < 0.0 || cross_prob > 1.0)
      throw DataError("cross_prob must be in [0, 1]");
    if (communities < 1) throw DataError("need at least one community");
    if (authors_per < 3 || papers_per < 3 || venues_per < 1)
      throw DataError("need >= 3 authors, >= 3 papers, >= 1 venue per community");
    if (vocab_per_community < 1 || tokens_per_paper < 1)
      throw DataError("need a non-empty vocabulary and token budget");
    if (word_dim < static_cast<Eigen::Index>(communities))
      throw DataError("word_dim must be >= #communities for the block signal");
  }
};

struct SynthStats {
  size_t cross_trials = 0;
  size_t cross_hits = 0;
};

struct SynthData {
  std::vector<std::pair<std::string, std::string>> nodes;    // label, type
  std::vector<std::array<std::string, 3>> edges;             // src, rel, dst
  std::vector<std::pair<std::string, std::string>> content;  // label, text
  std::vector<std::string> vocab;
  Mat word_vectors;  // word_dim x |vocab|
  std::vector<std::pair<std::string, std::string>> collaboration_events;  // link prediction
  std::vector<std::pair<std::string, std::string>> cocitation_events;     // retrieval
  std::vector<std::pair<std::string, std::string>> venue_events;          // recommendation
  std::vector<std::pair<std::string, std::string>> delta_nodes;
  std::vector<std::array<std::string, 3>> delta_edges;
  std::vector<std::pair<std::string, std::string>> delta_content;
  SynthStats stats;
};

inline GraphSchema synth_schema() {
  GraphSchema s;
  s.add_node_type("author");
  s.add_node_type("paper");
  s.add_node_type("venue");
  s.add_relation("write", "author", "paper");
  s.add_relation("publish", "paper", "venue");
  s.add_relation("cite", "paper", "paper");
  return s;
}

namespace detail {

// Radius of the index neighborhoods used for wiring. Co-authors, citations,
// and held-out collaborations connect entities whose indices lie within this
// span, so each community has fine structure (who interacts with whom) on
// top of the block signal, and the held-out events are proximity ties a
// trained embedding can actually rank above random pairs.
constexpr size_t kLocalSpan = 5;

struct SynthLabels {
  static std::string author(size_t c, size_t i) {
    return "c" + std::to_string(c) + "a" + std::to_string(i);
  }
  static std::string paper(size_t c, size_t i) {
    return "c" + std::to_string(c) + "p" + std::to_string(i);
  }
  static std::string venue(size_t c, size_t i) {
    return "c" + std::to_string(c) + "v" + std::to_string(i);
  }
  static std::string token(size_t c, size_t i) {
    return "c" + std::to_string(c) + "w" + std::to_string(i);
  }
};

}  // namespace detail

inline SynthData synthesize(const SynthConfig& cfg) {
  cfg.validate();
  using L = detail::SynthLabels;
  SynthData data;
  Rng rng = make_rng(cfg.seed, "synth");

  // One Bernoulli(cross_prob) trial per affiliation; on success the
  // affiliation moves to a uniformly chosen other community.
  auto pick_community = [&](size_t home) {
    ++data.stats.cross_trials;
    bool cross = uniform_unit(rng) < cfg.cross_prob;
    if (!cross || cfg.communities < 2) return home;
    ++data.stats.cross_hits;
    size_t other = uniform_index(rng, cfg.communities - 1);
    return other >= home ? other + 1 : other;
  };

  for (size_t c = 0; c < cfg.communities; ++c) {
    for (size_t i = 0; i < cfg.authors_per; ++i) data.nodes.emplace_back(L::author(c, i), "author");
    for (size_t i = 0; i < cfg.papers_per; ++i) data.nodes.emplace_back(L::paper(c, i), "paper");
    for (size_t i = 0; i < cfg.venues_per; ++i) data.nodes.emplace_back(L::venue(c, i), "venue");
  }

  // Bookkeeping for event construction later.
  std::unordered_map<std::string, std::set<std::string>> papers_of_author;
  std::unordered_map<std::string, std::set<std::string>> venues_of_author;
  std::unordered_map<std::string, std::string> venue_of_paper;

  auto add_write = [&](const std::string& author, const std::string& paper) {
    data.edges.push_back({author, "write", paper});
    papers_of_author[author].insert(paper);
  };

  for (size_t c = 0; c < cfg.communities; ++c) {
    for (size_t i = 0; i < cfg.papers_per; ++i) {
      std::string paper = L::paper(c, i);

      // Authors: the deterministic first author guarantees every author
      // writes something; co-authors sit in the first author's index
      // neighborhood and may cross communities.
      size_t first = i % cfg.authors_per;
      std::set<std::string> authors{L::author(c, first)};
      size_t n_auth = 2 + (i % 2);
      for (size_t j = 1; j < n_auth; ++j) {
        for (int attempt = 0; attempt < 10; ++attempt) {
          size_t ac = pick_community(c);
          size_t off = 1 + uniform_index(rng, detail::kLocalSpan);
          std::string a = L::author(ac, (first + off) % cfg.authors_per);
          if (authors.insert(a).second) break;
        }
      }
      for (const std::string& a : authors) add_write(a, paper);

      // Venue: contiguous blocks of paper indices map to the same venue, so
      // venue membership is a coarse position signal rather than noise.
      std::string venue =
          L::venue(pick_community(c), i * cfg.venues_per / cfg.papers_per);
      data.edges.push_back({paper, "publish", venue});
      venue_of_paper[paper] = venue;
      for (const std::string& a : authors) venues_of_author[a].insert(venue);

      // Citations point at nearby paper indices.
      std::set<std::string> cited;
      for (size_t j = 0; j < 2; ++j) {
        for (int attempt = 0; attempt < 10; ++attempt) {
          size_t cc = pick_community(c);
          size_t off = 1 + uniform_index(rng, detail::kLocalSpan);
          size_t pi = (i + off) % cfg.papers_per;
          if (cc == c && pi == i) continue;
          std::string target = L::paper(cc, pi);
          if (cited.insert(target).second) {
            data.edges.push_back({paper, "cite", target});
            break;
          }
        }
      }

      // Text: a sliding window over the home vocabulary, so papers with
      // nearby indices share words while distant ones do not.
      std::string text;
      size_t wbase = i * cfg.vocab_per_community / cfg.papers_per;
      for (size_t t = 0; t < cfg.tokens_per_paper; ++t) {
        if (t) text += ' ';
        size_t wi = (wbase + uniform_index(rng, detail::kLocalSpan)) % cfg.vocab_per_community;
        text += L::token(c, wi);
      }
      data.content.emplace_back(paper, text);
    }
  }

  // Word vectors: community-c tokens light up block c of the dimensions,
  // plus uniform noise everywhere, so text alone separates the communities.
  size_t vocab_total = cfg.communities * cfg.vocab_per_community;
  data.word_vectors.resize(cfg.word_dim, static_cast<Eigen::Index>(vocab_total));
  Eigen::Index block = cfg.word_dim / static_cast<Eigen::Index>(cfg.communities);
  for (size_t c = 0; c < cfg.communities; ++c) {
    for (size_t i = 0; i < cfg.vocab_per_community; ++i) {
      data.vocab.push_back(L::token(c, i));
      Eigen::Index col = static_cast<Eigen::Index>(data.vocab.size() - 1);
      for (Eigen::Index d = 0; d < cfg.word_dim; ++d) {
        bool in_block = d >= static_cast<Eigen::Index>(c) * block &&
                        d < static_cast<Eigen::Index>(c + 1) * block;
        data.word_vectors(d, col) = (in_block ? 1.0 : 0.0) + uniform_range(rng, -0.1, 0.1);
      }
    }
  }

  // Future papers exist only as event sources: their collaborations,
  // co-citations, and author-venue appearances form the held-out test sets.
  std::set<std::pair<std::string, std::string>> collab_seen, cocite_seen, venue_seen;
  auto collaborated = [&](const std::string& a, const std::string& b) {
    const auto& pa = papers_of_author[a];
    const auto& pb = papers_of_author[b];
    for (const auto& p : pa)
      if (pb.count(p)) return true;
    return false;
  };

  for (size_t c = 0; c < cfg.communities; ++c) {
    for (size_t f = 0; f < cfg.future_papers_per; ++f) {
      // The whole future paper sits in one (possibly crossed) community and
      // its authors come from one index neighborhood, mirroring how the
      // training papers were wired.
      size_t fc = pick_community(c);
      size_t seat = uniform_index(rng, cfg.authors_per);
      std::set<std::string> authors{L::author(fc, seat)};
      size_t n_auth = 2 + (f % 2);
      for (size_t j = 1; j < n_auth; ++j) {
        for (int attempt = 0; attempt < 10; ++attempt) {
          size_t off = 1 + uniform_index(rng, detail::kLocalSpan);
          std::string a = L::author(fc, (seat + off) % cfg.authors_per);
          if (authors.insert(a).second) break;
        }
      }
      // The venue gets its own community trial: a crossed draw lands the
      // paper at a venue its authors have plausibly never published at.
      std::string venue = L::venue(pick_community(c), uniform_index(rng, cfg.venues_per));
      std::set<std::string> cited;
      size_t cbase = uniform_index(rng, cfg.papers_per);
      cited.insert(L::paper(fc, cbase));
      for (int attempt = 0; attempt < 10 && cited.size() < 2; ++attempt) {
        size_t off = 1 + uniform_index(rng, detail::kLocalSpan);
        cited.insert(L::paper(fc, (cbase + off) % cfg.papers_per));
      }
      if (cited.size() < 2) cited.insert(L::paper(fc, (cbase + 1) % cfg.papers_per));

      std::vector<std::string> alist(authors.begin(), authors.end());
      for (size_t x = 0; x < alist.size(); ++x) {
        for (size_t y = x + 1; y < alist.size(); ++y) {
          if (collaborated(alist[x], alist[y])) continue;
          auto key = std::minmax(alist[x], alist[y]);
          if (collab_seen.insert(key).second) data.collaboration_events.push_back(key);
        }
      }
      std::vector<std::string> clist(cited.begin(), cited.end());
      auto ckey = std::minmax(clist[0], clist[1]);
      if (cocite_seen.insert(ckey).second) data.cocitation_events.push_back(ckey);
      for (const std::string& a : alist) {
        if (venues_of_author[a].count(venue)) continue;
        auto vkey = std::make_pair(a, venue);
        if (venue_seen.insert(vkey).second) data.venue_events.push_back(vkey);
      }
    }
  }

  // Delta: a brand-new author writing a brand-new paper (with text) at an
  // existing venue, with two existing co-authors and two citations -- the
  // arrival pattern the online stage supports.
  for (size_t k = 0; k < cfg.delta_authors; ++k) {
    size_t c = k % cfg.communities;
    std::string author = "na" + std::to_string(k);
    std::string paper = "np" + std::to_string(k);
    data.delta_nodes.emplace_back(author, "author");
    data.delta_nodes.emplace_back(paper, "paper");
    data.delta_edges.push_back({author, "write", paper});
    std::set<std::string> coauthors;
    while (coauthors.size() < 2)
      coauthors.insert(L::author(c, uniform_index(rng, cfg.authors_per)));
    for (const auto& a : coauthors) data.delta_edges.push_back({a, "write", paper});
    data.delta_edges.push_back(
        {paper, "publish", L::venue(c, uniform_index(rng, cfg.venues_per))});
    std::set<std::string> cited;
    while (cited.size() < 2) cited.insert(L::paper(c, uniform_index(rng, cfg.papers_per)));
    for (const auto& p : cited) data.delta_edges.push_back({paper, "cite", p});
    std::string text;
    for (size_t t = 0; t < cfg.tokens_per_paper; ++t) {
      if (t) text += ' ';
      text += L::token(c, uniform_index(rng, cfg.vocab_per_community));
    }
    data.delta_content.emplace_back(paper, text);
  }

  return data;
}

// Community index encoded in a synthetic label ("c<k>..."), for tests.
inline size_t synth_community_of(const std::string& label) {
  if (label.size() < 2 || label[0] != 'c') throw DataError("not a community label: " + label);
  size_t i = 1, value = 0;
  bool any = false;
  while (i < label.size() && label[i] >= '0' && label[i] <= '9') {
    value = value * 10 + static_cast<size_t>(label[i] - '0');
    ++i;
    any = true;
  }
  if (!any) throw DataError("not a community label: " + label);
  return value;
}

namespace detail {

inline void write_pairs(const std::string& path,
                        const std::vector<std::pair<std::string, std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path);
  for (const auto& [a, b] : rows) out << a << "\t" << b << "\n";
}

inline void write_triples(const std::string& path,
                          const std::vector<std::array<std::string, 3>>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path);
  for (const auto& r : rows) out << r[0] << "\t" << r[1] << "\t" << r[2] << "\n";
}

}  // namespace detail

// Writes the fixture under dir with fixed file names:
//   schema.tsv nodes.tsv edges.tsv content.tsv word_vectors.tsv
//   linkpred_test.tsv retrieval_test.tsv recommend_test.tsv
//   delta_nodes.tsv delta_edges.tsv delta_content.tsv
inline void write_synth(const SynthData& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto at = [&](const char* name) { return (std::filesystem::path(dir) / name).string(); };
  save_schema(synth_schema(), at("schema.tsv"));
  detail::write_pairs(at("nodes.tsv"), data.nodes);
  detail::write_triples(at("edges.tsv"), data.edges);
  detail::write_pairs(at("content.tsv"), data.content);
  detail::write_pairs(at("linkpred_test.tsv"), data.collaboration_events);
  detail::write_pairs(at("retrieval_test.tsv"), data.cocitation_events);
  detail::write_pairs(at("recommend_test.tsv"), data.venue_events);
  detail::write_pairs(at("delta_nodes.tsv"), data.delta_nodes);
  detail::write_triples(at("delta_edges.tsv"), data.delta_edges);
  detail::write_pairs(at("delta_content.tsv"), data.delta_content);

  std::ofstream wv(at("word_vectors.tsv"));
  if (!wv) throw DataError("cannot open " + at("word_vectors.tsv"));
  wv.precision(17);
  wv << data.vocab.size() << " " << data.word_vectors.rows() << "\n";
  for (size_t i = 0; i < data.vocab.size(); ++i) {
    wv << data.vocab[i];
    for (Eigen::Index d = 0; d < data.word_vectors.rows(); ++d)
      wv << " " << data.word_vectors(d, static_cast<Eigen::Index>(i));
    wv << "\n";
  }
}

}  // namespace hetembed
