#pragma once
// TrainedModel: everything training produces and downstream stages consume.
// Holds the node table and schema, the free embedding rows, the cached
// encoder outputs for content nodes, the GRU weights, and the corpus
// statistics the online stage needs to rebuild the negative sampler.
//
// The binary format is raw little-endian and contains nothing
// run-dependent (no wall-clock), so retraining with the same inputs and
// seed reproduces the file byte for byte.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "hetembed/common.hpp"
#include "hetembed/graph.hpp"
#include "hetembed/text_encoder.hpp"
#include "hetembed/walker.hpp"

namespace hetembed {

enum class Variant : uint32_t {
  kHsg = 0,    // structure only, every node owns a free row
  kHsgSr = 1,  // free rows + encoder regularized toward them
  kSeHsg = 2,  // content nodes are represented by the encoder alone
};

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kHsg: return "hsg";
    case Variant::kHsgSr: return "hsg-sr";
    case Variant::kSeHsg: return "se-hsg";
  }
  throw DataError("unknown variant");
}

inline Variant variant_from_name(const std::string& s) {
  if (s == "hsg") return Variant::kHsg;
  if (s == "hsg-sr") return Variant::kHsgSr;
  if (s == "se-hsg") return Variant::kSeHsg;
  throw DataError("unknown variant: " + s + " (expected hsg|hsg-sr|se-hsg)");
}

namespace io {

inline void write_bytes(std::ostream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
inline void read_bytes(std::istream& in, void* p, size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!in) throw DataError("model file truncated");
}
inline void write_u64(std::ostream& out, uint64_t v) { write_bytes(out, &v, 8); }
inline void write_u32(std::ostream& out, uint32_t v) { write_bytes(out, &v, 4); }
inline void write_f64(std::ostream& out, double v) { write_bytes(out, &v, 8); }
inline uint64_t read_u64(std::istream& in) { uint64_t v; read_bytes(in, &v, 8); return v; }
inline uint32_t read_u32(std::istream& in) { uint32_t v; read_bytes(in, &v, 4); return v; }
inline double read_f64(std::istream& in) { double v; read_bytes(in, &v, 8); return v; }
inline void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  write_bytes(out, s.data(), s.size());
}
inline std::string read_string(std::istream& in) {
  std::string s(read_u64(in), '\0');
  if (!s.empty()) read_bytes(in, s.data(), s.size());
  return s;
}
inline void write_mat(std::ostream& out, const Mat& m) {
  write_u64(out, static_cast<uint64_t>(m.rows()));
  write_u64(out, static_cast<uint64_t>(m.cols()));
  write_bytes(out, m.data(), sizeof(double) * static_cast<size_t>(m.size()));
}
inline Mat read_mat(std::istream& in) {
  uint64_t rows = read_u64(in), cols = read_u64(in);
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  if (m.size() > 0) read_bytes(in, m.data(), sizeof(double) * static_cast<size_t>(m.size()));
  return m;
}

}  // namespace io

// Per-epoch training record. Wall time lives only in the CSV log export,
// never in the model file.
struct EpochStat {
  size_t epoch = 0;
  double loss = 0.0;
  double seconds = 0.0;
};

struct TrainedModel {
  Variant variant = Variant::kHsg;
  Eigen::Index dim = 0;   // d
  Eigen::Index word_dim = 0;  // d_w (0 when no encoder)
  double gamma = 1.0;
  size_t negatives = 1;  // M
  uint64_t seed = 1;

  // Corpus recipe, kept so the online stage can replay the sampler setup.
  size_t window = 7;         // tau
  size_t walks_per_node = 10;
  size_t walk_length = 30;
  WalkMode walk_mode = WalkMode::kMetaPath;
  NoiseSupport noise_support = NoiseSupport::kCorpusVisited;
  std::vector<std::string> scheme_names;
  std::string word_vec_path;  // hint for reloading the frozen word vectors

  GraphSchema schema;
  std::vector<std::string> labels;
  std::vector<TypeId> types;
  std::vector<uint8_t> is_content;
  std::vector<uint64_t> corpus_freq;

  Mat theta;                    // d x (#owned rows), column per owning node
  Mat content_reps;             // d x |V_S|, encoder output per content node
  GruParams phi;
  bool has_phi = false;

  std::vector<double> epoch_losses;

  // ---- derived lookups (rebuilt after load) ----
  std::unordered_map<std::string, NodeIndex> index_of_label;
  std::vector<int64_t> theta_row_of;    // node -> column in theta, -1 if none
  std::vector<int64_t> content_row_of;  // node -> column in content_reps, -1 if none

  size_t num_nodes() const { return labels.size(); }
  size_t num_content_nodes() const { return static_cast<size_t>(content_reps.cols()); }

  bool has_node(const std::string& label) const { return index_of_label.count(label) > 0; }
  NodeIndex node(const std::string& label) const {
    auto it = index_of_label.find(label);
    if (it == index_of_label.end()) throw DataError("node not in model: " + label);
    return it->second;
  }

  // In SE-HSG content nodes own no free row; everywhere else every node does.
  bool owns_theta_row(NodeIndex v) const {
    return !(variant == Variant::kSeHsg && is_content[v]);
  }

  // The evaluation-facing representation: encoder output for content nodes
  // under the encoder variants, the free row otherwise.
  Vec resolve(NodeIndex v) const {
    if (v >= num_nodes()) throw DataError("node index out of range");
    if (variant != Variant::kHsg && is_content[v]) {
      return content_reps.col(static_cast<Eigen::Index>(content_row_of[v]));
    }
    return theta.col(static_cast<Eigen::Index>(theta_row_of[v]));
  }
  Vec resolve(const std::string& label) const { return resolve(node(label)); }

  // Trainable-parameter count: free rows plus GRU weights (word vectors are
  // a frozen input and do not count).
  size_t parameter_count() const {
    size_t n = static_cast<size_t>(theta.size());
    if (has_phi)
      for (const Mat* m : phi.matrices()) n += static_cast<size_t>(m->size());
    return n;
  }

  // FNV-1a over all learned parameters; lets callers assert immutability.
  uint64_t param_hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    h = hash_bytes(theta.data(), sizeof(double) * static_cast<size_t>(theta.size()), h);
    h = hash_bytes(content_reps.data(), sizeof(double) * static_cast<size_t>(content_reps.size()), h);
    if (has_phi)
      for (const Mat* m : phi.matrices())
        h = hash_bytes(m->data(), sizeof(double) * static_cast<size_t>(m->size()), h);
    return h;
  }

  // Negative sampler over the trained corpus, indexed by model node index.
  NoiseTable make_noise_table() const {
    return NoiseTable(corpus_freq, types, schema.num_node_types(), noise_support);
  }

  // Encoder inference on raw text with the trained weights; empty_input set
  // when tokenization yields nothing (the vector is then zero).
  EncodeResult infer_text(const WordTable& words, const std::string& text,
                          size_t max_tokens = 100) const {
    if (!has_phi) throw DataError("model has no text encoder");
    if (words.dim() != word_dim) throw DataError("word vector dimension mismatch");
    return encode_tokens(phi, words, tokenize(text, max_tokens));
  }

  void rebuild_lookups() {
    index_of_label.clear();
    theta_row_of.assign(num_nodes(), -1);
    content_row_of.assign(num_nodes(), -1);
    int64_t trow = 0, crow = 0;
    for (NodeIndex v = 0; v < num_nodes(); ++v) {
      if (!index_of_label.emplace(labels[v], v).second)
        throw DataError("duplicate label in model: " + labels[v]);
      if (owns_theta_row(v)) theta_row_of[v] = trow++;
      if (is_content[v]) content_row_of[v] = crow++;
    }
    if (trow != theta.cols()) throw DataError("model row table inconsistent");
    if (variant != Variant::kHsg && crow != content_reps.cols())
      throw DataError("model content-representation table inconsistent");
  }
};

inline constexpr char kModelMagic[4] = {'H', 'E', 'M', 'B'};
inline constexpr uint32_t kModelVersion = 1;

inline void save_model(const TrainedModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path);
  io::write_bytes(out, kModelMagic, 4);
  io::write_u32(out, kModelVersion);
  io::write_u32(out, static_cast<uint32_t>(m.variant));
  io::write_u64(out, static_cast<uint64_t>(m.dim));
  io::write_u64(out, static_cast<uint64_t>(m.word_dim));
  io::write_f64(out, m.gamma);
  io::write_u64(out, m.negatives);
  io::write_u64(out, m.seed);
  io::write_u64(out, m.window);
  io::write_u64(out, m.walks_per_node);
  io::write_u64(out, m.walk_length);
  io::write_u32(out, m.walk_mode == WalkMode::kMetaPath ? 1 : 0);
  io::write_u32(out, m.noise_support == NoiseSupport::kAllNodes ? 1 : 0);
  io::write_u64(out, m.scheme_names.size());
  for (const auto& s : m.scheme_names) io::write_string(out, s);
  io::write_string(out, m.word_vec_path);

  io::write_u64(out, m.schema.num_node_types());
  for (TypeId t = 0; t < m.schema.num_node_types(); ++t)
    io::write_string(out, m.schema.node_type_name(t));
  io::write_u64(out, m.schema.num_relations());
  for (RelId r = 0; r < m.schema.num_relations(); ++r) {
    const RelationDef& def = m.schema.relation(r);
    io::write_string(out, def.name);
    io::write_u64(out, def.src);
    io::write_u64(out, def.dst);
    io::write_u32(out, def.directed ? 1 : 0);
  }

  io::write_u64(out, m.num_nodes());
  for (size_t v = 0; v < m.num_nodes(); ++v) {
    io::write_string(out, m.labels[v]);
    io::write_u64(out, m.types[v]);
    io::write_u32(out, m.is_content[v]);
  }
  io::write_u64(out, m.corpus_freq.size());
  for (uint64_t f : m.corpus_freq) io::write_u64(out, f);

  io::write_mat(out, m.theta);
  io::write_mat(out, m.content_reps);
  io::write_u32(out, m.has_phi ? 1 : 0);
  if (m.has_phi)
    for (const Mat* mat : m.phi.matrices()) io::write_mat(out, *mat);

  io::write_u64(out, m.epoch_losses.size());
  for (double l : m.epoch_losses) io::write_f64(out, l);
  if (!out) throw DataError("failed writing " + path);
}

inline TrainedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  char magic[4];
  io::read_bytes(in, magic, 4);
  if (std::memcmp(magic, kModelMagic, 4) != 0) throw DataError(path + ": not a model file");
  uint32_t version = io::read_u32(in);
  if (version != kModelVersion)
    throw DataError(path + ": unsupported model version " + std::to_string(version));

  TrainedModel m;
  m.variant = static_cast<Variant>(io::read_u32(in));
  if (m.variant != Variant::kHsg && m.variant != Variant::kHsgSr && m.variant != Variant::kSeHsg)
    throw DataError(path + ": unknown variant code");
  m.dim = static_cast<Eigen::Index>(io::read_u64(in));
  m.word_dim = static_cast<Eigen::Index>(io::read_u64(in));
  m.gamma = io::read_f64(in);
  m.negatives = io::read_u64(in);
  m.seed = io::read_u64(in);
  m.window = io::read_u64(in);
  m.walks_per_node = io::read_u64(in);
  m.walk_length = io::read_u64(in);
  m.walk_mode = io::read_u32(in) ? WalkMode::kMetaPath : WalkMode::kRandom;
  m.noise_support = io::read_u32(in) ? NoiseSupport::kAllNodes : NoiseSupport::kCorpusVisited;
  m.scheme_names.resize(io::read_u64(in));
  for (auto& s : m.scheme_names) s = io::read_string(in);
  m.word_vec_path = io::read_string(in);

  size_t n_types = io::read_u64(in);
  for (size_t t = 0; t < n_types; ++t) m.schema.add_node_type(io::read_string(in));
  size_t n_rels = io::read_u64(in);
  for (size_t r = 0; r < n_rels; ++r) {
    std::string name = io::read_string(in);
    TypeId src = static_cast<TypeId>(io::read_u64(in));
    TypeId dst = static_cast<TypeId>(io::read_u64(in));
    bool directed = io::read_u32(in) != 0;
    m.schema.add_relation(name, m.schema.node_type_name(src), m.schema.node_type_name(dst),
                          directed);
  }

  size_t n_nodes = io::read_u64(in);
  m.labels.resize(n_nodes);
  m.types.resize(n_nodes);
  m.is_content.resize(n_nodes);
  for (size_t v = 0; v < n_nodes; ++v) {
    m.labels[v] = io::read_string(in);
    m.types[v] = static_cast<TypeId>(io::read_u64(in));
    m.is_content[v] = static_cast<uint8_t>(io::read_u32(in));
  }
  m.corpus_freq.resize(io::read_u64(in));
  for (auto& f : m.corpus_freq) f = io::read_u64(in);

  m.theta = io::read_mat(in);
  m.content_reps = io::read_mat(in);
  m.has_phi = io::read_u32(in) != 0;
  if (m.has_phi)
    for (Mat* mat : m.phi.matrices()) *mat = io::read_mat(in);

  m.epoch_losses.resize(io::read_u64(in));
  for (auto& l : m.epoch_losses) l = io::read_f64(in);

  m.rebuild_lookups();
  return m;
}

// Plain-text export: `label<TAB>v_1 v_2 ... v_d` per node, full precision.
inline void export_embeddings(const TrainedModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path);
  out.precision(17);
  for (NodeIndex v = 0; v < m.num_nodes(); ++v) {
    out << m.labels[v] << '\t';
    Vec rep = m.resolve(v);
    for (Eigen::Index i = 0; i < rep.size(); ++i) out << (i ? " " : "") << rep(i);
    out << '\n';
  }
}

// Appends rows in the same format (used for online-updated nodes).
inline void append_embeddings(const std::vector<std::pair<std::string, Vec>>& rows,
                              const std::string& path) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("cannot open " + path);
  out.precision(17);
  for (const auto& [label, rep] : rows) {
    out << label << '\t';
    for (Eigen::Index i = 0; i < rep.size(); ++i) out << (i ? " " : "") << rep(i);
    out << '\n';
  }
}

// Training-log CSV: epoch, loss, wall-time seconds.
inline void export_training_log(const std::vector<EpochStat>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path);
  out << "epoch,loss,wall_time\n";
  out.precision(17);
  for (const auto& e : log) out << e.epoch << "," << e.loss << "," << e.seconds << "\n";
}

}  // namespace hetembed
