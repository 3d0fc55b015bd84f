#pragma once
// Text side of the model: tokenizer, frozen pretrained word vectors, and a
// GRU encoder f mapping a token sequence to a d-vector E_v by mean-pooling
// the hidden states. Forward keeps a cache; backward is exact BPTT.

#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "hetembed/common.hpp"
#include "hetembed/rng.hpp"

namespace hetembed {

// Lowercase, split on non-alphanumeric runs, keep at most max_tokens.
inline std::vector<std::string> tokenize(const std::string& text,
                                         size_t max_tokens = static_cast<size_t>(-1)) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      if (tokens.size() == max_tokens) return tokens;
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty() && tokens.size() < max_tokens) tokens.push_back(std::move(cur));
  return tokens;
}

// Pretrained word vectors, frozen. Unknown tokens map to the mean vector.
class WordTable {
 public:
  WordTable() = default;
  WordTable(std::vector<std::string> tokens, Mat vectors)  // vectors: d_w x vocab
      : tokens_(std::move(tokens)), vectors_(std::move(vectors)) {
    if (static_cast<size_t>(vectors_.cols()) != tokens_.size())
      throw DataError("word table shape mismatch");
    if (tokens_.empty()) throw DataError("empty word vocabulary");
    for (size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], i).second)
        throw DataError("duplicate token: " + tokens_[i]);
    }
    oov_ = vectors_.rowwise().mean();
  }

  size_t size() const { return tokens_.size(); }
  Eigen::Index dim() const { return vectors_.rows(); }
  const Vec& oov_vector() const { return oov_; }

  Vec vector(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return oov_;
    return vectors_.col(static_cast<Eigen::Index>(it->second));
  }

  // Token sequence as a d_w x n matrix of input columns.
  Mat embed_sequence(const std::vector<std::string>& tokens) const {
    Mat x(dim(), static_cast<Eigen::Index>(tokens.size()));
    for (size_t i = 0; i < tokens.size(); ++i)
      x.col(static_cast<Eigen::Index>(i)) = vector(tokens[i]);
    return x;
  }

 private:
  std::vector<std::string> tokens_;
  Mat vectors_;
  Vec oov_;
  std::unordered_map<std::string, size_t> index_;
};

// File format: first line `vocab_size d_w`, then `token v_1 ... v_{d_w}`.
inline WordTable load_word_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  size_t vocab = 0, dw = 0;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": missing header");
  {
    std::istringstream hs(line);
    if (!(hs >> vocab >> dw) || vocab == 0 || dw == 0)
      throw DataError(path + ": bad header `" + line + "`");
  }
  std::vector<std::string> tokens;
  tokens.reserve(vocab);
  Mat vectors(static_cast<Eigen::Index>(dw), static_cast<Eigen::Index>(vocab));
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (tokens.size() == vocab)
      throw DataError(path + ":" + std::to_string(lineno) + ": more rows than header declares");
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    Eigen::Index col = static_cast<Eigen::Index>(tokens.size());
    for (size_t j = 0; j < dw; ++j) {
      if (!(ls >> vectors(static_cast<Eigen::Index>(j), col)))
        throw DataError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(dw) +
                        " values for token '" + token + "'");
    }
    double extra;
    if (ls >> extra)
      throw DataError(path + ":" + std::to_string(lineno) + ": too many values for token '" +
                      token + "'");
    tokens.push_back(token);
  }
  if (tokens.size() != vocab)
    throw DataError(path + ": header declares " + std::to_string(vocab) + " tokens, found " +
                    std::to_string(tokens.size()));
  return WordTable(std::move(tokens), std::move(vectors));
}

// The six GRU weight matrices (Phi). No bias terms.
struct GruParams {
  Mat A_z, A_r, A_h;  // d x d_w, applied to the input x_t
  Mat B_z, B_r, B_h;  // d x d, applied to the previous hidden state

  static GruParams zero(Eigen::Index d, Eigen::Index dw) {
    GruParams p;
    p.A_z = Mat::Zero(d, dw);
    p.A_r = Mat::Zero(d, dw);
    p.A_h = Mat::Zero(d, dw);
    p.B_z = Mat::Zero(d, d);
    p.B_r = Mat::Zero(d, d);
    p.B_h = Mat::Zero(d, d);
    return p;
  }

  // Uniform(-1/sqrt(d), 1/sqrt(d)) entries.
  static GruParams init(Eigen::Index d, Eigen::Index dw, Rng& rng) {
    GruParams p = zero(d, dw);
    double bound = 1.0 / std::sqrt(static_cast<double>(d));
    for (Mat* m : p.matrices())
      for (Eigen::Index j = 0; j < m->cols(); ++j)
        for (Eigen::Index i = 0; i < m->rows(); ++i)
          (*m)(i, j) = uniform_range(rng, -bound, bound);
    return p;
  }

  Eigen::Index hidden_dim() const { return A_z.rows(); }
  Eigen::Index input_dim() const { return A_z.cols(); }

  std::array<Mat*, 6> matrices() { return {&A_z, &A_r, &A_h, &B_z, &B_r, &B_h}; }
  std::array<const Mat*, 6> matrices() const { return {&A_z, &A_r, &A_h, &B_z, &B_r, &B_h}; }
  static std::array<const char*, 6> names() { return {"A_z", "A_r", "A_h", "B_z", "B_r", "B_h"}; }
};

struct EncoderConfig {
  Eigen::Index hidden_dim = 128;  // d, equals the embedding dimension
  size_t max_tokens = 100;        // t_max; longer texts are truncated

  void validate() const {
    if (hidden_dim < 1) throw DataError("encoder hidden_dim must be >= 1");
    if (max_tokens < 1) throw DataError("encoder max_tokens must be >= 1");
  }
};

// Everything backward needs: inputs and per-step gate/hidden values.
struct ForwardCache {
  Mat x;     // d_w x n
  Mat z;     // d x n, update gate
  Mat r;     // d x n, reset gate
  Mat hbar;  // d x n, candidate state
  Mat h;     // d x n, hidden state
  Eigen::Index steps() const { return h.cols(); }
};

struct GruStep {
  Vec z, r, hbar, h;
};

// One recurrence step:
//   z_t = sigma(A_z x_t + B_z h_{t-1})
//   r_t = sigma(A_r x_t + B_r h_{t-1})
//   hbar_t = tanh(A_h x_t + B_h (r_t o h_{t-1}))
//   h_t = z_t o h_{t-1} + (1 - z_t) o hbar_t
inline GruStep gru_cell(const GruParams& p, const Vec& x, const Vec& h_prev) {
  if (x.size() != p.input_dim() || h_prev.size() != p.hidden_dim())
    throw DataError("gru_cell shape mismatch");
  GruStep s;
  s.z = (p.A_z * x + p.B_z * h_prev).unaryExpr([](double v) { return sigmoid(v); });
  s.r = (p.A_r * x + p.B_r * h_prev).unaryExpr([](double v) { return sigmoid(v); });
  s.hbar = (p.A_h * x + p.B_h * (s.r.cwiseProduct(h_prev))).array().tanh();
  s.h = s.z.cwiseProduct(h_prev) + (Vec::Ones(s.z.size()) - s.z).cwiseProduct(s.hbar);
  return s;
}

struct EncodeResult {
  Vec embedding;  // E_v = mean of h_1..h_n (zero vector when input is empty)
  ForwardCache cache;
  bool empty_input = false;
};

// Runs the GRU over the input columns from h_0 = 0 and mean-pools the
// hidden states over the actual sequence length.
inline EncodeResult encode_forward(const GruParams& p, const Mat& x) {
  if (x.cols() > 0 && x.rows() != p.input_dim()) throw DataError("encoder input shape mismatch");
  EncodeResult res;
  Eigen::Index d = p.hidden_dim(), n = x.cols();
  if (n == 0) {
    res.embedding = Vec::Zero(d);
    res.empty_input = true;
    res.cache.x = Mat(p.input_dim(), 0);
    res.cache.z = res.cache.r = res.cache.hbar = res.cache.h = Mat(d, 0);
    return res;
  }
  res.cache.x = x;
  res.cache.z.resize(d, n);
  res.cache.r.resize(d, n);
  res.cache.hbar.resize(d, n);
  res.cache.h.resize(d, n);
  Vec h_prev = Vec::Zero(d);
  for (Eigen::Index t = 0; t < n; ++t) {
    GruStep s = gru_cell(p, x.col(t), h_prev);
    res.cache.z.col(t) = s.z;
    res.cache.r.col(t) = s.r;
    res.cache.hbar.col(t) = s.hbar;
    res.cache.h.col(t) = s.h;
    h_prev = s.h;
  }
  res.embedding = res.cache.h.rowwise().mean();
  return res;
}

inline EncodeResult encode_tokens(const GruParams& p, const WordTable& words,
                                  const std::vector<std::string>& tokens) {
  return encode_forward(p, words.embed_sequence(tokens));
}

// Exact gradients of a loss L wrt all six matrices given dL/dE_v, by
// backpropagation through time. The mean pool contributes dE/n to every
// step's hidden-state gradient. Set dx to also get dL/dx_t (the word
// vectors stay frozen in training; dx exists for gradient checks).
inline GruParams encode_backward(const GruParams& p, const ForwardCache& cache, const Vec& dE,
                                 Mat* dx = nullptr) {
  Eigen::Index d = p.hidden_dim(), n = cache.steps();
  if (dE.size() != d) throw DataError("encode_backward gradient shape mismatch");
  if (cache.x.cols() != n) throw DataError("encode_backward cache mismatch");
  GruParams grad = GruParams::zero(d, p.input_dim());
  if (dx) *dx = Mat::Zero(p.input_dim(), n);
  if (n == 0) return grad;

  Vec pool = dE / static_cast<double>(n);
  Vec gh = Vec::Zero(d);  // dL/dh_t, accumulated from step n down to 1
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    gh += pool;
    Vec h_prev = t > 0 ? Vec(cache.h.col(t - 1)) : Vec(Vec::Zero(d));
    Vec z = cache.z.col(t), r = cache.r.col(t), hbar = cache.hbar.col(t);

    Vec dz = gh.cwiseProduct(h_prev - hbar);
    Vec dhbar = gh.cwiseProduct(Vec::Ones(d) - z);
    Vec dah = dhbar.cwiseProduct(Vec::Ones(d) - hbar.cwiseProduct(hbar));  // tanh'
    Vec dq = p.B_h.transpose() * dah;  // q_t = r_t o h_{t-1}
    Vec dr = dq.cwiseProduct(h_prev);
    Vec dar = dr.cwiseProduct(r).cwiseProduct(Vec::Ones(d) - r);  // sigma'
    Vec daz = dz.cwiseProduct(z).cwiseProduct(Vec::Ones(d) - z);

    grad.A_z += daz * cache.x.col(t).transpose();
    grad.A_r += dar * cache.x.col(t).transpose();
    grad.A_h += dah * cache.x.col(t).transpose();
    grad.B_z += daz * h_prev.transpose();
    grad.B_r += dar * h_prev.transpose();
    grad.B_h += dah * (r.cwiseProduct(h_prev)).transpose();
    if (dx)
      dx->col(t) = p.A_z.transpose() * daz + p.A_r.transpose() * dar + p.A_h.transpose() * dah;

    gh = gh.cwiseProduct(z) + p.B_z.transpose() * daz + p.B_r.transpose() * dar +
         dq.cwiseProduct(r);
  }
  return grad;
}

}  // namespace hetembed
