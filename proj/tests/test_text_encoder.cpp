// Tokenizer, word-vector table, GRU forward/backward.

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "hetembed/rng.hpp"
#include "hetembed/text_encoder.hpp"
#include "test_util.hpp"

using namespace hetembed;

namespace {

// Independent reference implementation of the encoder forward pass, written
// with plain scalar loops so it shares no code with the production path.
std::vector<double> reference_encode(const GruParams& p, const Mat& x) {
  const int d = static_cast<int>(p.hidden_dim());
  const int dw = static_cast<int>(p.input_dim());
  const int n = static_cast<int>(x.cols());
  std::vector<double> h(d, 0.0), sum(d, 0.0);
  for (int t = 0; t < n; ++t) {
    std::vector<double> z(d), r(d), hb(d), hn(d);
    for (int i = 0; i < d; ++i) {
      double az = 0.0, ar = 0.0;
      for (int j = 0; j < dw; ++j) {
        az += p.A_z(i, j) * x(j, t);
        ar += p.A_r(i, j) * x(j, t);
      }
      for (int j = 0; j < d; ++j) {
        az += p.B_z(i, j) * h[j];
        ar += p.B_r(i, j) * h[j];
      }
      z[i] = 1.0 / (1.0 + std::exp(-az));
      r[i] = 1.0 / (1.0 + std::exp(-ar));
    }
    for (int i = 0; i < d; ++i) {
      double ah = 0.0;
      for (int j = 0; j < dw; ++j) ah += p.A_h(i, j) * x(j, t);
      for (int j = 0; j < d; ++j) ah += p.B_h(i, j) * (r[j] * h[j]);
      hb[i] = std::tanh(ah);
      hn[i] = z[i] * h[i] + (1.0 - z[i]) * hb[i];
    }
    h = hn;
    for (int i = 0; i < d; ++i) sum[i] += h[i];
  }
  for (int i = 0; i < d; ++i) sum[i] /= n;
  return sum;
}

// Scalar probe loss L = c . E(params, x), used by the finite-difference check.
double probe_loss(const GruParams& p, const Mat& x, const Vec& c) {
  return c.dot(encode_forward(p, x).embedding);
}

double rel_error(const Mat& analytic, const Mat& numeric) {
  double denom = std::max(numeric.norm(), 1e-12);
  return (analytic - numeric).norm() / denom;
}

}  // namespace

TEST_CASE("tokenize lowercases, splits on non-alphanumerics, truncates") {
  REQUIRE(tokenize("Graph Embedding!") == std::vector<std::string>{"graph", "embedding"});
  REQUIRE(tokenize("").empty());
  REQUIRE(tokenize("  ,,  --  ").empty());
  REQUIRE(tokenize("don't stop") == std::vector<std::string>{"don", "t", "stop"});
  REQUIRE(tokenize("GRU-based model, 2 layers") ==
          std::vector<std::string>{"gru", "based", "model", "2", "layers"});

  // Truncation keeps the first max_tokens tokens.
  std::string longtext;
  for (int i = 0; i < 500; ++i) longtext += "w" + std::to_string(i) + " ";
  auto trunc = tokenize(longtext, 100);
  REQUIRE(trunc.size() == 100);
  REQUIRE(trunc.front() == "w0");
  REQUIRE(trunc.back() == "w99");
}

TEST_CASE("word table: OOV mean vector, duplicate detection, lookup") {
  Mat m(2, 2);
  m << 1, 0,
       0, 1;
  WordTable table({"alpha", "beta"}, m);
  REQUIRE(table.size() == 2);
  REQUIRE(table.dim() == 2);
  REQUIRE(table.vector("alpha") == Eigen::Vector2d(1, 0));
  REQUIRE(table.oov_vector() == Eigen::Vector2d(0.5, 0.5));
  REQUIRE(table.vector("never-seen") == table.oov_vector());

  Mat seq = table.embed_sequence({"alpha", "zzz", "beta"});
  REQUIRE(seq.cols() == 3);
  REQUIRE(seq.col(1) == table.oov_vector());

  REQUIRE_THROWS_WITH((WordTable({"dup", "dup"}, m)),
                      Catch::Matchers::ContainsSubstring("duplicate token"));
}

TEST_CASE("word-vector file parsing and error reporting") {
  testutil::TempDir dir;

  std::string good = dir.file("vecs.txt");
  testutil::write_file(good, "2 3\nalpha 1 2 3\nbeta 0.5 -1 0\n");
  WordTable t = load_word_vectors(good);
  REQUIRE(t.size() == 2);
  REQUIRE(t.vector("beta")(1) == -1.0);

  std::string ragged = dir.file("ragged.txt");
  testutil::write_file(ragged, "2 3\nalpha 1 2 3\nbeta 1 2\n");
  REQUIRE_THROWS_WITH(load_word_vectors(ragged),
                      Catch::Matchers::ContainsSubstring("ragged.txt:3"));

  std::string extra = dir.file("extra.txt");
  testutil::write_file(extra, "1 2\nalpha 1 2 3\n");
  REQUIRE_THROWS_WITH(load_word_vectors(extra),
                      Catch::Matchers::ContainsSubstring("too many values"));

  std::string shortfile = dir.file("short.txt");
  testutil::write_file(shortfile, "3 2\nalpha 1 2\n");
  REQUIRE_THROWS_WITH(load_word_vectors(shortfile),
                      Catch::Matchers::ContainsSubstring("declares 3 tokens, found 1"));

  std::string badheader = dir.file("badheader.txt");
  testutil::write_file(badheader, "vectors here\nalpha 1 2\n");
  REQUIRE_THROWS_WITH(load_word_vectors(badheader),
                      Catch::Matchers::ContainsSubstring("bad header"));

  REQUIRE_THROWS_WITH(load_word_vectors(dir.file("missing.txt")),
                      Catch::Matchers::ContainsSubstring("cannot open"));
}

TEST_CASE("gru cell: zero-weight closed forms and shape checks") {
  const Eigen::Index d = 4, dw = 3;
  GruParams p = GruParams::zero(d, dw);
  Vec x = Vec::LinSpaced(dw, 1.0, 3.0);
  Vec h_prev(d);
  h_prev << 0.2, -0.4, 0.8, -1.0;

  // All-zero weights: every gate preactivation is 0, so z = r = 0.5 and the
  // candidate is tanh(0) = 0, leaving h = 0.5 * h_prev.
  GruStep s = gru_cell(p, x, h_prev);
  REQUIRE(s.z.isApprox(Vec::Constant(d, 0.5)));
  REQUIRE(s.r.isApprox(Vec::Constant(d, 0.5)));
  REQUIRE(s.hbar.isZero());
  REQUIRE(s.h.isApprox(0.5 * h_prev));

  GruStep from_zero = gru_cell(p, x, Vec::Zero(d));
  REQUIRE(from_zero.h.isZero());

  REQUIRE_THROWS_AS(gru_cell(p, Vec::Zero(dw + 1), h_prev), DataError);
  REQUIRE_THROWS_AS(gru_cell(p, x, Vec::Zero(d + 1)), DataError);
}

TEST_CASE("gru update is a convex combination: sup-norm bound holds") {
  // h_t = z o h_prev + (1-z) o hbar with z in (0,1) and |hbar| < 1, so each
  // component of h_t lies between h_prev's and a value in (-1,1):
  // |h_t|_inf <= max(|h_prev|_inf, 1).
  for (uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng = make_rng(seed, "convex");
    GruParams p = GruParams::init(6, 4, rng);
    for (Mat* m : p.matrices()) *m *= 5.0;  // exaggerate weights
    Vec h = Vec::Zero(6);
    for (int i = 0; i < 6; ++i) h(i) = uniform_range(rng, -3.0, 3.0);
    for (int t = 0; t < 8; ++t) {
      Vec x(4);
      for (int i = 0; i < 4; ++i) x(i) = uniform_range(rng, -2.0, 2.0);
      Vec h_next = gru_cell(p, x, h).h;
      REQUIRE(h_next.lpNorm<Eigen::Infinity>() <=
              std::max(h.lpNorm<Eigen::Infinity>(), 1.0) + 1e-12);
      h = h_next;
    }
  }
}

TEST_CASE("encoder forward: zero-weight cases, empty input, mean pooling") {
  const Eigen::Index d = 5, dw = 3;
  GruParams p = GruParams::zero(d, dw);

  Mat one(dw, 1);
  one << 1, 2, 3;
  EncodeResult r1 = encode_forward(p, one);
  REQUIRE(r1.embedding.isZero());
  REQUIRE_FALSE(r1.empty_input);

  Mat two(dw, 2);
  two << 1, 1, 2, 2, 3, 3;
  REQUIRE(encode_forward(p, two).embedding.isZero());

  EncodeResult empty = encode_forward(p, Mat(dw, 0));
  REQUIRE(empty.empty_input);
  REQUIRE(empty.embedding == Vec::Zero(d));
  REQUIRE(empty.cache.steps() == 0);
}

TEST_CASE("encoder forward matches an independent reference implementation") {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng = make_rng(seed, "refenc");
    GruParams p = GruParams::init(8, 6, rng);
    Mat x(6, 5);
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = uniform_range(rng, -1.0, 1.0);

    Vec got = encode_forward(p, x).embedding;
    std::vector<double> want = reference_encode(p, x);
    REQUIRE(got.size() == static_cast<Eigen::Index>(want.size()));
    for (Eigen::Index i = 0; i < got.size(); ++i)
      REQUIRE(got(i) == Catch::Approx(want[i]).margin(1e-12));

    // Determinism: a second pass is bitwise identical.
    Vec again = encode_forward(p, x).embedding;
    REQUIRE(std::memcmp(got.data(), again.data(), sizeof(double) * got.size()) == 0);
  }
}

TEST_CASE("encoder backward: trivial gradients at zero weights") {
  const Eigen::Index d = 4, dw = 3;
  GruParams p = GruParams::zero(d, dw);
  Mat x(dw, 1);
  x << 1, -2, 0.5;
  EncodeResult fwd = encode_forward(p, x);

  // dL/dE = 0 propagates to all-zero gradients.
  GruParams zero_grad = encode_backward(p, fwd.cache, Vec::Zero(d));
  for (const Mat* m : zero_grad.matrices()) REQUIRE(m->isZero());

  // Single step from h_0 = 0 with zero weights: only the candidate path is
  // active, and dL/dA_h = (1-z) * tanh'(0) * dE * x^T = 0.5 * dE * x^T.
  Vec dE(d);
  dE << 1, 2, -1, 0.5;
  GruParams g = encode_backward(p, fwd.cache, dE);
  REQUIRE(g.A_h.isApprox(0.5 * dE * x.col(0).transpose(), 1e-12));
  REQUIRE(g.A_z.isZero());
  REQUIRE(g.A_r.isZero());
  REQUIRE(g.B_z.isZero());
  REQUIRE(g.B_r.isZero());
  REQUIRE(g.B_h.isZero());

  REQUIRE_THROWS_AS(encode_backward(p, fwd.cache, Vec::Zero(d + 1)), DataError);
}

TEST_CASE("encoder backward is linear in the pooled gradient") {
  Rng rng = make_rng(77, "linear");
  GruParams p = GruParams::init(6, 4, rng);
  Mat x(4, 3);
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = uniform_range(rng, -1.0, 1.0);
  Vec dE(6);
  for (int i = 0; i < 6; ++i) dE(i) = uniform_range(rng, -1.0, 1.0);

  EncodeResult fwd = encode_forward(p, x);
  GruParams g1 = encode_backward(p, fwd.cache, dE);
  GruParams g3 = encode_backward(p, fwd.cache, Vec(3.0 * dE));
  auto m1 = g1.matrices();
  auto m3 = g3.matrices();
  for (size_t k = 0; k < m1.size(); ++k) REQUIRE(m3[k]->isApprox(3.0 * *m1[k], 1e-12));
}

TEST_CASE("encoder gradients match central finite differences over many seeds") {
  // Oracle: numeric gradient dL/dw ~= [L(w+eps) - L(w-eps)] / (2 eps) with a
  // random linear probe L = c . E. Every matrix must agree to 1e-4 relative
  // error; word-vector gradients are checked the same way.
  const double kEps = 1e-5;
  const double kTol = 1e-4;
  const Eigen::Index d = 8, dw = 6, len = 5;

  for (uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng = make_rng(seed, "fdcheck");
    GruParams p = GruParams::init(d, dw, rng);
    Mat x(dw, len);
    for (Eigen::Index j = 0; j < len; ++j)
      for (Eigen::Index i = 0; i < dw; ++i) x(i, j) = uniform_range(rng, -1.0, 1.0);
    Vec c(d);
    for (Eigen::Index i = 0; i < d; ++i) c(i) = uniform_range(rng, -1.0, 1.0);

    EncodeResult fwd = encode_forward(p, x);
    Mat dx;
    GruParams analytic = encode_backward(p, fwd.cache, c, &dx);

    auto grads = analytic.matrices();
    auto params = p.matrices();
    for (size_t k = 0; k < params.size(); ++k) {
      Mat numeric = Mat::Zero(params[k]->rows(), params[k]->cols());
      for (Eigen::Index j = 0; j < numeric.cols(); ++j) {
        for (Eigen::Index i = 0; i < numeric.rows(); ++i) {
          GruParams pp = p;
          (*pp.matrices()[k])(i, j) += kEps;
          double up = probe_loss(pp, x, c);
          (*pp.matrices()[k])(i, j) -= 2 * kEps;
          double down = probe_loss(pp, x, c);
          numeric(i, j) = (up - down) / (2 * kEps);
        }
      }
      INFO("seed " << seed << " matrix " << GruParams::names()[k]);
      REQUIRE(rel_error(*grads[k], numeric) < kTol);
    }

    Mat dx_numeric = Mat::Zero(dw, len);
    for (Eigen::Index j = 0; j < len; ++j) {
      for (Eigen::Index i = 0; i < dw; ++i) {
        Mat xp = x;
        xp(i, j) += kEps;
        double up = probe_loss(p, xp, c);
        xp(i, j) -= 2 * kEps;
        double down = probe_loss(p, xp, c);
        dx_numeric(i, j) = (up - down) / (2 * kEps);
      }
    }
    INFO("seed " << seed << " input gradients");
    REQUIRE(rel_error(dx, dx_numeric) < kTol);
  }
}

TEST_CASE("encode_tokens composes table lookup with the forward pass") {
  Mat m(2, 2);
  m << 1, 0,
       0, 1;
  WordTable table({"alpha", "beta"}, m);
  Rng rng = make_rng(8, "tok");
  GruParams p = GruParams::init(3, 2, rng);

  EncodeResult via_tokens = encode_tokens(p, table, {"alpha", "beta", "alpha"});
  EncodeResult via_matrix = encode_forward(p, table.embed_sequence({"alpha", "beta", "alpha"}));
  REQUIRE(via_tokens.embedding == via_matrix.embedding);

  EncodeResult empty = encode_tokens(p, table, {});
  REQUIRE(empty.empty_input);
  REQUIRE(empty.embedding.isZero());
}
