// Piecewise convolutional sentence encoder with hand-written backward pass.
//
// A sentence of m tokens is embedded as rows w_k = [word | pos(head) | pos(tail)],
// convolved with d_f filters spanning `window` rows (zero padded at both ends, so
// there are m + window - 1 output columns), max-pooled separately over the three
// segments delimited by the entity positions, and squashed with tanh. The result
// x has 3 * d_f components laid out filter-major: x[3 * f + k].
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nmar {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct SentenceExample {
  std::vector<int> tokens;
  int head_pos = 0;
  int tail_pos = 0;

  int length() const { return static_cast<int>(tokens.size()); }
  bool operator==(const SentenceExample&) const = default;
};

struct EncoderDims {
  int vocab_size = 0;
  int word_dim = 50;
  int pos_dim = 5;
  int num_filters = 230;
  int window = 3;
  int max_offset = 30;
  int num_relations = 0;  // excluding NA

  int input_dim() const { return word_dim + 2 * pos_dim; }
  int feature_dim() const { return 3 * num_filters; }
  int position_rows() const { return 2 * max_offset + 1; }
  bool operator==(const EncoderDims&) const = default;
};

/// All learnable tensors. The same type doubles as a gradient accumulator.
/// theta has one row per relation plus a final row for NA.
template <typename Scalar = double>
struct EncoderParams {
  EncoderDims dims;
  RowMatrix<Scalar> word_emb;  // vocab x word_dim
  RowMatrix<Scalar> pos_head;  // position_rows x pos_dim
  RowMatrix<Scalar> pos_tail;
  RowMatrix<Scalar> filters;   // num_filters x (window * input_dim)
  Vector<Scalar> bias;         // num_filters
  RowMatrix<Scalar> theta;     // (num_relations + 1) x feature_dim

  int na() const { return dims.num_relations; }
  int feature_dim() const { return static_cast<int>(theta.cols()); }
};

/// Zero-valued tensors of the shapes implied by dims.
template <typename Scalar = double>
EncoderParams<Scalar> zero_params(const EncoderDims& dims) {
  EncoderParams<Scalar> p;
  p.dims = dims;
  p.word_emb = RowMatrix<Scalar>::Zero(dims.vocab_size, dims.word_dim);
  p.pos_head = RowMatrix<Scalar>::Zero(dims.position_rows(), dims.pos_dim);
  p.pos_tail = RowMatrix<Scalar>::Zero(dims.position_rows(), dims.pos_dim);
  p.filters = RowMatrix<Scalar>::Zero(dims.num_filters, dims.window * dims.input_dim());
  p.bias = Vector<Scalar>::Zero(dims.num_filters);
  p.theta = RowMatrix<Scalar>::Zero(dims.num_relations + 1, dims.feature_dim());
  return p;
}

template <typename Scalar>
EncoderParams<Scalar> zeros_like(const EncoderParams<Scalar>& p) {
  EncoderParams<Scalar> z;
  z.dims = p.dims;
  z.word_emb = RowMatrix<Scalar>::Zero(p.word_emb.rows(), p.word_emb.cols());
  z.pos_head = RowMatrix<Scalar>::Zero(p.pos_head.rows(), p.pos_head.cols());
  z.pos_tail = RowMatrix<Scalar>::Zero(p.pos_tail.rows(), p.pos_tail.cols());
  z.filters = RowMatrix<Scalar>::Zero(p.filters.rows(), p.filters.cols());
  z.bias = Vector<Scalar>::Zero(p.bias.size());
  z.theta = RowMatrix<Scalar>::Zero(p.theta.rows(), p.theta.cols());
  return z;
}

/// Applies fn to every tensor of a and the matching tensor of b, in a fixed
/// order: theta first, then filters, bias and the embedding tables.
template <typename Scalar, typename Fn>
void for_each_tensor(EncoderParams<Scalar>& a, const EncoderParams<Scalar>& b, Fn&& fn) {
  fn(a.theta, b.theta);
  fn(a.filters, b.filters);
  fn(a.bias, b.bias);
  fn(a.word_emb, b.word_emb);
  fn(a.pos_head, b.pos_head);
  fn(a.pos_tail, b.pos_tail);
}

/// params += alpha * grads
template <typename Scalar>
void add_scaled(EncoderParams<Scalar>& params, const EncoderParams<Scalar>& grads, Scalar alpha) {
  for_each_tensor(params, grads, [alpha](auto& p, const auto& g) {
    if (g.size() == p.size() && g.size() > 0) p += alpha * g;
  });
}

template <typename Scalar>
bool all_finite(const EncoderParams<Scalar>& p) {
  return p.word_emb.allFinite() && p.pos_head.allFinite() && p.pos_tail.allFinite() &&
         p.filters.allFinite() && p.bias.allFinite() && p.theta.allFinite();
}

template <typename Scalar>
bool operator==(const EncoderParams<Scalar>& a, const EncoderParams<Scalar>& b) {
  return a.dims == b.dims && a.word_emb == b.word_emb && a.pos_head == b.pos_head &&
         a.pos_tail == b.pos_tail && a.filters == b.filters && a.bias == b.bias &&
         a.theta == b.theta;
}

/// Uniform Glorot initialization of every tensor; bias starts at zero.
template <typename Scalar = double, typename Rng>
EncoderParams<Scalar> glorot_init(const EncoderDims& dims, Rng& rng) {
  auto p = zero_params<Scalar>(dims);
  auto fill = [&rng](auto& m, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(u(rng));
  };
  fill(p.theta, dims.feature_dim(), dims.num_relations + 1);
  fill(p.filters, dims.window * dims.input_dim(), dims.num_filters);
  // A lookup reads one row per token, so the tables see a fan-in of one.
  fill(p.word_emb, 1, dims.word_dim);
  fill(p.pos_head, 1, dims.pos_dim);
  fill(p.pos_tail, 1, dims.pos_dim);
  return p;
}

/// Row of a position table for token i relative to entity position p.
inline int rel_position_index(int i, int p, int max_offset) {
  return std::clamp(i - p, -max_offset, max_offset) + max_offset;
}

inline void validate_sentence(const SentenceExample& s, int vocab_size) {
  const int m = s.length();
  if (m == 0) throw std::invalid_argument("sentence has no tokens");
  if (s.head_pos < 0 || s.head_pos >= m || s.tail_pos < 0 || s.tail_pos >= m)
    throw std::invalid_argument("entity position out of range for sentence of length " +
                                std::to_string(m));
  for (int t : s.tokens)
    if (t < 0 || t >= vocab_size)
      throw std::invalid_argument("token id " + std::to_string(t) + " outside vocabulary");
}

/// Padded input rows: window - 1 zero rows on each side of the m embedded tokens.
template <typename Scalar>
RowMatrix<Scalar> embed_padded(const SentenceExample& s, const EncoderParams<Scalar>& params) {
  const auto& dims = params.dims;
  const int m = s.length();
  const int pad = dims.window - 1;
  RowMatrix<Scalar> w = RowMatrix<Scalar>::Zero(m + 2 * pad, dims.input_dim());
  for (int k = 0; k < m; ++k) {
    auto row = w.row(k + pad);
    row.segment(0, dims.word_dim) = params.word_emb.row(s.tokens[k]);
    row.segment(dims.word_dim, dims.pos_dim) =
        params.pos_head.row(rel_position_index(k, s.head_pos, dims.max_offset));
    row.segment(dims.word_dim + dims.pos_dim, dims.pos_dim) =
        params.pos_tail.row(rel_position_index(k, s.tail_pos, dims.max_offset));
  }
  return w;
}

/// im2col: column j is the flattened window of padded rows j .. j + window - 1,
/// i.e. the window ending at token j.
template <typename Scalar>
RowMatrix<Scalar> window_columns(const RowMatrix<Scalar>& padded, int window) {
  const Eigen::Index d = padded.cols();
  const Eigen::Index width = padded.rows() - window + 1;
  RowMatrix<Scalar> cols(window * d, width);
  for (Eigen::Index j = 0; j < width; ++j)
    cols.col(j) = Eigen::Map<const Vector<Scalar>>(padded.data() + j * d, window * d);
  return cols;
}

/// Feature map c with one row per filter and m + window - 1 columns.
template <typename Scalar>
RowMatrix<Scalar> conv1d_forward(const SentenceExample& s, const EncoderParams<Scalar>& params) {
  if (s.length() == 0) throw std::invalid_argument("conv1d_forward: empty sentence");
  const auto cols = window_columns(embed_padded(s, params), params.dims.window);
  RowMatrix<Scalar> c = params.filters * cols;
  c.colwise() += params.bias;
  return c;
}

/// Half-open column range [begin, end) of one pooling segment.
struct Segment {
  int begin = 0;
  int end = 0;
  bool empty() const { return end <= begin; }
};

/// Pooling segments over conv columns. A column is attributed to the last token
/// its window covers, so column j belongs to the left segment when j <= min
/// entity position, to the middle one when j <= max entity position, and to
/// the right segment (which includes the trailing padded windows) otherwise.
inline std::array<Segment, 3> pooling_segments(int length, int window, int head_pos,
                                               int tail_pos) {
  const int lo = std::min(head_pos, tail_pos);
  const int hi = std::max(head_pos, tail_pos);
  const int width = length + window - 1;
  return {Segment{0, lo + 1}, Segment{lo + 1, hi + 1}, Segment{hi + 1, width}};
}

template <typename Scalar>
struct SentenceEncoding {
  Vector<Scalar> x;
  std::vector<int> pool_argmax;  // column index per x component, -1 for empty segments
};

/// tanh(max) per (filter, segment); empty segments give exactly 0.
template <typename Scalar>
SentenceEncoding<Scalar> piecewise_pool(const RowMatrix<Scalar>& c,
                                        const std::array<Segment, 3>& segments) {
  const Eigen::Index filters = c.rows();
  SentenceEncoding<Scalar> enc;
  enc.x = Vector<Scalar>::Zero(3 * filters);
  enc.pool_argmax.assign(3 * filters, -1);
  for (Eigen::Index f = 0; f < filters; ++f) {
    for (int k = 0; k < 3; ++k) {
      const Segment seg = segments[k];
      if (seg.empty()) continue;
      Eigen::Index best = 0;
      const Scalar top = c.row(f).segment(seg.begin, seg.end - seg.begin).maxCoeff(&best);
      enc.x[3 * f + k] = std::tanh(top);
      enc.pool_argmax[3 * f + k] = seg.begin + static_cast<int>(best);
    }
  }
  return enc;
}

template <typename Scalar>
SentenceEncoding<Scalar> piecewise_pool(const RowMatrix<Scalar>& c, int window, int head_pos,
                                        int tail_pos) {
  const int length = static_cast<int>(c.cols()) - window + 1;
  return piecewise_pool(c, pooling_segments(length, window, head_pos, tail_pos));
}

template <typename Scalar>
SentenceEncoding<Scalar> encode(const SentenceExample& s, const EncoderParams<Scalar>& params) {
  return piecewise_pool(conv1d_forward(s, params), params.dims.window, s.head_pos, s.tail_pos);
}

/// Log-potential of labeling a sentence with relation r: x . theta_r.
template <typename Scalar, typename Derived>
Scalar mention_score(const Eigen::MatrixBase<Derived>& x, int relation,
                     const EncoderParams<Scalar>& params) {
  if (relation < 0 || relation >= params.theta.rows())
    throw std::out_of_range("relation id " + std::to_string(relation) + " out of range");
  return params.theta.row(relation).dot(x);
}

/// n x (R + 1) table of x_i . theta_r for a stack of sentence vectors.
template <typename Scalar>
RowMatrix<Scalar> score_table(std::span<const SentenceEncoding<Scalar>> encodings,
                              const RowMatrix<Scalar>& theta) {
  RowMatrix<Scalar> s(static_cast<Eigen::Index>(encodings.size()), theta.rows());
  for (std::size_t i = 0; i < encodings.size(); ++i)
    s.row(static_cast<Eigen::Index>(i)) = theta * encodings[i].x;
  return s;
}

template <typename Scalar>
struct GradPair {
  int relation = 0;
  Scalar weight = 1;
};

/// Accumulates into grads the gradient of sum_k weight_k * (x . theta_{r_k})
/// with respect to every parameter. Only the winning pooled columns receive
/// gradient; empty segments receive none.
template <typename Scalar>
void encode_backward(const SentenceExample& s, const EncoderParams<Scalar>& params,
                     const SentenceEncoding<Scalar>& enc,
                     std::span<const GradPair<Scalar>> grad_pairs, EncoderParams<Scalar>& grads) {
  const auto& dims = params.dims;
  Vector<Scalar> dx = Vector<Scalar>::Zero(enc.x.size());
  bool any = false;
  for (const auto& gp : grad_pairs) {
    if (gp.weight == Scalar(0)) continue;
    grads.theta.row(gp.relation) += gp.weight * enc.x.transpose();
    dx += gp.weight * params.theta.row(gp.relation).transpose();
    any = true;
  }
  if (!any || dims.num_filters == 0) return;

  const auto padded = embed_padded(s, params);
  const auto cols = window_columns(padded, dims.window);
  RowMatrix<Scalar> dc = RowMatrix<Scalar>::Zero(dims.num_filters, cols.cols());
  for (int f = 0; f < dims.num_filters; ++f) {
    for (int k = 0; k < 3; ++k) {
      const int idx = 3 * f + k;
      const int j = enc.pool_argmax[idx];
      if (j < 0) continue;
      const Scalar xv = enc.x[idx];
      dc(f, j) += dx[idx] * (Scalar(1) - xv * xv);
    }
  }
  grads.filters.noalias() += dc * cols.transpose();
  grads.bias += dc.rowwise().sum();

  const RowMatrix<Scalar> dcols = params.filters.transpose() * dc;
  const int d = dims.input_dim();
  const int pad = dims.window - 1;
  const int m = s.length();
  for (Eigen::Index j = 0; j < dcols.cols(); ++j) {
    for (int o = 0; o < dims.window; ++o) {
      const int token = static_cast<int>(j) + o - pad;
      if (token < 0 || token >= m) continue;
      const auto g = dcols.col(j).segment(o * d, d);
      grads.word_emb.row(s.tokens[token]) += g.segment(0, dims.word_dim).transpose();
      grads.pos_head.row(rel_position_index(token, s.head_pos, dims.max_offset)) +=
          g.segment(dims.word_dim, dims.pos_dim).transpose();
      grads.pos_tail.row(rel_position_index(token, s.tail_pos, dims.max_offset)) +=
          g.segment(dims.word_dim + dims.pos_dim, dims.pos_dim).transpose();
    }
  }
}

}  // namespace nmar
