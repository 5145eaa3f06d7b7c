#include "rbr/decoders.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "rbr/random.hpp"

namespace rbr {

std::string_view decoder_kind_name(DecoderKind kind) {
  switch (kind) {
    case DecoderKind::kLinear: return "linear";
    case DecoderKind::kMlp: return "mlp";
    case DecoderKind::kTransformer: return "xf";
  }
  return "linear";
}

DecoderKind parse_decoder_kind(std::string_view name) {
  if (name == "linear") return DecoderKind::kLinear;
  if (name == "mlp") return DecoderKind::kMlp;
  if (name == "xf" || name == "transformer") return DecoderKind::kTransformer;
  throw Error(ErrorCode::kInvalidArgument, "unknown decoder '" + std::string(name) + "'");
}

void DecoderSpec::validate() const {
  if (input_dim == 0 || num_classes == 0) {
    throw Error(ErrorCode::kInvalidArgument, "decoder needs positive input_dim and num_classes");
  }
  if (kind == DecoderKind::kMlp && hidden == 0) {
    throw Error(ErrorCode::kInvalidArgument, "MLP hidden width must be positive");
  }
  if (kind == DecoderKind::kTransformer &&
      (blocks == 0 || heads == 0 || input_dim % heads != 0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "transformer width " + std::to_string(input_dim) +
                    " must be divisible by heads " + std::to_string(heads));
  }
}

Matrix tokens_from_vectors(std::span<const RegionVector> vectors) {
  if (vectors.empty()) return Matrix(0, 0);
  Matrix m(vectors.size(), vectors.front().values.size());
  for (std::size_t r = 0; r < vectors.size(); ++r) {
    if (vectors[r].values.size() != m.cols) {
      throw Error(ErrorCode::kInvalidArgument, "ragged region vectors");
    }
    std::copy(vectors[r].values.begin(), vectors[r].values.end(), m.row(r));
  }
  return m;
}

// ---- Decoder base -------------------------------------------------------------

std::vector<Param*> Decoder::params() {
  std::vector<Param*> out;
  for (Param& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Param*> Decoder::params() const {
  std::vector<const Param*> out;
  for (const Param& p : params_) out.push_back(&p);
  return out;
}

void Decoder::zero_grad() {
  for (Param& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

std::size_t Decoder::num_parameters() const {
  std::size_t n = 0;
  for (const Param& p : params_) n += p.value.size();
  return n;
}

void Decoder::check_input(const Matrix& tokens, std::span<const std::uint8_t> mask) const {
  if (tokens.cols != spec_.input_dim) {
    throw Error(ErrorCode::kInvalidArgument,
                "token width " + std::to_string(tokens.cols) +
                    " does not match decoder width " + std::to_string(spec_.input_dim));
  }
  if (!mask.empty() && mask.size() != tokens.rows) {
    throw Error(ErrorCode::kInvalidArgument, "attention mask length differs from token count");
  }
}

namespace {

constexpr double kLayerNormEps = 1e-5;

Param make_param(std::string name, std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return {std::move(name), std::move(shape), std::vector<double>(n, 0.0),
          std::vector<double>(n, 0.0)};
}

// y = x W^T + b with W shaped (out, in).
Matrix affine(const Matrix& x, const Param& w, const Param& b) {
  const std::size_t out = w.shape[0];
  const std::size_t in = w.shape[1];
  Matrix y(x.rows, out);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = w.value.data() + o * in;
      double acc = b.value[o];
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wo[i];
      y(r, o) = acc;
    }
  }
  return y;
}

// Accumulates dW, db and returns dx.
Matrix affine_backward(const Matrix& x, Param& w, Param& b, const Matrix& dy) {
  const std::size_t out = w.shape[0];
  const std::size_t in = w.shape[1];
  Matrix dx(x.rows, in);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    const double* dyr = dy.row(r);
    double* dxr = dx.row(r);
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dyr[o];
      if (g == 0.0) continue;
      b.grad[o] += g;
      double* gw = w.grad.data() + o * in;
      const double* wo = w.value.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        gw[i] += g * xr[i];
        dxr[i] += g * wo[i];
      }
    }
  }
  return dx;
}

struct LayerNormCache {
  Matrix xhat;
  std::vector<double> inv_std;
};

Matrix layer_norm(const Matrix& x, const Param& gamma, const Param& beta,
                  LayerNormCache* cache) {
  Matrix y(x.rows, x.cols);
  if (cache != nullptr) {
    cache->xhat = Matrix(x.rows, x.cols);
    cache->inv_std.assign(x.rows, 0.0);
  }
  const double n = static_cast<double>(x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    double mean = 0.0;
    for (std::size_t c = 0; c < x.cols; ++c) mean += xr[c];
    mean /= n;
    double var = 0.0;
    for (std::size_t c = 0; c < x.cols; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= n;
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t c = 0; c < x.cols; ++c) {
      const double xh = (xr[c] - mean) * inv_std;
      y(r, c) = gamma.value[c] * xh + beta.value[c];
      if (cache != nullptr) cache->xhat(r, c) = xh;
    }
    if (cache != nullptr) cache->inv_std[r] = inv_std;
  }
  return y;
}

Matrix layer_norm_backward(const LayerNormCache& cache, Param& gamma, Param& beta,
                           const Matrix& dy) {
  const std::size_t cols = dy.cols;
  const double n = static_cast<double>(cols);
  Matrix dx(dy.rows, cols);
  std::vector<double> dxhat(cols);
  for (std::size_t r = 0; r < dy.rows; ++r) {
    double mean_d = 0.0;
    double mean_dx = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double xh = cache.xhat(r, c);
      gamma.grad[c] += dy(r, c) * xh;
      beta.grad[c] += dy(r, c);
      dxhat[c] = dy(r, c) * gamma.value[c];
      mean_d += dxhat[c];
      mean_dx += dxhat[c] * xh;
    }
    mean_d /= n;
    mean_dx /= n;
    for (std::size_t c = 0; c < cols; ++c) {
      dx(r, c) = cache.inv_std[r] * (dxhat[c] - mean_d - cache.xhat(r, c) * mean_dx);
    }
  }
  return dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Matrix apply_gelu(const Matrix& u) {
  Matrix g(u.rows, u.cols);
  for (std::size_t i = 0; i < u.data.size(); ++i) g.data[i] = gelu(u.data[i]);
  return g;
}

void add_into(Matrix& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

// ---- linear -------------------------------------------------------------------

class LinearDecoder final : public Decoder {
 public:
  explicit LinearDecoder(const DecoderSpec& spec) : Decoder(spec) {
    params_.push_back(make_param("head.weight", {spec.num_classes, spec.input_dim}));
    params_.push_back(make_param("head.bias", {spec.num_classes}));
  }

  Matrix forward(const Matrix& tokens, std::span<const std::uint8_t> mask) const override {
    check_input(tokens, mask);
    return affine(tokens, params_[0], params_[1]);
  }

  double accumulate_gradients(const Sequence& seq, double weight_norm) override {
    const Matrix logits = forward(seq.tokens, seq.mask);
    LossGrad lg = softmax_cross_entropy(logits, seq.targets, weight_norm);
    affine_backward(seq.tokens, params_[0], params_[1], lg.dlogits);
    return lg.loss;
  }

  std::unique_ptr<Decoder> clone() const override {
    return std::make_unique<LinearDecoder>(*this);
  }
};

// ---- MLP ------------------------------------------------------------------------

class MlpDecoder final : public Decoder {
 public:
  explicit MlpDecoder(const DecoderSpec& spec) : Decoder(spec) {
    params_.push_back(make_param("mlp.fc1.weight", {spec.hidden, spec.input_dim}));
    params_.push_back(make_param("mlp.fc1.bias", {spec.hidden}));
    params_.push_back(make_param("mlp.fc2.weight", {spec.num_classes, spec.hidden}));
    params_.push_back(make_param("mlp.fc2.bias", {spec.num_classes}));
  }

  Matrix forward(const Matrix& tokens, std::span<const std::uint8_t> mask) const override {
    check_input(tokens, mask);
    return affine(apply_gelu(affine(tokens, params_[0], params_[1])), params_[2], params_[3]);
  }

  double accumulate_gradients(const Sequence& seq, double weight_norm) override {
    check_input(seq.tokens, seq.mask);
    const Matrix u = affine(seq.tokens, params_[0], params_[1]);
    const Matrix g = apply_gelu(u);
    const Matrix logits = affine(g, params_[2], params_[3]);
    LossGrad lg = softmax_cross_entropy(logits, seq.targets, weight_norm);
    Matrix du = affine_backward(g, params_[2], params_[3], lg.dlogits);
    for (std::size_t i = 0; i < du.data.size(); ++i) du.data[i] *= gelu_grad(u.data[i]);
    affine_backward(seq.tokens, params_[0], params_[1], du);
    return lg.loss;
  }

  std::unique_ptr<Decoder> clone() const override {
    return std::make_unique<MlpDecoder>(*this);
  }
};

// ---- transformer ------------------------------------------------------------------

// Pre-LayerNorm encoder blocks (attention + 4x GELU MLP), final LayerNorm and
// a per-token linear head. Padded tokens are never used as keys, so real
// token outputs do not depend on padding content.
class TransformerDecoder final : public Decoder {
 public:
  explicit TransformerDecoder(const DecoderSpec& spec) : Decoder(spec) {
    const std::size_t d = spec.input_dim;
    for (std::size_t b = 0; b < spec.blocks; ++b) {
      const std::string p = "blocks." + std::to_string(b) + ".";
      params_.push_back(make_param(p + "ln1.gamma", {d}));
      params_.push_back(make_param(p + "ln1.beta", {d}));
      params_.push_back(make_param(p + "attn.q.weight", {d, d}));
      params_.push_back(make_param(p + "attn.q.bias", {d}));
      params_.push_back(make_param(p + "attn.k.weight", {d, d}));
      params_.push_back(make_param(p + "attn.k.bias", {d}));
      params_.push_back(make_param(p + "attn.v.weight", {d, d}));
      params_.push_back(make_param(p + "attn.v.bias", {d}));
      params_.push_back(make_param(p + "attn.out.weight", {d, d}));
      params_.push_back(make_param(p + "attn.out.bias", {d}));
      params_.push_back(make_param(p + "ln2.gamma", {d}));
      params_.push_back(make_param(p + "ln2.beta", {d}));
      params_.push_back(make_param(p + "mlp.fc1.weight", {4 * d, d}));
      params_.push_back(make_param(p + "mlp.fc1.bias", {4 * d}));
      params_.push_back(make_param(p + "mlp.fc2.weight", {d, 4 * d}));
      params_.push_back(make_param(p + "mlp.fc2.bias", {d}));
    }
    params_.push_back(make_param("final_ln.gamma", {d}));
    params_.push_back(make_param("final_ln.beta", {d}));
    params_.push_back(make_param("head.weight", {spec.num_classes, d}));
    params_.push_back(make_param("head.bias", {spec.num_classes}));
  }

  Matrix forward(const Matrix& tokens, std::span<const std::uint8_t> mask) const override {
    check_input(tokens, mask);
    return run_forward(tokens, mask, nullptr);
  }

  double accumulate_gradients(const Sequence& seq, double weight_norm) override {
    check_input(seq.tokens, seq.mask);
    Cache cache;
    const Matrix logits = run_forward(seq.tokens, seq.mask, &cache);
    LossGrad lg = softmax_cross_entropy(logits, seq.targets, weight_norm);
    run_backward(cache, seq.mask, lg.dlogits);
    return lg.loss;
  }

  std::unique_ptr<Decoder> clone() const override {
    return std::make_unique<TransformerDecoder>(*this);
  }

 private:
  enum Slot : std::size_t {
    kLn1Gamma, kLn1Beta, kWq, kBq, kWk, kBk, kWv, kBv, kWo, kBo,
    kLn2Gamma, kLn2Beta, kW1, kB1, kW2, kB2, kSlotsPerBlock
  };

  struct BlockCache {
    Matrix x_in;
    LayerNormCache ln1;
    Matrix h1, q, k, v, attended;
    std::vector<Matrix> probs;  // per head, T x T
    Matrix x_mid;
    LayerNormCache ln2;
    Matrix h2, u, g;
  };

  struct Cache {
    std::vector<BlockCache> blocks;
    Matrix x_final;
    LayerNormCache final_ln;
    Matrix h_final;
  };

  const Param& at(std::size_t block, Slot slot) const {
    return params_[block * kSlotsPerBlock + slot];
  }
  Param& at(std::size_t block, Slot slot) {
    return params_[block * kSlotsPerBlock + slot];
  }
  std::size_t tail() const { return spec_.blocks * kSlotsPerBlock; }

  static bool is_real(std::span<const std::uint8_t> mask, std::size_t i) {
    return mask.empty() || mask[i] != 0;
  }

  // Multi-head scaled dot-product attention over real keys.
  Matrix attend(const Matrix& q, const Matrix& k, const Matrix& v,
                std::span<const std::uint8_t> mask, std::vector<Matrix>* probs_out) const {
    const std::size_t t = q.rows;
    const std::size_t d = q.cols;
    const std::size_t heads = spec_.heads;
    const std::size_t dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Matrix out(t, d);
    if (probs_out != nullptr) probs_out->assign(heads, Matrix(t, t));
    std::vector<double> row(t);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      for (std::size_t i = 0; i < t; ++i) {
        double max_score = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < t; ++j) {
          if (!is_real(mask, j)) continue;
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += q(i, off + c) * k(j, off + c);
          row[j] = s * scale;
          max_score = std::max(max_score, row[j]);
        }
        if (max_score == -std::numeric_limits<double>::infinity()) continue;
        double denom = 0.0;
        for (std::size_t j = 0; j < t; ++j) {
          if (!is_real(mask, j)) continue;
          row[j] = std::exp(row[j] - max_score);
          denom += row[j];
        }
        for (std::size_t j = 0; j < t; ++j) {
          if (!is_real(mask, j)) continue;
          const double p = row[j] / denom;
          if (probs_out != nullptr) (*probs_out)[h](i, j) = p;
          for (std::size_t c = 0; c < dh; ++c) out(i, off + c) += p * v(j, off + c);
        }
      }
    }
    return out;
  }

  Matrix run_forward(const Matrix& tokens, std::span<const std::uint8_t> mask,
                     Cache* cache) const {
    Matrix x = tokens;
    if (cache != nullptr) cache->blocks.resize(spec_.blocks);
    for (std::size_t b = 0; b < spec_.blocks; ++b) {
      BlockCache local;
      BlockCache& bc = cache != nullptr ? cache->blocks[b] : local;
      bc.x_in = x;
      bc.h1 = layer_norm(x, at(b, kLn1Gamma), at(b, kLn1Beta), &bc.ln1);
      bc.q = affine(bc.h1, at(b, kWq), at(b, kBq));
      bc.k = affine(bc.h1, at(b, kWk), at(b, kBk));
      bc.v = affine(bc.h1, at(b, kWv), at(b, kBv));
      bc.attended = attend(bc.q, bc.k, bc.v, mask, cache != nullptr ? &bc.probs : nullptr);
      bc.x_mid = x;
      add_into(bc.x_mid, affine(bc.attended, at(b, kWo), at(b, kBo)));
      bc.h2 = layer_norm(bc.x_mid, at(b, kLn2Gamma), at(b, kLn2Beta), &bc.ln2);
      bc.u = affine(bc.h2, at(b, kW1), at(b, kB1));
      bc.g = apply_gelu(bc.u);
      x = bc.x_mid;
      add_into(x, affine(bc.g, at(b, kW2), at(b, kB2)));
    }
    LayerNormCache final_local;
    Matrix hf = layer_norm(x, params_[tail()], params_[tail() + 1],
                           cache != nullptr ? &cache->final_ln : &final_local);
    Matrix logits = affine(hf, params_[tail() + 2], params_[tail() + 3]);
    if (cache != nullptr) {
      cache->x_final = std::move(x);
      cache->h_final = std::move(hf);
    }
    return logits;
  }

  void attend_backward(const BlockCache& bc, std::span<const std::uint8_t> mask,
                       const Matrix& d_attended, Matrix& dq, Matrix& dk, Matrix& dv) const {
    const std::size_t t = bc.q.rows;
    const std::size_t d = bc.q.cols;
    const std::size_t dh = d / spec_.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    dq = Matrix(t, d);
    dk = Matrix(t, d);
    dv = Matrix(t, d);
    std::vector<double> dp(t);
    for (std::size_t h = 0; h < spec_.heads; ++h) {
      const std::size_t off = h * dh;
      const Matrix& p = bc.probs[h];
      for (std::size_t i = 0; i < t; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < t; ++j) {
          if (!is_real(mask, j)) continue;
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) {
            s += d_attended(i, off + c) * bc.v(j, off + c);
            dv(j, off + c) += p(i, j) * d_attended(i, off + c);
          }
          dp[j] = s;
          dot += p(i, j) * s;
        }
        for (std::size_t j = 0; j < t; ++j) {
          if (!is_real(mask, j)) continue;
          const double ds = p(i, j) * (dp[j] - dot) * scale;
          if (ds == 0.0) continue;
          for (std::size_t c = 0; c < dh; ++c) {
            dq(i, off + c) += ds * bc.k(j, off + c);
            dk(j, off + c) += ds * bc.q(i, off + c);
          }
        }
      }
    }
  }

  void run_backward(const Cache& cache, std::span<const std::uint8_t> mask,
                    const Matrix& dlogits) {
    Matrix dhf = affine_backward(cache.h_final, params_[tail() + 2], params_[tail() + 3], dlogits);
    Matrix dx = layer_norm_backward(cache.final_ln, params_[tail()], params_[tail() + 1], dhf);
    for (std::size_t b = spec_.blocks; b-- > 0;) {
      const BlockCache& bc = cache.blocks[b];
      // MLP residual branch.
      Matrix du = affine_backward(bc.g, at(b, kW2), at(b, kB2), dx);
      for (std::size_t i = 0; i < du.data.size(); ++i) du.data[i] *= gelu_grad(bc.u.data[i]);
      Matrix dh2 = affine_backward(bc.h2, at(b, kW1), at(b, kB1), du);
      Matrix dx_mid = dx;
      add_into(dx_mid, layer_norm_backward(bc.ln2, at(b, kLn2Gamma), at(b, kLn2Beta), dh2));
      // Attention residual branch.
      Matrix d_att = affine_backward(bc.attended, at(b, kWo), at(b, kBo), dx_mid);
      Matrix dq, dk, dv;
      attend_backward(bc, mask, d_att, dq, dk, dv);
      Matrix dh1 = affine_backward(bc.h1, at(b, kWq), at(b, kBq), dq);
      add_into(dh1, affine_backward(bc.h1, at(b, kWk), at(b, kBk), dk));
      add_into(dh1, affine_backward(bc.h1, at(b, kWv), at(b, kBv), dv));
      dx = std::move(dx_mid);
      add_into(dx, layer_norm_backward(bc.ln1, at(b, kLn1Gamma), at(b, kLn1Beta), dh1));
    }
  }
};

}  // namespace

std::unique_ptr<Decoder> make_decoder(const DecoderSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::unique_ptr<Decoder> decoder;
  switch (spec.kind) {
    case DecoderKind::kLinear: decoder = std::make_unique<LinearDecoder>(spec); break;
    case DecoderKind::kMlp: decoder = std::make_unique<MlpDecoder>(spec); break;
    case DecoderKind::kTransformer: decoder = std::make_unique<TransformerDecoder>(spec); break;
  }
  Rng rng(seed);
  for (Param* p : decoder->params()) {
    const bool is_gain = p->name.ends_with(".gamma");
    const bool is_weight = p->shape.size() == 2;
    for (double& v : p->value) {
      v = is_gain ? 1.0 : is_weight ? rng.truncated_normal(0.02) : 0.0;
    }
  }
  return decoder;
}

// ---- loss ---------------------------------------------------------------------

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows, logits.cols);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const double* z = logits.row(r);
    const double m = *std::max_element(z, z + logits.cols);
    double denom = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c) {
      out(r, c) = std::exp(z[c] - m);
      denom += out(r, c);
    }
    for (std::size_t c = 0; c < logits.cols; ++c) out(r, c) /= denom;
  }
  return out;
}

LossGrad softmax_cross_entropy(const Matrix& logits, std::span<const TokenTarget> targets,
                               double weight_norm) {
  if (targets.size() != logits.rows) {
    throw Error(ErrorCode::kInvalidArgument, "target count differs from token count");
  }
  LossGrad out{0.0, Matrix(logits.rows, logits.cols)};
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const TokenTarget& t = targets[r];
    if (t.label < 0 || t.weight == 0.0) continue;
    if (static_cast<std::size_t>(t.label) >= logits.cols) {
      throw Error(ErrorCode::kInvalidArgument, "target label " + std::to_string(t.label) +
                                                   " out of range");
    }
    const double* z = logits.row(r);
    const double m = *std::max_element(z, z + logits.cols);
    double denom = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c) denom += std::exp(z[c] - m);
    const double log_denom = std::log(denom);
    const double w = t.weight / weight_norm;
    out.loss += w * (log_denom - (z[t.label] - m));
    for (std::size_t c = 0; c < logits.cols; ++c) {
      const double p = std::exp(z[c] - m - log_denom);
      out.dlogits(r, c) = w * (p - (static_cast<std::int32_t>(c) == t.label ? 1.0 : 0.0));
    }
  }
  return out;
}

namespace {

double weight_of(const Sequence& s) {
  double w = 0.0;
  for (const TokenTarget& t : s.targets) {
    if (t.label >= 0) w += t.weight;
  }
  return w;
}

double batch_weight(std::span<const Sequence* const> batch) {
  double w = 0.0;
  for (const Sequence* s : batch) w += weight_of(*s);
  return w;
}

double loss_and_grads_ptr(Decoder& decoder, std::span<const Sequence* const> batch) {
  const double w = batch_weight(batch);
  if (batch.empty() || !(w > 0.0)) {
    throw Error(ErrorCode::kEmptyBatch, "batch carries no labelled tokens");
  }
  decoder.zero_grad();
  double loss = 0.0;
  for (const Sequence* s : batch) loss += decoder.accumulate_gradients(*s, w);
  return loss;
}

double evaluate_loss_ptr(const Decoder& decoder, std::span<const Sequence* const> batch) {
  const double w = batch_weight(batch);
  if (batch.empty() || !(w > 0.0)) {
    throw Error(ErrorCode::kEmptyBatch, "batch carries no labelled tokens");
  }
  double loss = 0.0;
  for (const Sequence* s : batch) {
    loss += softmax_cross_entropy(decoder.forward(s->tokens, s->mask), s->targets, w).loss;
  }
  return loss;
}

std::vector<const Sequence*> pointers(std::span<const Sequence> batch) {
  std::vector<const Sequence*> out;
  out.reserve(batch.size());
  for (const Sequence& s : batch) out.push_back(&s);
  return out;
}

}  // namespace

double total_weight(std::span<const Sequence> batch) {
  double w = 0.0;
  for (const Sequence& s : batch) w += weight_of(s);
  return w;
}

double loss_and_grads(Decoder& decoder, std::span<const Sequence> batch) {
  const auto ptrs = pointers(batch);
  return loss_and_grads_ptr(decoder, ptrs);
}

double evaluate_loss(const Decoder& decoder, std::span<const Sequence> batch) {
  const auto ptrs = pointers(batch);
  return evaluate_loss_ptr(decoder, ptrs);
}

// ---- training -------------------------------------------------------------------

void TrainConfig::validate() const {
  // lr == 0 is accepted (a no-op run); anything else must be positive.
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw Error(ErrorCode::kConfig, "learning rate must be finite and non-negative");
  }
  if (batch == 0) throw Error(ErrorCode::kConfig, "batch size must be positive");
  if (!(weight_decay >= 0.0)) throw Error(ErrorCode::kConfig, "weight decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
    throw Error(ErrorCode::kConfig, "invalid AdamW moments");
  }
  if (!(warmup_epochs >= 0.0)) throw Error(ErrorCode::kConfig, "warm-up must be >= 0");
}

TrainConfig TrainConfig::segmentation_linear() {
  TrainConfig c;
  c.lr = 5e-4;
  c.batch = 32;
  c.epochs = 20;
  return c;
}

TrainConfig TrainConfig::segmentation_mlp() {
  TrainConfig c;
  c.lr = 5e-4;
  c.batch = 32;
  c.epochs = 4;
  return c;
}

TrainConfig TrainConfig::segmentation_transformer() {
  TrainConfig c;
  c.lr = 1e-4;
  c.batch = 2;
  c.epochs = 4;
  return c;
}

TrainConfig TrainConfig::multi_view() {
  TrainConfig c;
  c.lr = 1e-5;
  c.batch = 1;
  c.epochs = 50;
  c.optimizer = OptimizerKind::kAdamW;
  c.weight_decay = 0.0;
  c.warmup_epochs = 5.0;
  return c;
}

TrainConfig TrainConfig::video() {
  TrainConfig c;
  c.lr = 1e-5;
  c.batch = 32;
  c.epochs = 40;
  c.optimizer = OptimizerKind::kAdamW;
  c.weight_decay = 0.0;
  c.warmup_epochs = 2.5;
  return c;
}

namespace {

class Optimizer {
 public:
  Optimizer(const TrainConfig& config, Decoder& decoder) : config_(config) {
    if (config.optimizer == OptimizerKind::kAdamW) {
      for (Param* p : decoder.params()) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
      }
    }
  }

  void step(Decoder& decoder, double lr) {
    ++t_;
    auto params = decoder.params();
    if (config_.optimizer == OptimizerKind::kSgd) {
      for (Param* p : params) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
          p->value[i] -= lr * (p->grad[i] + config_.weight_decay * p->value[i]);
        }
      }
      return;
    }
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Param& p = *params[k];
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i];
        m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
        v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
        const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
        p.value[i] -= lr * (update + config_.weight_decay * p.value[i]);
      }
    }
  }

 private:
  const TrainConfig& config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t t_ = 0;
};

std::vector<std::vector<double>> snapshot(const Decoder& decoder) {
  std::vector<std::vector<double>> out;
  for (const Param* p : decoder.params()) out.push_back(p->value);
  return out;
}

void restore(Decoder& decoder, const std::vector<std::vector<double>>& values) {
  auto params = decoder.params();
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = values[k];
}

}  // namespace

TrainResult train(Decoder& decoder, std::span<const Sequence> train_set,
                  std::span<const Sequence> val_set, const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw Error(ErrorCode::kEmptyBatch, "training set is empty");
  Rng rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t steps_per_epoch = (train_set.size() + config.batch - 1) / config.batch;
  const double warmup_steps = config.warmup_epochs * static_cast<double>(steps_per_epoch);
  Optimizer optimizer(config, decoder);
  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_params;
  std::size_t stale = 0;
  std::size_t step = 0;
  std::vector<const Sequence*> batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    double weight_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch); ++i) {
        batch.push_back(&train_set[order[i]]);
      }
      const double w = batch_weight(batch);
      if (!(w > 0.0)) continue;
      const double loss = loss_and_grads_ptr(decoder, batch);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::kDivergence,
                    "non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                        std::to_string(step) + " (lr " + std::to_string(config.lr) + ")");
      }
      loss_sum += loss * w;
      weight_sum += w;
      const double warm = warmup_steps > 0.0
                              ? std::min(1.0, static_cast<double>(step + 1) / warmup_steps)
                              : 1.0;
      optimizer.step(decoder, config.lr * warm);
      ++step;
    }
    result.train_loss.push_back(weight_sum > 0.0 ? loss_sum / weight_sum : 0.0);
    if (val_set.empty()) continue;
    const double val = evaluate_loss(decoder, val_set);
    if (!std::isfinite(val)) {
      throw Error(ErrorCode::kDivergence,
                  "non-finite validation loss at epoch " + std::to_string(epoch));
    }
    result.val_loss.push_back(val);
    if (val < best_val) {
      best_val = val;
      best_params = snapshot(decoder);
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.patience) {
      result.early_stopped = true;
      break;
    }
  }
  if (!best_params.empty()) restore(decoder, best_params);
  return result;
}

}  // namespace rbr
