#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vle2/kernels.hpp"
#include "vle2/rng.hpp"
#include "vle2/tensor.hpp"

namespace vle2 {

enum class MaskKind { Causal, Full };

template <class S>
struct ParamT {
  std::string name;
  TensorT<S> value;
  TensorT<S> grad;

  void init(std::string n, std::vector<int> shape) {
    name = std::move(n);
    value = TensorT<S>(shape);
    grad = TensorT<S>(shape);
  }
  void init_normal(std::string n, std::vector<int> shape, RngStream& rng, double stddev = 0.02) {
    init(std::move(n), std::move(shape));
    for (auto& x : value.data) x = static_cast<S>(rng.normal() * stddev);
  }
  void zero_grad() { grad.zero(); }
};

// ---------------------------------------------------------------------------
// embeddings

template <class S>
TensorT<S> embedding_lookup(const TensorT<S>& table, std::span<const int> ids) {
  const int V = table.rows();
  const int d = table.cols();
  TensorT<S> out({static_cast<int>(ids.size()), d});
  for (size_t t = 0; t < ids.size(); ++t) {
    const int id = ids[t];
    if (id < 0 || id >= V)
      throw std::runtime_error("embedding_lookup: id " + std::to_string(id) + " out of range [0," +
                               std::to_string(V) + ") at position " + std::to_string(t));
    const S* src = table.row_ptr(id);
    S* dst = out.row_ptr(static_cast<int>(t));
    for (int c = 0; c < d; ++c) dst[c] = src[c];
  }
  return out;
}

template <class S>
void embedding_lookup_bwd(TensorT<S>& dtable, std::span<const int> ids, const TensorT<S>& dy) {
  const int d = dtable.cols();
  for (size_t t = 0; t < ids.size(); ++t) {
    S* dst = dtable.row_ptr(ids[t]);
    const S* src = dy.row_ptr(static_cast<int>(t));
    for (int c = 0; c < d; ++c) dst[c] += src[c];
  }
}

// ---------------------------------------------------------------------------
// linear

template <class S>
struct LinearT {
  ParamT<S> w;  // [in x out]
  ParamT<S> b;  // [out]
  bool has_bias = true;

  void init(const std::string& prefix, int in, int out, RngStream& rng, bool bias = true) {
    has_bias = bias;
    w.init_normal(prefix + ".w", {in, out}, rng);
    if (bias) b.init(prefix + ".b", {out});
  }
  void params(std::vector<ParamT<S>*>& out) {
    out.push_back(&w);
    if (has_bias) out.push_back(&b);
  }

  void forward(const TensorT<S>& x, TensorT<S>& y) const {
    const int M = x.rows(), K = w.value.rows(), N = w.value.cols();
    y = TensorT<S>({M, N});
    kernels::matmul_nn(x.data.data(), w.value.data.data(),
                       has_bias ? b.value.data.data() : nullptr, y.data.data(), M, K, N);
  }

  // accumulates into w.grad / b.grad; dx overwritten unless accumulate_dx
  void backward(const TensorT<S>& x, const TensorT<S>& dy, TensorT<S>& dx, bool accumulate_dx) {
    const int M = x.rows(), K = w.value.rows(), N = w.value.cols();
    if (dx.shape != x.shape) dx = TensorT<S>(x.shape);
    kernels::matmul_nt(dy.data.data(), w.value.data.data(), dx.data.data(), M, N, K,
                       accumulate_dx);
    kernels::matmul_tn(x.data.data(), dy.data.data(), w.grad.data.data(), M, K, N, true);
    if (has_bias) {
      for (int c = 0; c < N; ++c) {
        double s = static_cast<double>(b.grad.data[c]);
        for (int i = 0; i < M; ++i) s += static_cast<double>(dy.at(i, c));
        b.grad.data[c] = static_cast<S>(s);
      }
    }
  }
};

// ---------------------------------------------------------------------------
// layer norm

template <class S>
struct LayerNormT {
  ParamT<S> gamma, beta;
  static constexpr double kEps = 1e-5;

  void init(const std::string& prefix, int d) {
    gamma.init(prefix + ".gamma", {d});
    beta.init(prefix + ".beta", {d});
    gamma.value.fill(S(1));
  }
  void params(std::vector<ParamT<S>*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }

  void forward(const TensorT<S>& x, TensorT<S>& y, std::vector<double>& mean,
               std::vector<double>& rstd) const {
    const int L = x.rows(), d = x.cols();
    y = TensorT<S>({L, d});
    mean.resize(L);
    rstd.resize(L);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < L; ++i) {
      const S* xi = x.row_ptr(i);
      double mu = 0.0;
      for (int c = 0; c < d; ++c) mu += static_cast<double>(xi[c]);
      mu /= d;
      double var = 0.0;
      for (int c = 0; c < d; ++c) {
        double t = static_cast<double>(xi[c]) - mu;
        var += t * t;
      }
      var /= d;
      const double rs = 1.0 / std::sqrt(var + kEps);
      mean[i] = mu;
      rstd[i] = rs;
      S* yi = y.row_ptr(i);
      for (int c = 0; c < d; ++c)
        yi[c] = static_cast<S>((static_cast<double>(xi[c]) - mu) * rs *
                                   static_cast<double>(gamma.value.data[c]) +
                               static_cast<double>(beta.value.data[c]));
    }
  }

  void backward(const TensorT<S>& x, const std::vector<double>& mean,
                const std::vector<double>& rstd, const TensorT<S>& dy, TensorT<S>& dx,
                bool accumulate_dx) {
    const int L = x.rows(), d = x.cols();
    if (dx.shape != x.shape) dx = TensorT<S>(x.shape);
    std::vector<double> dgamma(d, 0.0), dbeta(d, 0.0);
    for (int i = 0; i < L; ++i) {
      const S* xi = x.row_ptr(i);
      const S* dyi = dy.row_ptr(i);
      S* dxi = dx.row_ptr(i);
      const double mu = mean[i], rs = rstd[i];
      double m_dyh = 0.0, m_dyh_xh = 0.0;
      for (int c = 0; c < d; ++c) {
        const double xh = (static_cast<double>(xi[c]) - mu) * rs;
        const double dyh = static_cast<double>(dyi[c]) * static_cast<double>(gamma.value.data[c]);
        m_dyh += dyh;
        m_dyh_xh += dyh * xh;
        dgamma[c] += static_cast<double>(dyi[c]) * xh;
        dbeta[c] += static_cast<double>(dyi[c]);
      }
      m_dyh /= d;
      m_dyh_xh /= d;
      for (int c = 0; c < d; ++c) {
        const double xh = (static_cast<double>(xi[c]) - mu) * rs;
        const double dyh = static_cast<double>(dyi[c]) * static_cast<double>(gamma.value.data[c]);
        const double v = rs * (dyh - m_dyh - xh * m_dyh_xh);
        dxi[c] = accumulate_dx ? static_cast<S>(static_cast<double>(dxi[c]) + v)
                               : static_cast<S>(v);
      }
    }
    for (int c = 0; c < d; ++c) {
      gamma.grad.data[c] = static_cast<S>(static_cast<double>(gamma.grad.data[c]) + dgamma[c]);
      beta.grad.data[c] = static_cast<S>(static_cast<double>(beta.grad.data[c]) + dbeta[c]);
    }
  }
};

// ---------------------------------------------------------------------------
// gelu (exact erf form)

inline double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }
inline double gelu_grad_scalar(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) * 0.3989422804014327;
  return cdf + x * pdf;
}

template <class S>
void gelu_fwd(const TensorT<S>& x, TensorT<S>& y) {
  y = TensorT<S>(x.shape);
  const size_t n = x.numel();
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    y.data[i] = static_cast<S>(gelu_scalar(static_cast<double>(x.data[i])));
}

template <class S>
void gelu_bwd(const TensorT<S>& x, const TensorT<S>& dy, TensorT<S>& dx) {
  dx = TensorT<S>(x.shape);
  const size_t n = x.numel();
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    dx.data[i] = static_cast<S>(gelu_grad_scalar(static_cast<double>(x.data[i])) *
                                static_cast<double>(dy.data[i]));
}

// ---------------------------------------------------------------------------
// transformer block (pre-norm, MHA + GELU feed-forward of width 4d)

template <class S>
struct BlockCache {
  TensorT<S> x, ln1_out, q, k, v, probs, ctx, attn_out, h, ln2_out, ff_pre, ff_act;
  std::vector<double> ln1_mean, ln1_rstd, ln2_mean, ln2_rstd;
};

template <class S>
struct TransformerBlockT {
  LayerNormT<S> ln1, ln2;
  LinearT<S> wq, wk, wv, wo, ff1, ff2;
  int d = 0, heads = 0;

  void init(const std::string& prefix, int dim, int n_heads, RngStream& rng) {
    d = dim;
    heads = n_heads;
    if (d % heads != 0) throw std::invalid_argument("transformer_block: d not divisible by heads");
    ln1.init(prefix + ".ln1", d);
    ln2.init(prefix + ".ln2", d);
    wq.init(prefix + ".wq", d, d, rng);
    wk.init(prefix + ".wk", d, d, rng);
    wv.init(prefix + ".wv", d, d, rng);
    wo.init(prefix + ".wo", d, d, rng);
    ff1.init(prefix + ".ff1", d, 4 * d, rng);
    ff2.init(prefix + ".ff2", 4 * d, d, rng);
  }

  void params(std::vector<ParamT<S>*>& out) {
    ln1.params(out);
    wq.params(out);
    wk.params(out);
    wv.params(out);
    wo.params(out);
    ln2.params(out);
    ff1.params(out);
    ff2.params(out);
  }

  TensorT<S> forward(const TensorT<S>& x, MaskKind mask, BlockCache<S>& c) const {
    require_finite(x, "transformer_block input");
    const int L = x.rows();
    const int dk = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    c.x = x;
    ln1.forward(x, c.ln1_out, c.ln1_mean, c.ln1_rstd);
    wq.forward(c.ln1_out, c.q);
    wk.forward(c.ln1_out, c.k);
    wv.forward(c.ln1_out, c.v);

    c.probs = TensorT<S>({heads * L, L});
    c.ctx = TensorT<S>({L, d});
#pragma omp parallel for collapse(2) schedule(static)
    for (int h = 0; h < heads; ++h) {
      for (int i = 0; i < L; ++i) {
        const int row = h * L + i;
        const int jmax = (mask == MaskKind::Causal) ? i + 1 : L;
        const S* qi = c.q.row_ptr(i) + h * dk;
        std::vector<double> s(jmax);
        double mx = -1e300;
        for (int j = 0; j < jmax; ++j) {
          const S* kj = c.k.row_ptr(j) + h * dk;
          double dot = 0.0;
          for (int t = 0; t < dk; ++t)
            dot += static_cast<double>(qi[t]) * static_cast<double>(kj[t]);
          s[j] = dot * scale;
          if (s[j] > mx) mx = s[j];
        }
        double z = 0.0;
        for (int j = 0; j < jmax; ++j) {
          s[j] = std::exp(s[j] - mx);
          z += s[j];
        }
        S* prow = c.probs.row_ptr(row);
        for (int j = 0; j < jmax; ++j) prow[j] = static_cast<S>(s[j] / z);
        S* ci = c.ctx.row_ptr(i) + h * dk;
        for (int t = 0; t < dk; ++t) {
          double acc = 0.0;
          for (int j = 0; j < jmax; ++j)
            acc += static_cast<double>(prow[j]) * static_cast<double>(c.v.at(j, h * dk + t));
          ci[t] = static_cast<S>(acc);
        }
      }
    }
    wo.forward(c.ctx, c.attn_out);

    c.h = TensorT<S>({L, d});
    for (size_t i = 0; i < c.h.numel(); ++i) c.h.data[i] = x.data[i] + c.attn_out.data[i];

    ln2.forward(c.h, c.ln2_out, c.ln2_mean, c.ln2_rstd);
    ff1.forward(c.ln2_out, c.ff_pre);
    TensorT<S> act;
    gelu_fwd(c.ff_pre, act);
    c.ff_act = act;
    TensorT<S> f;
    ff2.forward(c.ff_act, f);

    TensorT<S> y({L, d});
    for (size_t i = 0; i < y.numel(); ++i) y.data[i] = c.h.data[i] + f.data[i];
    require_finite(y, "transformer_block output");
    return y;
  }

  // returns dx; accumulates parameter grads
  TensorT<S> backward(const TensorT<S>& dy, MaskKind mask, const BlockCache<S>& c) {
    const int L = c.x.rows();
    const int dk = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

    // feed-forward branch: dy flows to both h (residual) and the ff path
    TensorT<S> d_act, d_pre, d_ln2;
    ff2.backward(c.ff_act, dy, d_act, false);
    gelu_bwd(c.ff_pre, d_act, d_pre);
    ff1.backward(c.ln2_out, d_pre, d_ln2, false);
    TensorT<S> dh = dy;  // residual part
    ln2.backward(c.h, c.ln2_mean, c.ln2_rstd, d_ln2, dh, true);

    // attention branch
    TensorT<S> d_ctx;
    wo.backward(c.ctx, dh, d_ctx, false);
    TensorT<S> dq({L, d}), dkk({L, d}), dv({L, d});
#pragma omp parallel for schedule(static)
    for (int h = 0; h < heads; ++h) {
      for (int i = 0; i < L; ++i) {
        const int row = h * L + i;
        const int jmax = (mask == MaskKind::Causal) ? i + 1 : L;
        const S* prow = c.probs.row_ptr(row);
        const S* dci = d_ctx.row_ptr(i) + h * dk;
        std::vector<double> dp(jmax);
        double dsum = 0.0;
        for (int j = 0; j < jmax; ++j) {
          const S* vj = c.v.row_ptr(j) + h * dk;
          double acc = 0.0;
          for (int t = 0; t < dk; ++t)
            acc += static_cast<double>(dci[t]) * static_cast<double>(vj[t]);
          dp[j] = acc;
          dsum += acc * static_cast<double>(prow[j]);
        }
        S* dqi = dq.row_ptr(i) + h * dk;
        const S* qi = c.q.row_ptr(i) + h * dk;
        for (int j = 0; j < jmax; ++j) {
          const double p = static_cast<double>(prow[j]);
          const double ds = p * (dp[j] - dsum) * scale;
          const S* kj = c.k.row_ptr(j) + h * dk;
          S* dkj = dkk.row_ptr(j) + h * dk;
          S* dvj = dv.row_ptr(j) + h * dk;
          for (int t = 0; t < dk; ++t) {
            dqi[t] = static_cast<S>(static_cast<double>(dqi[t]) + ds * static_cast<double>(kj[t]));
            dkj[t] = static_cast<S>(static_cast<double>(dkj[t]) + ds * static_cast<double>(qi[t]));
            dvj[t] = static_cast<S>(static_cast<double>(dvj[t]) +
                                    p * static_cast<double>(dci[t]));
          }
        }
      }
    }
    TensorT<S> d_ln1;
    wq.backward(c.ln1_out, dq, d_ln1, false);
    wk.backward(c.ln1_out, dkk, d_ln1, true);
    wv.backward(c.ln1_out, dv, d_ln1, true);

    TensorT<S> dx = dh;  // residual into x
    ln1.backward(c.x, c.ln1_mean, c.ln1_rstd, d_ln1, dx, true);
    return dx;
  }

  // Incremental decode step (causal): kcache/vcache hold rows for positions
  // [0, len); the new position's k/v rows are appended. Returns the block
  // output for the new position.
  void step(const S* x_row, TensorT<S>& kcache, TensorT<S>& vcache, int len, S* y_row) const {
    const int dk = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    // ln1
    std::vector<S> a(d), qr(d), kr(d), vr(d);
    layernorm_row(ln1, x_row, a.data());
    matvec(wq, a.data(), qr.data());
    matvec(wk, a.data(), kr.data());
    matvec(wv, a.data(), vr.data());
    for (int t = 0; t < d; ++t) {
      kcache.at(len, t) = kr[t];
      vcache.at(len, t) = vr[t];
    }
    const int jmax = len + 1;
    std::vector<S> ctx(d);
    std::vector<double> s(jmax);
    for (int h = 0; h < heads; ++h) {
      double mx = -1e300;
      for (int j = 0; j < jmax; ++j) {
        double dot = 0.0;
        for (int t = 0; t < dk; ++t)
          dot += static_cast<double>(qr[h * dk + t]) *
                 static_cast<double>(kcache.at(j, h * dk + t));
        s[j] = dot * scale;
        if (s[j] > mx) mx = s[j];
      }
      double z = 0.0;
      for (int j = 0; j < jmax; ++j) {
        s[j] = std::exp(s[j] - mx);
        z += s[j];
      }
      for (int t = 0; t < dk; ++t) {
        double acc = 0.0;
        for (int j = 0; j < jmax; ++j)
          acc += (s[j] / z) * static_cast<double>(vcache.at(j, h * dk + t));
        ctx[h * dk + t] = static_cast<S>(acc);
      }
    }
    std::vector<S> attn(d), h1(d), b(d), f1(4 * d), f2(d);
    matvec(wo, ctx.data(), attn.data());
    for (int t = 0; t < d; ++t) h1[t] = x_row[t] + attn[t];
    layernorm_row(ln2, h1.data(), b.data());
    matvec(ff1, b.data(), f1.data());
    for (int t = 0; t < 4 * d; ++t)
      f1[t] = static_cast<S>(gelu_scalar(static_cast<double>(f1[t])));
    matvec(ff2, f1.data(), f2.data());
    for (int t = 0; t < d; ++t) y_row[t] = h1[t] + f2[t];
  }

 private:
  static void layernorm_row(const LayerNormT<S>& ln, const S* x, S* y) {
    const int n = ln.gamma.value.cols();
    double mu = 0.0;
    for (int c = 0; c < n; ++c) mu += static_cast<double>(x[c]);
    mu /= n;
    double var = 0.0;
    for (int c = 0; c < n; ++c) {
      double t = static_cast<double>(x[c]) - mu;
      var += t * t;
    }
    var /= n;
    const double rs = 1.0 / std::sqrt(var + LayerNormT<S>::kEps);
    for (int c = 0; c < n; ++c)
      y[c] = static_cast<S>((static_cast<double>(x[c]) - mu) * rs *
                                static_cast<double>(ln.gamma.value.data[c]) +
                            static_cast<double>(ln.beta.value.data[c]));
  }
  static void matvec(const LinearT<S>& lin, const S* x, S* y) {
    const int K = lin.w.value.rows(), N = lin.w.value.cols();
    std::vector<double> acc(N, 0.0);
    if (lin.has_bias)
      for (int j = 0; j < N; ++j) acc[j] = static_cast<double>(lin.b.value.data[j]);
    for (int k = 0; k < K; ++k) {
      const double xk = static_cast<double>(x[k]);
      const S* w = lin.w.value.row_ptr(k);
      for (int j = 0; j < N; ++j) acc[j] += xk * static_cast<double>(w[j]);
    }
    for (int j = 0; j < N; ++j) y[j] = static_cast<S>(acc[j]);
  }
};

// ---------------------------------------------------------------------------
// block stack with final layer norm

template <class S>
struct StackCache {
  std::vector<BlockCache<S>> blocks;
  TensorT<S> pre_lnf;
  std::vector<double> lnf_mean, lnf_rstd;
};

template <class S>
struct TransformerStackT {
  std::vector<TransformerBlockT<S>> blocks;
  LayerNormT<S> ln_f;
  int d = 0;

  void init(const std::string& prefix, int dim, int n_blocks, int heads, RngStream& rng) {
    d = dim;
    blocks.resize(n_blocks);
    for (int i = 0; i < n_blocks; ++i)
      blocks[i].init(prefix + ".block" + std::to_string(i), dim, heads, rng);
    ln_f.init(prefix + ".ln_f", dim);
  }
  void params(std::vector<ParamT<S>*>& out) {
    for (auto& b : blocks) b.params(out);
    ln_f.params(out);
  }

  TensorT<S> forward(const TensorT<S>& x, MaskKind mask, StackCache<S>& c) const {
    c.blocks.resize(blocks.size());
    TensorT<S> h = x;
    for (size_t i = 0; i < blocks.size(); ++i) h = blocks[i].forward(h, mask, c.blocks[i]);
    c.pre_lnf = h;
    TensorT<S> out;
    ln_f.forward(h, out, c.lnf_mean, c.lnf_rstd);
    return out;
  }

  TensorT<S> backward(const TensorT<S>& dy, MaskKind mask, StackCache<S>& c) {
    TensorT<S> dh;
    ln_f.backward(c.pre_lnf, c.lnf_mean, c.lnf_rstd, dy, dh, false);
    for (int i = static_cast<int>(blocks.size()) - 1; i >= 0; --i)
      dh = blocks[i].backward(dh, mask, c.blocks[i]);
    return dh;
  }

  // Incremental causal step across all blocks + final norm.
  void step(const S* x_row, std::vector<TensorT<S>>& kcaches, std::vector<TensorT<S>>& vcaches,
            int len, S* out_row) const {
    std::vector<S> cur(x_row, x_row + d), nxt(d);
    for (size_t i = 0; i < blocks.size(); ++i) {
      blocks[i].step(cur.data(), kcaches[i], vcaches[i], len, nxt.data());
      cur = nxt;
    }
    // final layer norm on the new row
    const int n = d;
    double mu = 0.0;
    for (int c = 0; c < n; ++c) mu += static_cast<double>(cur[c]);
    mu /= n;
    double var = 0.0;
    for (int c = 0; c < n; ++c) {
      double t = static_cast<double>(cur[c]) - mu;
      var += t * t;
    }
    var /= n;
    const double rs = 1.0 / std::sqrt(var + LayerNormT<S>::kEps);
    for (int c = 0; c < n; ++c)
      out_row[c] = static_cast<S>((static_cast<double>(cur[c]) - mu) * rs *
                                      static_cast<double>(ln_f.gamma.value.data[c]) +
                                  static_cast<double>(ln_f.beta.value.data[c]));
  }
};

// ---------------------------------------------------------------------------
// cross entropy

// Mean over unmasked positions of -log softmax(logits)[target]. `weights`
// may be empty (all positions count) or hold one {0,1} entry per row.
template <class S>
double cross_entropy(const TensorT<S>& logits, std::span<const int> targets,
                     std::span<const int> weights = {}) {
  const int N = logits.rows(), V = logits.cols();
  if (static_cast<int>(targets.size()) != N)
    throw std::invalid_argument("cross_entropy: target count mismatch");
  require_finite(logits, "cross_entropy logits");
  double sum = 0.0;
  long long cnt = 0;
  for (int i = 0; i < N; ++i) {
    if (!weights.empty() && weights[i] == 0) continue;
    const int t = targets[i];
    if (t < 0 || t >= V)
      throw std::runtime_error("cross_entropy: target " + std::to_string(t) + " out of range");
    const S* l = logits.row_ptr(i);
    double mx = -1e300;
    for (int c = 0; c < V; ++c) mx = std::max(mx, static_cast<double>(l[c]));
    double z = 0.0;
    for (int c = 0; c < V; ++c) z += std::exp(static_cast<double>(l[c]) - mx);
    sum += (mx + std::log(z)) - static_cast<double>(l[t]);
    ++cnt;
  }
  if (cnt == 0) throw std::runtime_error("cross_entropy: empty loss (all positions masked)");
  return sum / static_cast<double>(cnt);
}

// Sum over rows; writes d(sum)/dlogits scaled by `scale` into dlogits.
template <class S>
double cross_entropy_sum_bwd(const TensorT<S>& logits, std::span<const int> targets,
                             TensorT<S>* dlogits, double scale = 1.0) {
  const int N = logits.rows(), V = logits.cols();
  if (dlogits && dlogits->shape != logits.shape) *dlogits = TensorT<S>(logits.shape);
  double sum = 0.0;
  for (int i = 0; i < N; ++i) {
    const S* l = logits.row_ptr(i);
    const int t = targets[i];
    double mx = -1e300;
    for (int c = 0; c < V; ++c) mx = std::max(mx, static_cast<double>(l[c]));
    double z = 0.0;
    for (int c = 0; c < V; ++c) z += std::exp(static_cast<double>(l[c]) - mx);
    sum += (mx + std::log(z)) - static_cast<double>(l[t]);
    if (dlogits) {
      S* dl = dlogits->row_ptr(i);
      for (int c = 0; c < V; ++c) {
        double p = std::exp(static_cast<double>(l[c]) - mx) / z;
        dl[c] = static_cast<S>((p - (c == t ? 1.0 : 0.0)) * scale);
      }
    }
  }
  return sum;
}

// Softmax of one logits row into a double distribution (sampling front-end).
template <class S>
std::vector<double> softmax_row(const S* logits, int V) {
  std::vector<double> p(V);
  double mx = -1e300;
  for (int c = 0; c < V; ++c) mx = std::max(mx, static_cast<double>(logits[c]));
  double z = 0.0;
  for (int c = 0; c < V; ++c) {
    p[c] = std::exp(static_cast<double>(logits[c]) - mx);
    z += p[c];
  }
  for (int c = 0; c < V; ++c) p[c] /= z;
  return p;
}

}  // namespace vle2
