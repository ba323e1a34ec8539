#pragma once

#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vle2/kernels.hpp"
#include "vle2/nn.hpp"
#include "vle2/rng.hpp"
#include "vle2/tensor.hpp"
#include "vle2/world.hpp"

namespace vle2 {

struct NARConfig {
  int text_vocab = 32;
  int code_vocab = 64;
  int quantizers = 8;
  int d = 128;
  int blocks = 4;
  int heads = 4;
  int max_text_pos = 32;
  int max_code_pos = 256;  // code frames plus trailing <eos> and code-ID rows

  int code_rows() const { return code_vocab + 1; }
};

/// Training-time condition length: a random draw from {4..32} frames (the
/// desk-scale stand-in for 3s..30s) capped at half the utterance, never
/// below one frame.
inline int split_condition_length(int frames, RngStream& rng) {
  if (frames < 2) throw std::invalid_argument("split_condition_length: need at least 2 frames");
  const int drawn = rng.uniform_int(4, 32);
  return std::max(1, std::min(drawn, frames / 2));
}

template <class S>
struct NARAsmCache {
  std::vector<int> text;
  const CodeMatrix* codes = nullptr;
  int cond_len = 0;
  int code_id = 0;
};

/// Non-autoregressive model over quantizers 1..7. One embedding table holds
/// a distinct (V_c+1) x d block per quantizer; prediction for quantizer j is
/// tied to block j.
template <class S>
struct NARModelT {
  NARConfig cfg;
  ParamT<S> wx;        // [(V_x+1) x d]
  ParamT<S> wc;        // [8*(V_c+1) x d]
  ParamT<S> wid;       // [8 x d]
  ParamT<S> e_eos;     // [1 x d]
  ParamT<S> pos_text;  // [max_text_pos x d]
  ParamT<S> pos_code;  // [max_code_pos x d]
  TransformerStackT<S> stack;

  void init(const NARConfig& c, uint64_t seed) {
    cfg = c;
    if (cfg.quantizers != 8) throw std::invalid_argument("nar: quantizers must be 8");
    RngStream rng(seed, 0x4e41522d696e6974ull);
    wx.init_normal("wx", {cfg.text_vocab + 1, cfg.d}, rng);
    wc.init_normal("wc", {cfg.quantizers * cfg.code_rows(), cfg.d}, rng);
    wid.init_normal("wid", {cfg.quantizers, cfg.d}, rng);
    e_eos.init_normal("e_eos", {1, cfg.d}, rng);
    pos_text.init_normal("pos_text", {cfg.max_text_pos, cfg.d}, rng);
    pos_code.init_normal("pos_code", {cfg.max_code_pos, cfg.d}, rng);
    stack.init("stack", cfg.d, cfg.blocks, cfg.heads, rng);
  }

  std::vector<ParamT<S>*> params() {
    std::vector<ParamT<S>*> out{&wx, &wc, &wid, &e_eos, &pos_text, &pos_code};
    stack.params(out);
    return out;
  }
  void zero_grads() {
    for (auto* p : params()) p->zero_grad();
  }

  const S* block_row(int quantizer, int code) const {
    return wc.value.row_ptr(quantizer * cfg.code_rows() + code);
  }

  // E^x || [e_eos] || E^c || [e_eos] || [wid[j]]; the frame embedding sums
  // all 8 quantizer blocks in the condition region and the first j blocks in
  // the target region.
  TensorT<S> assemble_input(std::span<const int> text, const CodeMatrix& codes, int cond_len,
                            int code_id, NARAsmCache<S>* cache = nullptr) const {
    const int d = cfg.d;
    if (code_id < 1 || code_id >= cfg.quantizers)
      throw std::invalid_argument("assemble_nar_input: code id " + std::to_string(code_id) +
                                  " out of range [1,7]");
    if (cond_len < 0 || cond_len > codes.frames)
      throw std::invalid_argument("assemble_nar_input: bad condition length");
    const int L = static_cast<int>(text.size());
    const int T = codes.frames;
    if (L + 1 > cfg.max_text_pos)
      throw std::invalid_argument("assemble_nar_input: text longer than position table");
    if (T + 2 > cfg.max_code_pos)
      throw std::invalid_argument("assemble_nar_input: code span longer than position table");

    TensorT<S> input({L + T + 3, d});
    for (int l = 0; l < L; ++l) {
      const int id = text[l];
      if (id < 0 || id > cfg.text_vocab)
        throw std::runtime_error("assemble_nar_input: text token " + std::to_string(id) +
                                 " out of range at position " + std::to_string(l));
      S* row = input.row_ptr(l);
      const S* e = wx.value.row_ptr(id);
      const S* p = pos_text.value.row_ptr(l);
      for (int c = 0; c < d; ++c) row[c] = e[c] + p[c];
    }
    {
      S* row = input.row_ptr(L);
      for (int c = 0; c < d; ++c) row[c] = e_eos.value.data[c] + pos_text.value.at(L, c);
    }
#pragma omp parallel for schedule(static)
    for (int t = 0; t < T; ++t) {
      S* row = input.row_ptr(L + 1 + t);
      const S* p = pos_code.value.row_ptr(t);
      for (int c = 0; c < d; ++c) row[c] = p[c];
      const int kmax = t < cond_len ? cfg.quantizers : code_id;
      for (int k = 0; k < kmax; ++k) {
        const int code = codes.at(t, k);
        if (code < 0 || code >= cfg.code_rows())
          throw std::runtime_error("assemble_nar_input: code out of range at frame " +
                                   std::to_string(t));
        const S* e = block_row(k, code);
        for (int c = 0; c < d; ++c) row[c] += e[c];
      }
    }
    {
      S* row = input.row_ptr(L + 1 + T);
      for (int c = 0; c < d; ++c) row[c] = e_eos.value.data[c] + pos_code.value.at(T, c);
      row = input.row_ptr(L + 2 + T);
      const S* id = wid.value.row_ptr(code_id);
      for (int c = 0; c < d; ++c) row[c] = id[c] + pos_code.value.at(T + 1, c);
    }
    if (cache) {
      cache->text.assign(text.begin(), text.end());
      cache->codes = &codes;
      cache->cond_len = cond_len;
      cache->code_id = code_id;
    }
    return input;
  }

  // Sum of per-frame CE over the target region [cond_len, T) for quantizer
  // `code_id`. `targets` holds one value per frame; only the target region is
  // read. Gradients (scaled) accumulate when with_grads.
  double sample_loss(std::span<const int> text, const CodeMatrix& codes, int cond_len,
                     int code_id, std::span<const int> targets, bool with_grads, double scale) {
    const int d = cfg.d, V = cfg.code_rows();
    const int L = static_cast<int>(text.size());
    const int T = codes.frames;
    const int n = T - cond_len;
    if (n <= 0) throw std::invalid_argument("nar_loss: empty target region");

    NARAsmCache<S> ac;
    TensorT<S> input = assemble_input(text, codes, cond_len, code_id, &ac);
    StackCache<S> sc;
    TensorT<S> hidden = stack.forward(input, MaskKind::Full, sc);

    TensorT<S> pred({n, d});
    for (int t = 0; t < n; ++t) {
      const S* src = hidden.row_ptr(L + 1 + cond_len + t);
      S* dst = pred.row_ptr(t);
      for (int c = 0; c < d; ++c) dst[c] = src[c];
    }
    TensorT<S> logits({n, V});
    kernels::matmul_nt(pred.data.data(), block_row(code_id, 0), logits.data.data(), n, d, V);
    std::vector<int> tg(targets.begin() + cond_len, targets.end());

    TensorT<S> dlogits;
    const double loss =
        scale * cross_entropy_sum_bwd(logits, tg, with_grads ? &dlogits : nullptr, scale);
    if (!with_grads) return loss;

    S* block_grad = wc.grad.row_ptr(code_id * V);
    kernels::matmul_tn(dlogits.data.data(), pred.data.data(), block_grad, n, V, d, true);
    TensorT<S> dpred({n, d});
    kernels::matmul_nn<S>(dlogits.data.data(), block_row(code_id, 0), nullptr, dpred.data.data(), n,
                       V, d);
    TensorT<S> dhidden(hidden.shape);
    for (int t = 0; t < n; ++t) {
      const S* src = dpred.row_ptr(t);
      S* dst = dhidden.row_ptr(L + 1 + cond_len + t);
      for (int c = 0; c < d; ++c) dst[c] = src[c];
    }
    TensorT<S> dinput = stack.backward(dhidden, MaskKind::Full, sc);
    scatter_input_grads(ac, dinput);
    return loss;
  }

  void scatter_input_grads(const NARAsmCache<S>& ac, const TensorT<S>& dinput) {
    const int d = cfg.d;
    const int L = static_cast<int>(ac.text.size());
    const int T = ac.codes->frames;
    for (int l = 0; l < L; ++l) {
      const S* g = dinput.row_ptr(l);
      S* de = wx.grad.row_ptr(ac.text[l]);
      S* dp = pos_text.grad.row_ptr(l);
      for (int c = 0; c < d; ++c) {
        de[c] += g[c];
        dp[c] += g[c];
      }
    }
    {
      const S* g = dinput.row_ptr(L);
      for (int c = 0; c < d; ++c) {
        e_eos.grad.data[c] += g[c];
        pos_text.grad.at(L, c) += g[c];
      }
    }
    for (int t = 0; t < T; ++t) {
      const S* g = dinput.row_ptr(L + 1 + t);
      S* dp = pos_code.grad.row_ptr(t);
      for (int c = 0; c < d; ++c) dp[c] += g[c];
      const int kmax = t < ac.cond_len ? cfg.quantizers : ac.code_id;
      for (int k = 0; k < kmax; ++k) {
        S* de = wc.grad.row_ptr(k * cfg.code_rows() + ac.codes->at(t, k));
        for (int c = 0; c < d; ++c) de[c] += g[c];
      }
    }
    {
      const S* g = dinput.row_ptr(L + 1 + T);
      for (int c = 0; c < d; ++c) {
        e_eos.grad.data[c] += g[c];
        pos_code.grad.at(T, c) += g[c];
      }
      const S* g2 = dinput.row_ptr(L + 2 + T);
      S* did = wid.grad.row_ptr(ac.code_id);
      for (int c = 0; c < d; ++c) {
        did[c] += g2[c];
        pos_code.grad.at(T + 1, c) += g2[c];
      }
    }
  }

  struct DrawnSplit {
    int cond_len;
    int code_id;
  };
  DrawnSplit draw_split(int frames, RngStream& rng) const {
    DrawnSplit s;
    s.cond_len = split_condition_length(frames, rng);
    s.code_id = rng.uniform_int(1, cfg.quantizers - 1);
    return s;
  }

  // Per sample: random condition length and random quantizer j in [1,7];
  // flat mean over all target positions in the batch.
  double loss(const std::vector<Utterance>& batch, RngStream& rng, bool with_grads) {
    if (batch.empty()) throw std::invalid_argument("nar_loss: empty batch");
    std::vector<DrawnSplit> splits(batch.size());
    long long total_positions = 0;
    for (size_t b = 0; b < batch.size(); ++b) {
      if (batch[b].codes.frames < 2) {
        std::fprintf(stderr, "nar_loss: skipping %zu-frame sample (needs >= 2 frames)\n",
                     static_cast<size_t>(batch[b].codes.frames));
        splits[b] = {-1, -1};
        continue;
      }
      splits[b] = draw_split(batch[b].codes.frames, rng);
      total_positions += batch[b].codes.frames - splits[b].cond_len;
    }
    if (total_positions == 0) throw std::runtime_error("nar_loss: empty loss (no usable samples)");
    const double scale = 1.0 / static_cast<double>(total_positions);
    double total = 0.0;
    for (size_t b = 0; b < batch.size(); ++b) {
      if (splits[b].cond_len < 0) continue;
      const auto& u = batch[b];
      std::vector<int> targets(u.codes.frames);
      for (int t = 0; t < u.codes.frames; ++t) targets[t] = u.codes.at(t, splits[b].code_id);
      total += sample_loss(u.text, u.codes, splits[b].cond_len, splits[b].code_id, targets,
                           with_grads, scale);
    }
    return total;
  }

  // Seven greedy passes, one per quantizer, each conditioning on all prompt
  // rows and the previously filled target rows. Ties break to the lowest
  // code index; EOS is never emitted.
  CodeMatrix greedy_infer(std::span<const int> text, const CodeMatrix& prompt,
                          std::span<const int> c0_target) const {
    if (prompt.quantizers != cfg.quantizers)
      throw std::invalid_argument("nar_greedy_infer: prompt must carry all quantizer rows");
    const int Tp = prompt.frames;
    const int n = static_cast<int>(c0_target.size());
    CodeMatrix full(Tp + n, cfg.quantizers);
    for (int t = 0; t < Tp; ++t)
      for (int j = 0; j < cfg.quantizers; ++j) full.at(t, j) = prompt.at(t, j);
    for (int t = 0; t < n; ++t) full.at(Tp + t, 0) = c0_target[t];
    if (n == 0) return full;

    const int d = cfg.d, V = cfg.code_rows();
    const int L = static_cast<int>(text.size());
    for (int j = 1; j < cfg.quantizers; ++j) {
      TensorT<S> input = assemble_input(text, full, Tp, j);
      StackCache<S> sc;
      TensorT<S> hidden = stack.forward(input, MaskKind::Full, sc);
      TensorT<S> pred({n, d});
      for (int t = 0; t < n; ++t) {
        const S* src = hidden.row_ptr(L + 1 + Tp + t);
        S* dst = pred.row_ptr(t);
        for (int c = 0; c < d; ++c) dst[c] = src[c];
      }
      TensorT<S> logits({n, V});
      kernels::matmul_nt(pred.data.data(), block_row(j, 0), logits.data.data(), n, d, V);
      for (int t = 0; t < n; ++t) {
        const S* l = logits.row_ptr(t);
        int best = 0;
        for (int c = 1; c < cfg.code_vocab; ++c)  // real codes only, lowest index wins ties
          if (static_cast<double>(l[c]) > static_cast<double>(l[best])) best = c;
        full.at(Tp + t, j) = best;
      }
    }
    return full;
  }
};

using NARModel = NARModelT<float>;

}  // namespace vle2
