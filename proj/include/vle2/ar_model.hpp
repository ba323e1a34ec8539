#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vle2/grouping.hpp"
#include "vle2/kernels.hpp"
#include "vle2/nn.hpp"
#include "vle2/rng.hpp"
#include "vle2/sampler.hpp"
#include "vle2/tensor.hpp"

namespace vle2 {

struct ARConfig {
  int text_vocab = 32;  // embedding table gets one extra GARBAGE row
  int code_vocab = 64;  // embedding table gets one extra EOS row, shared with prediction
  int group_size = 1;
  int d = 128;
  int blocks = 4;
  int heads = 4;
  int max_text_pos = 32;   // text span incl. trailing <eos>
  int max_code_pos = 256;  // code span: <bos> followed by groups

  int code_rows() const { return code_vocab + 1; }
  int eos_code() const { return code_vocab; }
};

template <class S>
struct ARAsmCache {
  std::vector<int> text;
  std::vector<int> in_codes;  // flattened input groups
  TensorT<S> concat;          // [n_in x G*d] concatenated code embeddings
};

struct ARSample {
  std::vector<int> text;
  std::vector<int> c0;  // raw first-quantizer codes; clipped to a group multiple here
};

struct ARGenerateResult {
  std::vector<int> codes;  // generated first-quantizer codes, prompt and EOS excluded
  bool hit_cutoff = false;
  long long steps = 0;  // AR forward passes consumed (one per sampled group)
};

/// Grouped autoregressive codec language model. The prediction layer is the
/// tied transpose of the code embedding table; a group prediction projection
/// (d -> G*d) fans one hidden state out to G parallel code distributions.
template <class S>
struct ARModelT {
  ARConfig cfg;
  ParamT<S> wx;       // [(V_x+1) x d]
  ParamT<S> wc;       // [(V_c+1) x d], tied embedding / prediction
  ParamT<S> wg;       // [G*d x d] group embedding projection
  ParamT<S> wgp;      // [d x G*d] group prediction projection
  ParamT<S> e_eos;    // [1 x d]
  ParamT<S> e_bos;    // [1 x d]
  ParamT<S> pos_text; // [max_text_pos x d]
  ParamT<S> pos_code; // [max_code_pos x d]
  TransformerStackT<S> stack;

  void init(const ARConfig& c, uint64_t seed) {
    cfg = c;
    if (!valid_group_size(cfg.group_size))
      throw std::invalid_argument("ar: group size must be one of {1,2,4,8}");
    RngStream rng(seed, 0x41522d696e6974ull);
    wx.init_normal("wx", {cfg.text_vocab + 1, cfg.d}, rng);
    wc.init_normal("wc", {cfg.code_rows(), cfg.d}, rng);
    wg.init_normal("wg", {cfg.group_size * cfg.d, cfg.d}, rng);
    wgp.init_normal("wgp", {cfg.d, cfg.group_size * cfg.d}, rng);
    e_eos.init_normal("e_eos", {1, cfg.d}, rng);
    e_bos.init_normal("e_bos", {1, cfg.d}, rng);
    pos_text.init_normal("pos_text", {cfg.max_text_pos, cfg.d}, rng);
    pos_code.init_normal("pos_code", {cfg.max_code_pos, cfg.d}, rng);
    stack.init("stack", cfg.d, cfg.blocks, cfg.heads, rng);
  }

  std::vector<ParamT<S>*> params() {
    std::vector<ParamT<S>*> out{&wx, &wc, &wg, &wgp, &e_eos, &e_bos, &pos_text, &pos_code};
    stack.params(out);
    return out;
  }
  void zero_grads() {
    for (auto* p : params()) p->zero_grad();
  }

  // E^x || [e_eos, e_bos] || E^g, with the text position table over the text
  // span (restarting at 0, <eos> included) and the code position table over
  // the code span (<bos> at 0, group g at 1+g).
  TensorT<S> assemble_input(std::span<const int> text, std::span<const int> c0,
                            ARAsmCache<S>* cache = nullptr) const {
    const int G = cfg.group_size, d = cfg.d;
    if (static_cast<int>(c0.size()) % G != 0)
      throw std::invalid_argument("assemble_ar_input: code length " +
                                  std::to_string(c0.size()) + " not divisible by group size " +
                                  std::to_string(G));
    const int L = static_cast<int>(text.size());
    const int n_in = static_cast<int>(c0.size()) / G;
    if (L + 1 > cfg.max_text_pos)
      throw std::invalid_argument("assemble_ar_input: text longer than position table");
    if (n_in + 1 > cfg.max_code_pos)
      throw std::invalid_argument("assemble_ar_input: code span longer than position table");

    TensorT<S> input({L + 2 + n_in, d});
    for (int l = 0; l < L; ++l) {
      const int id = text[l];
      if (id < 0 || id > cfg.text_vocab)
        throw std::runtime_error("assemble_ar_input: text token " + std::to_string(id) +
                                 " out of range at position " + std::to_string(l));
      S* row = input.row_ptr(l);
      const S* e = wx.value.row_ptr(id);
      const S* p = pos_text.value.row_ptr(l);
      for (int c = 0; c < d; ++c) row[c] = e[c] + p[c];
    }
    {
      S* row = input.row_ptr(L);
      for (int c = 0; c < d; ++c) row[c] = e_eos.value.data[c] + pos_text.value.at(L, c);
      row = input.row_ptr(L + 1);
      for (int c = 0; c < d; ++c) row[c] = e_bos.value.data[c] + pos_code.value.at(0, c);
    }
    TensorT<S> concat({n_in, G * d});
    for (int g = 0; g < n_in; ++g) {
      S* crow = concat.row_ptr(g);
      for (int s = 0; s < G; ++s) {
        const int code = c0[static_cast<size_t>(g) * G + s];
        if (code < 0 || code >= cfg.code_rows())
          throw std::runtime_error("assemble_ar_input: code " + std::to_string(code) +
                                   " out of range");
        const S* e = wc.value.row_ptr(code);
        for (int c = 0; c < d; ++c) crow[s * d + c] = e[c];
      }
    }
    if (n_in > 0)
      kernels::matmul_nn<S>(concat.data.data(), wg.value.data.data(), nullptr,
                         input.row_ptr(L + 2), n_in, G * d, d);
    for (int g = 0; g < n_in; ++g) {
      S* row = input.row_ptr(L + 2 + g);
      const S* p = pos_code.value.row_ptr(1 + g);
      for (int c = 0; c < d; ++c) row[c] += p[c];
    }
    if (cache) {
      cache->text.assign(text.begin(), text.end());
      cache->in_codes.assign(c0.begin(), c0.end());
      cache->concat = std::move(concat);
    }
    return input;
  }

  TensorT<S> forward_hidden(const TensorT<S>& input, StackCache<S>& sc) const {
    return stack.forward(input, MaskKind::Causal, sc);
  }

  // One hidden state -> G logit vectors over V_c+1 (tied to wc).
  TensorT<S> group_logits(const S* hidden_row) const {
    const int G = cfg.group_size, d = cfg.d, V = cfg.code_rows();
    TensorT<S> u({1, G * d});
    kernels::matmul_nn<S>(hidden_row, wgp.value.data.data(), nullptr, u.data.data(), 1, d, G * d);
    TensorT<S> logits({G, V});
    kernels::matmul_nt(u.data.data(), wc.value.data.data(), logits.data.data(), G, d, V);
    return logits;
  }

  // Teacher-forced targets: clip c0 to a group multiple, append one EOS and
  // pad to the group boundary (a whole EOS group). The <bos> hidden predicts
  // group 0; the last input group's hidden predicts the EOS group.
  static std::vector<int> grouped_targets(std::span<const int> c0_clipped, int G, int eos) {
    std::vector<int> t(c0_clipped.begin(), c0_clipped.end());
    t.resize(t.size() + G, eos);
    return t;
  }

  double loss(const std::vector<ARSample>& batch, bool with_grads) {
    if (batch.empty()) throw std::invalid_argument("ar_loss: empty batch");
    const int G = cfg.group_size, d = cfg.d, V = cfg.code_rows();
    long long total_positions = 0;
    std::vector<std::vector<int>> clipped(batch.size());
    for (size_t b = 0; b < batch.size(); ++b) {
      const auto& c0 = batch[b].c0;
      const int clip = static_cast<int>(c0.size()) % G;
      clipped[b].assign(c0.begin() + clip, c0.end());
      total_positions += static_cast<long long>(clipped[b].size()) + G;
    }
    const double scale = 1.0 / static_cast<double>(total_positions);
    double total = 0.0;
    for (size_t b = 0; b < batch.size(); ++b) {
      const auto& text = batch[b].text;
      const int L = static_cast<int>(text.size());
      const std::vector<int> targets = grouped_targets(clipped[b], G, cfg.eos_code());
      const int n_pred = static_cast<int>(targets.size()) / G;
      const int n_in = n_pred - 1;
      std::span<const int> in_codes(clipped[b].data(), static_cast<size_t>(n_in) * G);

      ARAsmCache<S> ac;
      TensorT<S> input = assemble_input(text, in_codes, &ac);
      StackCache<S> sc;
      TensorT<S> hidden = stack.forward(input, MaskKind::Causal, sc);

      TensorT<S> pred({n_pred, d});
      for (int t = 0; t < n_pred; ++t) {
        const S* src = hidden.row_ptr(L + 1 + t);
        S* dst = pred.row_ptr(t);
        for (int c = 0; c < d; ++c) dst[c] = src[c];
      }
      TensorT<S> slices({n_pred * G, d});  // u reinterpreted: row p*G+s
      kernels::matmul_nn<S>(pred.data.data(), wgp.value.data.data(), nullptr, slices.data.data(),
                         n_pred, d, G * d);
      TensorT<S> logits({n_pred * G, V});
      kernels::matmul_nt(slices.data.data(), wc.value.data.data(), logits.data.data(),
                         n_pred * G, d, V);

      TensorT<S> dlogits;
      total += cross_entropy_sum_bwd(logits, targets, with_grads ? &dlogits : nullptr, scale);
      if (!with_grads) continue;

      // tied prediction layer
      kernels::matmul_tn(dlogits.data.data(), slices.data.data(), wc.grad.data.data(),
                         n_pred * G, V, d, true);
      TensorT<S> dslices({n_pred * G, d});
      kernels::matmul_nn<S>(dlogits.data.data(), wc.value.data.data(), nullptr,
                         dslices.data.data(), n_pred * G, V, d);
      TensorT<S> dpred({n_pred, d});
      kernels::matmul_nt(dslices.data.data(), wgp.value.data.data(), dpred.data.data(), n_pred,
                         G * d, d);
      kernels::matmul_tn(pred.data.data(), dslices.data.data(), wgp.grad.data.data(), n_pred, d,
                         G * d, true);

      TensorT<S> dhidden(hidden.shape);
      for (int t = 0; t < n_pred; ++t) {
        const S* src = dpred.row_ptr(t);
        S* dst = dhidden.row_ptr(L + 1 + t);
        for (int c = 0; c < d; ++c) dst[c] = src[c];
      }
      TensorT<S> dinput = stack.backward(dhidden, MaskKind::Causal, sc);
      scatter_input_grads(ac, dinput);
    }
    return total * scale;  // mean over all code positions in the batch
  }

  void scatter_input_grads(const ARAsmCache<S>& ac, const TensorT<S>& dinput) {
    const int G = cfg.group_size, d = cfg.d;
    const int L = static_cast<int>(ac.text.size());
    const int n_in = static_cast<int>(ac.in_codes.size()) / G;
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
      const S* g2 = dinput.row_ptr(L + 1);
      for (int c = 0; c < d; ++c) {
        e_bos.grad.data[c] += g2[c];
        pos_code.grad.at(0, c) += g2[c];
      }
    }
    if (n_in == 0) return;
    for (int g = 0; g < n_in; ++g) {
      const S* gr = dinput.row_ptr(L + 2 + g);
      S* dp = pos_code.grad.row_ptr(1 + g);
      for (int c = 0; c < d; ++c) dp[c] += gr[c];
    }
    // group embedding projection and code embeddings
    TensorT<S> dconcat({n_in, G * d});
    kernels::matmul_nt(dinput.row_ptr(L + 2), wg.value.data.data(), dconcat.data.data(), n_in, d,
                       G * d);
    kernels::matmul_tn(ac.concat.data.data(), dinput.row_ptr(L + 2), wg.grad.data.data(), n_in,
                       G * d, d, true);
    for (int g = 0; g < n_in; ++g) {
      const S* crow = dconcat.row_ptr(g);
      for (int s = 0; s < G; ++s) {
        S* dst = wc.grad.row_ptr(ac.in_codes[static_cast<size_t>(g) * G + s]);
        for (int c = 0; c < d; ++c) dst[c] += crow[s * d + c];
      }
    }
  }

  // Group-by-group generation with within-group sequential sampling, so the
  // repetition window sees each just-sampled code. Stops on EOS (truncating
  // at it) or when max_groups is reached.
  ARGenerateResult generate(std::span<const int> text, const GroupedCodes& prompt,
                            const SamplingConfig& scfg, RngStream& rng, int max_groups,
                            bool stop_at_eos = true) const {
    if (prompt.group_size != cfg.group_size)
      throw std::invalid_argument("ar_generate: prompt grouped with a different group size");
    if (max_groups < 1) throw std::invalid_argument("ar_generate: max_groups must be >= 1");
    scfg.validate();
    const int G = cfg.group_size, d = cfg.d, V = cfg.code_rows();
    const int L = static_cast<int>(text.size());
    const int n_prompt = prompt.num_groups();

    ARGenerateResult res;
    std::vector<int> history = prompt.codes;  // repetition window spans the prompt

    const int prefix_len = L + 2 + n_prompt;
    const int cap = prefix_len + max_groups;
    std::vector<TensorT<S>> kc(stack.blocks.size()), vc(stack.blocks.size());
    for (size_t i = 0; i < stack.blocks.size(); ++i) {
      kc[i] = TensorT<S>({cap, d});
      vc[i] = TensorT<S>({cap, d});
    }
    TensorT<S> input = assemble_input(text, prompt.codes);
    std::vector<S> hid(d);
    for (int p = 0; p < prefix_len; ++p) stack.step(input.row_ptr(p), kc, vc, p, hid.data());

    int pos = prefix_len;
    bool done = false;
    for (int g = 0; g < max_groups && !done; ++g) {
      TensorT<S> logits = group_logits(hid.data());
      ++res.steps;
      std::vector<int> group;
      for (int s = 0; s < G; ++s) {
        std::vector<double> probs = softmax_row(logits.row_ptr(s), V);
        const int tok = ras_sample(probs, history, scfg, rng);
        if (stop_at_eos && tok == cfg.eos_code()) {
          done = true;
          break;
        }
        const int code = tok == cfg.eos_code() ? 0 : tok;  // cutoff-mode guard
        history.push_back(code);
        group.push_back(code);
        res.codes.push_back(code);
      }
      if (done || g + 1 == max_groups) break;
      // embed the completed group and advance the cache
      const int code_pos = 1 + n_prompt + g;
      if (code_pos >= cfg.max_code_pos) {  // position table exhausted
        res.hit_cutoff = true;
        return res;
      }
      std::vector<S> concat(static_cast<size_t>(G) * d), row(d);
      for (int s = 0; s < G; ++s) {
        const S* e = wc.value.row_ptr(group[s]);
        for (int c = 0; c < d; ++c) concat[static_cast<size_t>(s) * d + c] = e[c];
      }
      kernels::matmul_nn<S>(concat.data(), wg.value.data.data(), nullptr, row.data(), 1, G * d, d);
      const S* p = pos_code.value.row_ptr(code_pos);
      for (int c = 0; c < d; ++c) row[c] += p[c];
      stack.step(row.data(), kc, vc, pos, hid.data());
      ++pos;
    }
    res.hit_cutoff = !done;
    return res;
  }
};

using ARModel = ARModelT<float>;

}  // namespace vle2
