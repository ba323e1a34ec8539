#include "doctest.h"

#include <cmath>
#include <vector>

#include "vle2/ar_model.hpp"
#include "vle2/optim.hpp"

using namespace vle2;

namespace {

ARConfig tiny_cfg(int group_size, int d = 16, int blocks = 1) {
  ARConfig c;
  c.text_vocab = 8;
  c.code_vocab = 64;
  c.group_size = group_size;
  c.d = d;
  c.blocks = blocks;
  c.heads = 2;
  c.max_text_pos = 16;
  c.max_code_pos = 64;
  return c;
}

}  // namespace

TEST_CASE("assembled input has length L + 2 + T/G") {
  ARModelT<float> m;
  m.init(tiny_cfg(2), 1);
  std::vector<int> text{1, 2, 3}, c0{4, 5, 6, 7, 8, 9};
  TensorT<float> in = m.assemble_input(text, c0);
  CHECK(in.rows() == 3 + 2 + 3);

  CHECK_THROWS_AS(m.assemble_input(text, std::vector<int>{1, 2, 3}), std::invalid_argument);

  // cold start: only the text span plus the two control rows
  TensorT<float> cold = m.assemble_input(text, std::vector<int>{});
  CHECK(cold.rows() == 5);
}

TEST_CASE("with an identity group projection, G=1 group embeddings are code embeddings") {
  ARModelT<float> m;
  m.init(tiny_cfg(1), 2);
  m.wg.value.zero();
  for (int i = 0; i < m.cfg.d; ++i) m.wg.value.at(i, i) = 1.0f;
  std::vector<int> text{0}, c0{13, 57};
  TensorT<float> in = m.assemble_input(text, c0);
  for (int g = 0; g < 2; ++g)
    for (int c = 0; c < m.cfg.d; ++c)
      CHECK(in.at(3 + g, c) ==
            doctest::Approx(m.wc.value.at(c0[g], c) + m.pos_code.value.at(1 + g, c)));
}

TEST_CASE("group logits: pure function of the hidden state, all slices live") {
  ARModelT<float> m;
  m.init(tiny_cfg(4), 3);
  std::vector<float> h(m.cfg.d);
  RngStream rng(5);
  for (auto& v : h) v = static_cast<float>(rng.normal());
  TensorT<float> l1 = m.group_logits(h.data());
  TensorT<float> l2 = m.group_logits(h.data());
  CHECK(l1.shape == std::vector<int>{4, 65});
  CHECK(l1.data == l2.data);

  std::vector<float> hp = h;
  hp[3] += 0.25f;
  TensorT<float> l3 = m.group_logits(hp.data());
  for (int s = 0; s < 4; ++s) {
    bool changed = false;
    for (int c = 0; c < 65; ++c) changed |= l3.at(s, c) != l1.at(s, c);
    CHECK(changed);
  }
}

TEST_CASE("G=1 logits equal the hand-chained projections") {
  ARModelT<float> m;
  m.init(tiny_cfg(1), 4);
  const int d = m.cfg.d;
  std::vector<float> h(d);
  for (int i = 0; i < d; ++i) h[i] = 0.1f * (i % 5) - 0.2f;
  TensorT<float> got = m.group_logits(h.data());
  for (int c = 0; c < 65; ++c) {
    double u, acc = 0.0;
    for (int k = 0; k < d; ++k) {
      u = 0.0;
      for (int i = 0; i < d; ++i) u += static_cast<double>(h[i]) * m.wgp.value.at(i, k);
      acc += u * m.wc.value.at(c, k);
    }
    CHECK(got.at(0, c) == doctest::Approx(acc).epsilon(1e-4));
  }
}

TEST_CASE("untrained loss sits near ln(V_c+1) for both group sizes") {
  std::vector<ARSample> batch;
  RngStream rng(6);
  for (int i = 0; i < 6; ++i) {
    ARSample s;
    s.text.resize(4);
    for (auto& t : s.text) t = static_cast<int>(rng.next_below(8));
    s.c0.resize(16);
    for (auto& c : s.c0) c = static_cast<int>(rng.next_below(64));
    batch.push_back(s);
  }
  double mean_g1 = 0.0, mean_g2 = 0.0;
  const int seeds = 20;
  for (uint64_t seed = 0; seed < seeds; ++seed) {
    ARModelT<float> m1, m2;
    m1.init(tiny_cfg(1), seed);
    m2.init(tiny_cfg(2), seed + 1000);
    mean_g1 += m1.loss(batch, false) / seeds;
    mean_g2 += m2.loss(batch, false) / seeds;
  }
  CHECK(mean_g1 == doctest::Approx(std::log(65.0)).epsilon(0.3 / std::log(65.0)));
  CHECK(mean_g2 == doctest::Approx(std::log(65.0)).epsilon(0.3 / std::log(65.0)));
  CHECK(std::abs(mean_g1 - mean_g2) < 0.5);

  ARModelT<float> m;
  m.init(tiny_cfg(1), 0);
  CHECK_THROWS_AS(m.loss({}, false), std::invalid_argument);
}

TEST_CASE("loss decomposes into the sum of per-position cross entropies") {
  ARModelT<float> m;
  m.init(tiny_cfg(2), 7);
  std::vector<int> text{1, 5}, c0{3, 9, 27, 50};
  std::vector<ARSample> batch{{text, c0}};
  const double loss = m.loss(batch, false);

  // manual: forward, gather hiddens at <bos> and each input group, project,
  // and average the per-position CE terms
  const std::vector<int> targets = ARModelT<float>::grouped_targets(c0, 2, 64);
  StackCache<float> sc;
  TensorT<float> input = m.assemble_input(text, c0);
  TensorT<float> hidden = m.forward_hidden(input, sc);
  double manual = 0.0;
  const int n_pred = static_cast<int>(targets.size()) / 2;
  for (int t = 0; t < n_pred; ++t) {
    TensorT<float> logits = m.group_logits(hidden.row_ptr(2 + 1 + t));
    for (int s = 0; s < 2; ++s) {
      std::vector<double> p = softmax_row(logits.row_ptr(s), 65);
      manual -= std::log(p[targets[t * 2 + s]]);
    }
  }
  manual /= static_cast<double>(targets.size());
  CHECK(loss == doctest::Approx(manual).epsilon(1e-6));
}

TEST_CASE("causal consistency: earlier group logits ignore later targets") {
  ARModelT<float> m;
  m.init(tiny_cfg(2), 8);
  std::vector<int> text{2, 3};
  std::vector<int> c0a{1, 2, 3, 4, 5, 6}, c0b{1, 2, 3, 4, 60, 61};
  StackCache<float> sa, sb;
  TensorT<float> ha = m.forward_hidden(m.assemble_input(text, c0a), sa);
  TensorT<float> hb = m.forward_hidden(m.assemble_input(text, c0b), sb);
  // prediction rows for groups 0..1 (bos and first input group) are identical
  for (int row = 3; row <= 4; ++row)
    for (int c = 0; c < m.cfg.d; ++c) CHECK(ha.at(row, c) == hb.at(row, c));
}

TEST_CASE("incremental decoding equals the full forward pass") {
  ARModelT<float> m;
  m.init(tiny_cfg(2, 16, 2), 9);
  std::vector<int> text{1, 2, 6};
  std::vector<int> c0{10, 11, 12, 13, 14, 15, 16, 17};
  StackCache<float> sc;
  TensorT<float> input = m.assemble_input(text, c0);
  TensorT<float> full = m.forward_hidden(input, sc);

  std::vector<TensorT<float>> kc(m.stack.blocks.size()), vc(m.stack.blocks.size());
  for (size_t i = 0; i < kc.size(); ++i) {
    kc[i] = TensorT<float>({input.rows(), m.cfg.d});
    vc[i] = TensorT<float>({input.rows(), m.cfg.d});
  }
  std::vector<float> row(m.cfg.d);
  for (int p = 0; p < input.rows(); ++p) {
    m.stack.step(input.row_ptr(p), kc, vc, p, row.data());
    for (int c = 0; c < m.cfg.d; ++c)
      CHECK(std::abs(row[c] - full.at(p, c)) <= 1e-5f);
  }
}

TEST_CASE("the tied prediction layer reuses the code embedding storage") {
  ARModelT<float> m;
  m.init(tiny_cfg(1), 10);
  std::vector<float> h(m.cfg.d, 0.3f);
  TensorT<float> before = m.group_logits(h.data());
  TensorT<float> in_before = m.assemble_input(std::vector<int>{0}, std::vector<int>{5});
  for (int c = 0; c < m.cfg.d; ++c) m.wc.value.at(5, c) += 1.0f;
  TensorT<float> after = m.group_logits(h.data());
  TensorT<float> in_after = m.assemble_input(std::vector<int>{0}, std::vector<int>{5});
  CHECK(before.at(0, 5) != after.at(0, 5));       // prediction changed
  CHECK(in_before.at(3, 0) != in_after.at(3, 0)); // embedding changed too
}

TEST_CASE("generation is deterministic and respects the step-count law") {
  ARModelT<float> m;
  m.init(tiny_cfg(4), 11);
  SamplingConfig scfg;
  scfg.top_p = 0.7;
  scfg.seed = 21;
  std::vector<int> text{1, 2, 3};
  GroupedCodes prompt = partition_into_groups(std::vector<int>{7, 8, 9, 10}, 4);

  RngStream r1(scfg.seed), r2(scfg.seed);
  ARGenerateResult a = m.generate(text, prompt, scfg, r1, 6, false);
  ARGenerateResult b = m.generate(text, prompt, scfg, r2, 6, false);
  CHECK(a.codes == b.codes);
  CHECK(a.codes.size() == 24);  // 6 groups of 4, EOS ignored
  CHECK(a.steps == 6);          // ceil(T_out / G)
  CHECK(a.hit_cutoff);

  RngStream r3(99);
  ARGenerateResult c = m.generate(text, prompt, scfg, r3, 5, true);
  CHECK(c.steps <= 5);
}

TEST_CASE("a model trained to emit EOS first returns an empty generation") {
  ARModelT<float> m;
  m.init(tiny_cfg(2, 16, 1), 12);
  std::vector<ARSample> batch{{{1, 2}, {}}, {{3}, {}}};
  OptimizerState st;
  st.peak_lr = 2e-2;
  st.warmup_steps = 5;
  st.total_steps = 200;
  AdamWT<float> opt(st);
  auto params = m.params();
  for (int step = 0; step < 150; ++step) {
    m.zero_grads();
    m.loss(batch, true);
    opt.step(params);
  }
  SamplingConfig greedy;
  greedy.top_p = 0.0;
  greedy.threshold = 2.0;
  RngStream rng(0);
  ARGenerateResult res =
      m.generate(std::vector<int>{1, 2}, GroupedCodes::empty(2), greedy, rng, 8);
  CHECK(res.codes.empty());
  CHECK(!res.hit_cutoff);
}
