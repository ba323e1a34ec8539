#include "doctest.h"

#include <cmath>
#include <vector>

#include "gradcheck_util.hpp"
#include "vle2/ar_model.hpp"
#include "vle2/nar_model.hpp"
#include "vle2/nn.hpp"
#include "vle2/world.hpp"

using namespace vle2;

TEST_CASE("embedding lookup selects rows and rejects bad ids") {
  TensorT<float> table({3, 3});
  for (int i = 0; i < 3; ++i) table.at(i, i) = 1.0f;  // identity
  std::vector<int> ids{2, 0};
  TensorT<float> out = embedding_lookup(table, ids);
  CHECK(out.shape == std::vector<int>{2, 3});
  CHECK(out.at(0, 2) == 1.0f);
  CHECK(out.at(1, 0) == 1.0f);
  CHECK(out.at(0, 0) == 0.0f);

  CHECK(embedding_lookup(table, std::vector<int>{}).rows() == 0);

  TensorT<float> rows({4, 2});
  for (int i = 0; i < 4; ++i) rows.at(i, 0) = rows.at(i, 1) = static_cast<float>(i);
  TensorT<float> picked = embedding_lookup(rows, std::vector<int>{1, 1, 3});
  CHECK(picked.at(0, 0) == 1.0f);
  CHECK(picked.at(2, 1) == 3.0f);

  CHECK_THROWS_WITH_AS(embedding_lookup(table, std::vector<int>{0, 7}),
                       "embedding_lookup: id 7 out of range [0,3) at position 1",
                       std::runtime_error);
}

namespace {

TransformerBlockT<float> make_block(int d, int heads, uint64_t seed) {
  TransformerBlockT<float> b;
  RngStream rng(seed);
  b.init("b", d, heads, rng);
  return b;
}

TensorT<float> random_input(int L, int d, uint64_t seed) {
  TensorT<float> x({L, d});
  RngStream rng(seed);
  for (auto& v : x.data) v = static_cast<float>(rng.normal());
  return x;
}

}  // namespace

TEST_CASE("single-position block output is mask independent") {
  auto block = make_block(16, 4, 3);
  TensorT<float> x = random_input(1, 16, 4);
  BlockCache<float> c1, c2;
  CHECK(block.forward(x, MaskKind::Causal, c1).data == block.forward(x, MaskKind::Full, c2).data);
}

TEST_CASE("causal mask: later positions cannot influence earlier outputs") {
  auto block = make_block(16, 2, 5);
  TensorT<float> x = random_input(8, 16, 6);
  BlockCache<float> c;
  TensorT<float> y1 = block.forward(x, MaskKind::Causal, c);
  TensorT<float> x2 = x;
  x2.at(5, 3) += 1.5f;  // not a constant row shift (layer norm would absorb that)
  TensorT<float> y2 = block.forward(x2, MaskKind::Causal, c);
  for (int t = 0; t < 5; ++t)
    for (int col = 0; col < 16; ++col) CHECK(y1.at(t, col) == y2.at(t, col));
  // under the full mask the perturbation reaches row 0
  TensorT<float> f1 = block.forward(x, MaskKind::Full, c);
  TensorT<float> f2 = block.forward(x2, MaskKind::Full, c);
  bool changed = false;
  for (int col = 0; col < 16; ++col) changed |= f1.at(0, col) != f2.at(0, col);
  CHECK(changed);
}

TEST_CASE("causal independence holds numerically") {
  TransformerBlockT<double> block;
  RngStream rng(17);
  block.init("b", 8, 2, rng);
  TensorT<double> x({6, 8});
  for (auto& v : x.data) v = rng.normal();
  const double h = 1e-5;
  BlockCache<double> c;
  for (int tp = 3; tp < 6; ++tp) {  // perturb a late row
    TensorT<double> xp = x, xm = x;
    xp.at(tp, 1) += h;
    xm.at(tp, 1) -= h;
    TensorT<double> yp = block.forward(xp, MaskKind::Causal, c);
    TensorT<double> ym = block.forward(xm, MaskKind::Causal, c);
    for (int t = 0; t < tp; ++t)
      for (int col = 0; col < 8; ++col)
        CHECK(std::abs(yp.at(t, col) - ym.at(t, col)) / (2 * h) == doctest::Approx(0.0));
  }
}

TEST_CASE("non-finite block input is a hard error") {
  auto block = make_block(16, 2, 8);
  TensorT<float> x = random_input(3, 16, 9);
  x.at(1, 4) = std::numeric_limits<float>::quiet_NaN();
  BlockCache<float> c;
  CHECK_THROWS_AS(block.forward(x, MaskKind::Causal, c), std::runtime_error);
}

TEST_CASE("cross entropy hand values") {
  TensorT<float> uniform({2, 64});
  std::vector<int> targets{5, 11};
  CHECK(cross_entropy(uniform, targets) == doctest::Approx(std::log(64.0)).epsilon(1e-6));

  TensorT<float> sharp({1, 4});
  std::vector<int> t0{2};
  for (float mag : {5.0f, 20.0f, 60.0f}) {
    sharp.at(0, 2) = mag;
    CHECK(cross_entropy(sharp, t0) < std::exp(-static_cast<double>(mag)) * 4 + 1e-6);
  }

  TensorT<float> two({1, 2});
  two.at(0, 0) = 1.0f;
  CHECK(cross_entropy(two, std::vector<int>{0}) == doctest::Approx(0.31326).epsilon(1e-4));

  std::vector<int> weights{0, 0};
  CHECK_THROWS_WITH_AS(cross_entropy(uniform, targets, weights),
                       "cross_entropy: empty loss (all positions masked)", std::runtime_error);
}

TEST_CASE("forward passes are bit deterministic") {
  auto block = make_block(32, 4, 10);
  TensorT<float> x = random_input(12, 32, 11);
  BlockCache<float> c1, c2;
  CHECK(block.forward(x, MaskKind::Causal, c1).data == block.forward(x, MaskKind::Causal, c2).data);
}

// ---------------------------------------------------------------------------
// analytic gradients vs central finite differences, 64-bit, d=16, 2 blocks

namespace {

std::vector<ARSample> ar_gradcheck_batch() {
  return {{{3, 1, 4}, {10, 20, 30, 40, 50, 60}}, {{7, 2}, {5, 15, 25, 35, 45}}};
}

double nar_fixed_loss(NARModelT<double>& m, const CodeMatrix& codes, bool grads) {
  // fixed splits so the finite-difference oracle sees a deterministic loss
  std::vector<int> text{3, 1, 4};
  double loss = 0.0;
  for (auto [cond, j] : {std::pair{3, 1}, std::pair{2, 5}}) {
    std::vector<int> targets(codes.frames);
    for (int t = 0; t < codes.frames; ++t) targets[t] = codes.at(t, j);
    loss += m.sample_loss(text, codes, cond, j, targets, grads, 0.5);
  }
  return loss;
}

}  // namespace

TEST_CASE("AR analytic gradients match finite differences (64-bit oracle)") {
  ARConfig cfg;
  cfg.text_vocab = 8;
  cfg.code_vocab = 64;
  cfg.group_size = 2;
  cfg.d = 16;
  cfg.blocks = 2;
  cfg.heads = 2;
  cfg.max_text_pos = 8;
  cfg.max_code_pos = 16;
  ARModelT<double> m;
  m.init(cfg, 12345);
  auto batch = ar_gradcheck_batch();
  auto rep = testutil::check_gradients(
      m.params(), [&] { return m.loss(batch, false); },
      [&] {
        m.zero_grads();
        m.loss(batch, true);
      },
      100, 1);
  CHECK(rep.failed == 0);
  CHECK(rep.checked >= 100 * 8);
  INFO("worst rel err ", rep.worst_rel, " in ", rep.worst_tensor);
  CHECK(rep.worst_rel <= 1e-4);
}

TEST_CASE("NAR analytic gradients match finite differences (64-bit oracle)") {
  NARConfig cfg;
  cfg.text_vocab = 8;
  cfg.code_vocab = 64;
  cfg.d = 16;
  cfg.blocks = 2;
  cfg.heads = 2;
  cfg.max_text_pos = 8;
  cfg.max_code_pos = 16;
  NARModelT<double> m;
  m.init(cfg, 999);
  WorldConfig w;
  w.text_vocab = 8;
  CodeMatrix codes = synth_utterance(std::vector<int>{3, 1}, 4, w);
  auto rep = testutil::check_gradients(
      m.params(), [&] { return nar_fixed_loss(m, codes, false); },
      [&] {
        m.zero_grads();
        nar_fixed_loss(m, codes, true);
      },
      100, 2);
  CHECK(rep.failed == 0);
  INFO("worst rel err ", rep.worst_rel, " in ", rep.worst_tensor);
  CHECK(rep.worst_rel <= 1e-4);
}
