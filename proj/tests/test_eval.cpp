#include "doctest.h"

#include <map>
#include <vector>

#include "vle2/eval.hpp"

using namespace vle2;

namespace {

struct Fixture {
  WorldConfig world;
  ARModel ar1, ar2, ar4;
  NARModel nar;
  std::vector<Utterance> utts;

  Fixture() {
    world.text_vocab = 8;
    auto make_ar = [&](int g, ARModel& m) {
      ARConfig c;
      c.text_vocab = 8;
      c.group_size = g;
      c.d = 16;
      c.blocks = 1;
      c.heads = 2;
      c.max_text_pos = 16;
      c.max_code_pos = 160;
      m.init(c, 100 + g);
    };
    make_ar(1, ar1);
    make_ar(2, ar2);
    make_ar(4, ar4);
    NARConfig nc;
    nc.text_vocab = 8;
    nc.d = 16;
    nc.blocks = 1;
    nc.heads = 2;
    nc.max_text_pos = 16;
    nc.max_code_pos = 160;
    nar.init(nc, 200);
    for (int i = 0; i < 3; ++i) {
      Utterance u;
      u.text = {1, 2, 3, static_cast<int>(i % 8), 5};
      u.speaker = 12 + (i % 2);
      u.codes = synth_utterance(u.text, u.speaker, world);
      utts.push_back(u);
    }
  }
};

}  // namespace

TEST_CASE("reference specs rotate within each speaker") {
  Fixture fx;
  auto specs = build_eval_specs(fx.utts, PromptMode::Reference, fx.world);
  // speaker 12 has utts 0 and 2, speaker 13 only utt 1 (dropped)
  REQUIRE(specs.size() == 2);
  CHECK(specs[0].prompt_text == fx.utts[2].text);
  CHECK(specs[0].target_text == fx.utts[0].text);
  CHECK(specs[1].prompt_text == fx.utts[0].text);
  CHECK(specs[1].target_text == fx.utts[2].text);
  auto cont = build_eval_specs(fx.utts, PromptMode::Continuation, fx.world);
  CHECK(cont.size() == 3);
}

TEST_CASE("sweep emits one row per (G, ras, v) cell in a fixed order") {
  Fixture fx;
  auto specs = build_eval_specs({fx.utts[0]}, PromptMode::Continuation, fx.world);
  std::map<int, const ARModel*> models{{1, &fx.ar1}, {2, &fx.ar2}};
  std::vector<double> vs;
  for (int i = 0; i <= 8; ++i) vs.push_back(0.1 * i);
  SamplingConfig base;
  base.seed = 3;
  SweepResult res = sweep_top_p(specs, models, fx.nar, {1, 2}, vs, {0, 1}, 1, base, fx.world);
  CHECK(res.rows.size() == 2 * 2 * 9);  // 9 v-rows per (G, ras) cell
  for (size_t i = 0; i < 9; ++i) {
    CHECK(res.rows[i].group_size == 1);
    CHECK(res.rows[i].ras == 0);
    CHECK(res.rows[i].v == doctest::Approx(0.1 * i));
  }

  // single utterance, single seed, single cell -> one row
  SweepResult one = sweep_top_p(specs, models, fx.nar, {1}, {0.5}, {1}, 1, base, fx.world);
  CHECK(one.rows.size() == 1);

  CHECK_THROWS_WITH_AS(
      sweep_top_p(specs, models, fx.nar, {1, 4, 8}, {0.5}, {1}, 1, base, fx.world),
      "sweep_top_p: missing checkpoint for group size(s) 4, 8", std::runtime_error);
}

TEST_CASE("sweep output is byte-deterministic when timing is off") {
  Fixture fx;
  auto specs = build_eval_specs({fx.utts[0], fx.utts[1]}, PromptMode::Continuation, fx.world);
  std::map<int, const ARModel*> models{{1, &fx.ar1}};
  SamplingConfig base;
  base.seed = 17;
  SweepResult a = sweep_top_p(specs, models, fx.nar, {1}, {0.0, 0.4}, {0, 1}, 2, base, fx.world);
  SweepResult b = sweep_top_p(specs, models, fx.nar, {1}, {0.0, 0.4}, {0, 1}, 2, base, fx.world);
  CHECK(a.to_csv() == b.to_csv());
  const std::string header = "v,G,ras,mean_ter,mean_sim,cutoff_rate,ar_steps,wall_ms\n";
  CHECK(a.to_csv().substr(0, header.size()) == header);
}

TEST_CASE("stability report summarizes cutoffs and repeat runs") {
  std::vector<Candidate> cands(4);
  for (int i = 0; i < 4; ++i) {
    cands[i].codes = CodeMatrix(6, 8);
    cands[i].prompt_frames = 2;
    for (int t = 0; t < 6; ++t) cands[i].codes.at(t, 0) = t;
  }
  StabilityReport clean = stability_report(cands);
  CHECK(clean.cutoff_rate == 0.0);
  CHECK(clean.max_run == 1);

  cands[1].hit_cutoff = true;
  for (int t = 2; t < 6; ++t) cands[1].codes.at(t, 0) = 9;  // run of 4 in the generated region
  StabilityReport rep = stability_report(cands);
  CHECK(rep.cutoff_rate == doctest::Approx(0.25));
  CHECK(rep.max_run == 4);
  CHECK(rep.longest_runs[1] == 4);
}

TEST_CASE("throughput report: exact step ratios at fixed generation length") {
  Fixture fx;
  auto specs = build_eval_specs({fx.utts[0]}, PromptMode::Continuation, fx.world);
  std::map<int, const ARModel*> models{{1, &fx.ar1}, {2, &fx.ar2}, {4, &fx.ar4}};
  SamplingConfig base;
  base.seed = 1;
  base.top_p = 0.5;
  auto rows = throughput_report(specs, models, {1, 2, 4}, 48, base, fx.world);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].ar_steps == 48);
  CHECK(rows[1].ar_steps == 24);
  CHECK(rows[2].ar_steps == 12);
  CHECK(rows[1].step_ratio_vs_g1 == doctest::Approx(0.5));
  CHECK(rows[2].step_ratio_vs_g1 == doctest::Approx(0.25));
}
