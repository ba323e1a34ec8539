// Command-line surface: data generation, AR/NAR training, zero-shot
// synthesis, evaluation, and top-p sweeps over a deterministic synthetic
// codec world. Exit codes: 0 success, 1 usage error, 2 data/model error.

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vle2/eval.hpp"
#include "vle2/model_io.hpp"
#include "vle2/pipeline.hpp"
#include "vle2/run_config.hpp"
#include "vle2/train.hpp"

using nlohmann::json;
using namespace vle2;

namespace {

struct Shared {
  std::string config_path;
  uint64_t seed = 0;
  bool seed_given = false;
};

RunConfig load_config(const Shared& sh) {
  if (sh.config_path.empty()) throw std::runtime_error("--config is required");
  RunConfig cfg = RunConfig::from_file(sh.config_path);
  if (sh.seed_given) cfg.seed = sh.seed;
  return cfg;
}

void write_runlog(const std::string& out_path, const RunConfig& cfg, int argc, char** argv) {
  json log;
  std::string cmd;
  for (int i = 0; i < argc; ++i) {
    if (i) cmd += ' ';
    cmd += argv[i];
  }
  log["command"] = cmd;
  log["resolved_config"] = cfg.to_json();
  log["seed"] = cfg.seed;
  log["threads"] = omp_get_max_threads();
  std::ofstream f(out_path + ".runlog.json", std::ios::binary);
  f << log.dump(2) << "\n";
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> vs;
  if (s.find(':') != std::string::npos) {
    double lo, hi, step;
    if (std::sscanf(s.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 || step <= 0)
      throw std::runtime_error("bad grid '" + s + "' (expected lo:hi:step)");
    for (double v = lo; v <= hi + step * 0.5; v += step) vs.push_back(v);
    return vs;
  }
  size_t pos = 0;
  while (pos < s.size()) {
    size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    vs.push_back(std::stod(s.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  if (vs.empty()) throw std::runtime_error("empty grid");
  return vs;
}

CorpusSplit parse_split(const std::string& s) {
  if (s == "train") return CorpusSplit::Train;
  if (s == "eval") return CorpusSplit::Eval;
  if (s == "all") return CorpusSplit::All;
  throw std::runtime_error("unknown split '" + s + "'");
}

PromptMode parse_mode(const std::string& s) {
  if (s == "continuation") return PromptMode::Continuation;
  if (s == "reference") return PromptMode::Reference;
  throw std::runtime_error("unknown mode '" + s + "' (continuation|reference)");
}

void check_world(const json& meta, const RunConfig& cfg, const std::string& what) {
  const std::string h = meta.at("world_hash").get<std::string>();
  if (h != cfg.world_hash())
    throw std::runtime_error(what + ": checkpoint world config (" + h +
                             ") does not match --config world (" + cfg.world_hash() + ")");
}

json candidate_json(const Candidate& c, bool with_codes) {
  json j;
  j["sim"] = c.sim;
  j["ter"] = c.ter;
  j["hit_cutoff"] = c.hit_cutoff;
  j["ar_steps"] = c.ar_steps;
  if (with_codes) {
    std::vector<std::vector<int>> rows(c.codes.frames);
    for (int t = 0; t < c.codes.frames; ++t) {
      rows[t].resize(c.codes.quantizers);
      for (int q = 0; q < c.codes.quantizers; ++q) rows[t][q] = c.codes.at(t, q);
    }
    j["codes"] = rows;
    j["prompt_frames"] = c.prompt_frames;
  }
  return j;
}

std::vector<PromptSpec> specs_for(const std::vector<Utterance>& corpus, PromptMode mode,
                                  const WorldConfig& world, int prompt_frames) {
  auto specs = build_eval_specs(corpus, mode, world, prompt_frames);
  if (specs.empty()) throw std::runtime_error("eval set is empty for the requested mode");
  return specs;
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_cap_from_env();
  CLI::App app{"vle2: grouped codec language model on a synthetic codec world"};
  app.fallthrough();
  app.require_subcommand(1);

  Shared sh;
  app.add_option("--config", sh.config_path, "run configuration JSON");
  app.add_option("--seed", sh.seed, "override the configured seed")
      ->each([&](const std::string&) { sh.seed_given = true; });

  // gen-data -------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "generate a corpus JSONL");
  std::string gen_out, gen_split = "train";
  int gen_n = 0, gen_len_lo = 0, gen_len_hi = 0;
  gen->add_option("--out", gen_out, "output JSONL path")->required();
  gen->add_option("--split", gen_split, "train|eval|all");
  gen->add_option("--n", gen_n, "number of utterances (default from config)");
  gen->add_option("--len-min", gen_len_lo, "min text length");
  gen->add_option("--len-max", gen_len_hi, "max text length");

  // train-ar / train-nar ---------------------------------------------------
  auto* tar = app.add_subcommand("train-ar", "train the grouped AR model");
  auto* tnar = app.add_subcommand("train-nar", "train the NAR model");
  std::string tr_corpus, tr_out, tr_val;
  int tr_group = 1;
  int64_t tr_steps = 0;
  int tr_batch = 0;
  for (auto* t : {tar, tnar}) {
    t->add_option("--corpus", tr_corpus, "training corpus JSONL")->required();
    t->add_option("--out", tr_out, "checkpoint output path")->required();
    t->add_option("--val-corpus", tr_val, "validation corpus JSONL");
    t->add_option("--steps", tr_steps, "training steps (default from config)");
    t->add_option("--batch", tr_batch, "batch size (default from config)");
  }
  tar->add_option("--group-size", tr_group, "group size G in {1,2,4,8}");

  // synth ------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "zero-shot synthesis for one utterance");
  std::string sy_ar, sy_nar, sy_corpus, sy_mode = "continuation", sy_out;
  int sy_index = 0, sy_samples = 1, sy_group = 0, sy_max_groups = 0, sy_window = -1;
  int sy_prompt_frames = 12;
  double sy_top_p = -1.0, sy_threshold = -1.0;
  synth->add_option("--ar", sy_ar, "AR checkpoint")->required();
  synth->add_option("--nar", sy_nar, "NAR checkpoint")->required();
  synth->add_option("--corpus", sy_corpus, "eval corpus JSONL")->required();
  synth->add_option("--index", sy_index, "utterance index in the corpus");
  synth->add_option("--mode", sy_mode, "continuation|reference");
  synth->add_option("--group-size", sy_group, "expected G (must match the checkpoint)");
  synth->add_option("--top-p", sy_top_p, "nucleus threshold v");
  synth->add_option("--ras-window", sy_window, "repetition window K");
  synth->add_option("--ras-threshold", sy_threshold, "repetition threshold t_r");
  synth->add_option("--samples", sy_samples, "number of samples (5 = five-time sampling)");
  synth->add_option("--max-groups", sy_max_groups, "generation cutoff in groups");
  synth->add_option("--prompt-frames", sy_prompt_frames, "continuation prompt length");
  synth->add_option("--out", sy_out, "output JSON path")->required();

  // eval ---------------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "metrics over an eval corpus");
  std::string ev_ar, ev_nar, ev_corpus, ev_mode = "continuation", ev_out, ev_ras = "on";
  int ev_samples = 1, ev_seeds = 1, ev_prompt_frames = 12;
  double ev_top_p = -1.0;
  ev->add_option("--ar", ev_ar, "AR checkpoint")->required();
  ev->add_option("--nar", ev_nar, "NAR checkpoint")->required();
  ev->add_option("--corpus", ev_corpus, "eval corpus JSONL")->required();
  ev->add_option("--mode", ev_mode, "continuation|reference");
  ev->add_option("--top-p", ev_top_p, "nucleus threshold v");
  ev->add_option("--samples", ev_samples, "samples per case (5 = five-time sampling)");
  ev->add_option("--seeds", ev_seeds, "seeds per case");
  ev->add_option("--ras", ev_ras, "on|off");
  ev->add_option("--prompt-frames", ev_prompt_frames, "continuation prompt length");
  ev->add_option("--out", ev_out, "output JSON report")->required();

  // sweep ----------------------------------------------------------------------
  auto* sw = app.add_subcommand("sweep", "top-p stability sweep, CSV output");
  std::vector<std::string> sw_ars;
  std::string sw_nar, sw_corpus, sw_mode = "continuation", sw_out, sw_ras = "both";
  std::string sw_top_p = "0.0:0.8:0.1", sw_groups;
  int sw_seeds = 1, sw_prompt_frames = 12;
  bool sw_timing = false;
  sw->add_option("--ar", sw_ars, "AR checkpoint (repeatable, one per G)")->required();
  sw->add_option("--nar", sw_nar, "NAR checkpoint")->required();
  sw->add_option("--corpus", sw_corpus, "eval corpus JSONL")->required();
  sw->add_option("--mode", sw_mode, "continuation|reference");
  sw->add_option("--top-p", sw_top_p, "grid lo:hi:step or comma list");
  sw->add_option("--group-sizes", sw_groups, "comma list; all must have checkpoints");
  sw->add_option("--ras", sw_ras, "both|on|off");
  sw->add_option("--seeds", sw_seeds, "seeds per case");
  sw->add_option("--prompt-frames", sw_prompt_frames, "continuation prompt length");
  sw->add_flag("--timing", sw_timing, "measure wall clock (CSV no longer byte-reproducible)");
  sw->add_option("--out", sw_out, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help() << std::flush;
    return 1;
  }

  try {
    RunConfig cfg = load_config(sh);

    if (gen->parsed()) {
      const int n = gen_n > 0 ? gen_n : cfg.corpus.n_utts;
      const int lo = gen_len_lo > 0 ? gen_len_lo : cfg.corpus.len_lo;
      const int hi = gen_len_hi > 0 ? gen_len_hi : cfg.corpus.len_hi;
      auto corpus = make_corpus(cfg.world, n, lo, hi, cfg.seed, parse_split(gen_split));
      write_corpus_jsonl(gen_out, corpus);
      write_runlog(gen_out, cfg, argc, argv);
      std::fprintf(stderr, "wrote %d utterances to %s\n", n, gen_out.c_str());
      return 0;
    }

    if (tar->parsed() || tnar->parsed()) {
      auto corpus = read_corpus_jsonl(tr_corpus, cfg.world);
      std::vector<Utterance> val;
      if (!tr_val.empty()) val = read_corpus_jsonl(tr_val, cfg.world);
      TrainOptions topt;
      topt.steps = tr_steps > 0 ? tr_steps : cfg.optim.total_steps;
      topt.batch_size = tr_batch > 0 ? tr_batch : cfg.optim.batch_size;
      topt.seed = cfg.seed;
      topt.csv_path = tr_out + ".train.csv";
      OptimizerState st = cfg.optimizer_state();
      st.total_steps = topt.steps;
      st.warmup_steps = std::min<int64_t>(cfg.optim.warmup_steps, topt.steps / 2);
      if (st.warmup_steps >= st.total_steps) st.warmup_steps = st.total_steps - 1;
      if (tar->parsed()) {
        ARConfig ac;
        ac.text_vocab = cfg.world.text_vocab;
        ac.code_vocab = cfg.world.code_vocab;
        ac.group_size = tr_group;
        ac.d = cfg.model.d;
        ac.blocks = cfg.model.blocks;
        ac.heads = cfg.model.heads;
        ac.max_text_pos = cfg.model.max_text_pos;
        ac.max_code_pos = cfg.model.max_code_pos;
        ARModel m;
        m.init(ac, cfg.seed);
        train_ar(m, corpus, st, topt, val.empty() ? nullptr : &val, cfg.world);
        save_ar(tr_out, m, topt.steps, cfg.world_hash());
      } else {
        NARConfig nc;
        nc.text_vocab = cfg.world.text_vocab;
        nc.code_vocab = cfg.world.code_vocab;
        nc.d = cfg.model.d;
        nc.blocks = cfg.model.blocks;
        nc.heads = cfg.model.heads;
        nc.max_text_pos = cfg.model.max_text_pos;
        nc.max_code_pos = cfg.model.max_code_pos;
        NARModel m;
        m.init(nc, cfg.seed + 1);
        train_nar(m, corpus, st, topt, val.empty() ? nullptr : &val, cfg.world);
        save_nar(tr_out, m, topt.steps, cfg.world_hash());
      }
      write_runlog(tr_out, cfg, argc, argv);
      return 0;
    }

    if (synth->parsed()) {
      json ar_meta, nar_meta;
      ARModel ar = load_ar(sy_ar, &ar_meta);
      NARModel nar = load_nar(sy_nar, &nar_meta);
      check_world(ar_meta, cfg, "synth --ar");
      check_world(nar_meta, cfg, "synth --nar");
      const int G = sy_group > 0 ? sy_group : ar.cfg.group_size;
      auto corpus = read_corpus_jsonl(sy_corpus, cfg.world);
      auto specs = specs_for(corpus, parse_mode(sy_mode), cfg.world, sy_prompt_frames);
      if (sy_index < 0 || sy_index >= static_cast<int>(specs.size()))
        throw std::runtime_error("synth: --index out of range (have " +
                                 std::to_string(specs.size()) + " cases)");
      SamplingConfig scfg;
      scfg.top_p = sy_top_p >= 0 ? sy_top_p : cfg.sampling.top_p;
      scfg.window = sy_window > 0 ? sy_window : cfg.sampling.window;
      scfg.threshold = sy_threshold >= 0 ? sy_threshold : cfg.sampling.threshold;
      scfg.seed = cfg.seed;
      auto cands = synthesize_many(specs[sy_index], ar, nar, G, scfg, cfg.world, sy_samples,
                                   sy_max_groups);
      const size_t best = sort_candidates(cands);
      json out;
      out["best_index"] = best;
      out["best"] = candidate_json(cands[best], true);
      out["samples"] = json::array();
      for (const auto& c : cands) out["samples"].push_back(candidate_json(c, false));
      auto [mx_sim, mn_ter] = metric_wise_max(cands);
      out["metric_wise"] = {{"sim", mx_sim}, {"ter", mn_ter}};
      std::ofstream f(sy_out, std::ios::binary);
      f << out.dump(2) << "\n";
      write_runlog(sy_out, cfg, argc, argv);
      return 0;
    }

    if (ev->parsed()) {
      json ar_meta, nar_meta;
      ARModel ar = load_ar(ev_ar, &ar_meta);
      NARModel nar = load_nar(ev_nar, &nar_meta);
      check_world(ar_meta, cfg, "eval --ar");
      check_world(nar_meta, cfg, "eval --nar");
      auto corpus = read_corpus_jsonl(ev_corpus, cfg.world);
      auto specs = specs_for(corpus, parse_mode(ev_mode), cfg.world, ev_prompt_frames);
      SamplingConfig scfg;
      scfg.top_p = ev_top_p >= 0 ? ev_top_p : cfg.sampling.top_p;
      scfg.window = cfg.sampling.window;
      scfg.threshold = ev_ras == "off" ? 2.0 : cfg.sampling.threshold;
      scfg.seed = cfg.seed;
      json cases = json::array();
      double sum_ter = 0, sum_sim = 0, cutoff = 0;
      int n_cases = 0;
      for (size_t si = 0; si < specs.size(); ++si) {
        for (int s = 0; s < ev_seeds; ++s) {
          SamplingConfig case_cfg = scfg;
          case_cfg.seed = scfg.seed ^ (static_cast<uint64_t>(si) * ev_seeds + s) << 8;
          Candidate chosen;
          if (ev_samples == 1) {
            chosen = synthesize(specs[si], ar, nar, ar.cfg.group_size, case_cfg, cfg.world, 0, 0);
          } else {
            auto cands = synthesize_many(specs[si], ar, nar, ar.cfg.group_size, case_cfg,
                                         cfg.world, ev_samples);
            chosen = cands[sort_candidates(cands)];
          }
          sum_ter += chosen.ter;
          sum_sim += chosen.sim;
          cutoff += chosen.hit_cutoff ? 1 : 0;
          ++n_cases;
          json row = candidate_json(chosen, false);
          row["case"] = si;
          row["seed_index"] = s;
          cases.push_back(row);
        }
      }
      json out;
      out["mode"] = ev_mode;
      out["top_p"] = scfg.top_p;
      out["ras"] = ev_ras;
      out["samples"] = ev_samples;
      out["mean_ter"] = sum_ter / n_cases;
      out["mean_sim"] = sum_sim / n_cases;
      out["cutoff_rate"] = cutoff / n_cases;
      out["cases"] = cases;
      std::ofstream f(ev_out, std::ios::binary);
      f << out.dump(2) << "\n";
      write_runlog(ev_out, cfg, argc, argv);
      std::fprintf(stderr, "eval: mean_ter %.4f mean_sim %.4f over %d cases\n",
                   sum_ter / n_cases, sum_sim / n_cases, n_cases);
      return 0;
    }

    if (sw->parsed()) {
      std::vector<ARModel> ars;
      ars.reserve(sw_ars.size());
      std::map<int, const ARModel*> by_g;
      for (const auto& path : sw_ars) {
        json meta;
        ars.push_back(load_ar(path, &meta));
        check_world(meta, cfg, "sweep --ar");
        by_g[ars.back().cfg.group_size] = &ars.back();
      }
      json nar_meta;
      NARModel nar = load_nar(sw_nar, &nar_meta);
      check_world(nar_meta, cfg, "sweep --nar");
      std::vector<int> gs;
      if (!sw_groups.empty()) {
        for (double g : parse_grid(sw_groups)) gs.push_back(static_cast<int>(g));
      } else {
        for (const auto& [g, _] : by_g) gs.push_back(g);
      }
      std::vector<int> ras_modes;
      if (sw_ras == "both")
        ras_modes = {0, 1};
      else if (sw_ras == "on")
        ras_modes = {1};
      else if (sw_ras == "off")
        ras_modes = {0};
      else
        throw std::runtime_error("sweep: --ras must be both|on|off");
      auto corpus = read_corpus_jsonl(sw_corpus, cfg.world);
      auto specs = specs_for(corpus, parse_mode(sw_mode), cfg.world, sw_prompt_frames);
      SamplingConfig base;
      base.window = cfg.sampling.window;
      base.threshold = cfg.sampling.threshold;
      base.seed = cfg.seed;
      SweepResult res = sweep_top_p(specs, by_g, nar, gs, parse_grid(sw_top_p), ras_modes,
                                    sw_seeds, base, cfg.world, sw_timing);
      std::ofstream f(sw_out, std::ios::binary);
      f << res.to_csv();
      write_runlog(sw_out, cfg, argc, argv);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
