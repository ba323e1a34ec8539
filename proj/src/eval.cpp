#include "vle2/eval.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <stdexcept>

namespace vle2 {

std::vector<PromptSpec> build_eval_specs(const std::vector<Utterance>& corpus, PromptMode mode,
                                         const WorldConfig& cfg, int prompt_frames) {
  std::vector<PromptSpec> specs;
  if (mode == PromptMode::Continuation) {
    for (const auto& u : corpus) specs.push_back(continuation_spec(u, cfg, prompt_frames));
    return specs;
  }
  std::map<int, std::vector<const Utterance*>> by_speaker;
  for (const auto& u : corpus) by_speaker[u.speaker].push_back(&u);
  for (const auto& [spk, utts] : by_speaker) {
    if (utts.size() < 2) continue;
    for (size_t i = 0; i < utts.size(); ++i) {
      const size_t prev = i == 0 ? utts.size() - 1 : i - 1;
      specs.push_back(reference_spec(*utts[prev], *utts[i]));
    }
  }
  return specs;
}

std::string SweepResult::to_csv() const {
  std::string out = "v,G,ras,mean_ter,mean_sim,cutoff_rate,ar_steps,wall_ms\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.6f,%d,%d,%.6f,%.6f,%.6f,%lld,%.6f\n", r.v, r.group_size,
                  r.ras, r.mean_ter, r.mean_sim, r.cutoff_rate, r.ar_steps, r.wall_ms);
    out += buf;
  }
  return out;
}

SweepResult sweep_top_p(const std::vector<PromptSpec>& specs,
                        const std::map<int, const ARModel*>& models_by_g, const NARModel& nar,
                        const std::vector<int>& group_sizes, const std::vector<double>& vs,
                        const std::vector<int>& ras_modes, int n_seeds,
                        const SamplingConfig& base, const WorldConfig& cfg, bool timing) {
  if (specs.empty()) throw std::invalid_argument("sweep_top_p: empty eval set");
  if (n_seeds < 1) throw std::invalid_argument("sweep_top_p: need at least one seed");
  std::string missing;
  for (int g : group_sizes)
    if (!models_by_g.count(g)) missing += (missing.empty() ? "" : ", ") + std::to_string(g);
  if (!missing.empty())
    throw std::runtime_error("sweep_top_p: missing checkpoint for group size(s) " + missing);

  SweepResult out;
  const int n_cases = static_cast<int>(specs.size()) * n_seeds;
  for (int g : group_sizes) {
    const ARModel& ar = *models_by_g.at(g);
    for (int ras : ras_modes) {
      for (double v : vs) {
        SamplingConfig scfg = base;
        scfg.top_p = v;
        if (!ras) scfg.threshold = 2.0;  // unreachable: plain nucleus sampling
        std::vector<Candidate> cands(n_cases);
        std::exception_ptr err = nullptr;
        const double t0 = omp_get_wtime();
#pragma omp parallel for schedule(dynamic)
        for (int idx = 0; idx < n_cases; ++idx) {
          try {
            const int si = idx / n_seeds;
            cands[idx] = synthesize(specs[si], ar, nar, g, scfg, cfg, 0,
                                    static_cast<uint64_t>(idx));
          } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
          }
        }
        if (err) std::rethrow_exception(err);
        const double t1 = omp_get_wtime();
        SweepRow row;
        row.v = v;
        row.group_size = g;
        row.ras = ras;
        for (const auto& c : cands) {
          row.mean_ter += c.ter;
          row.mean_sim += c.sim;
          row.cutoff_rate += c.hit_cutoff ? 1.0 : 0.0;
          row.ar_steps += c.ar_steps;
        }
        row.mean_ter /= n_cases;
        row.mean_sim /= n_cases;
        row.cutoff_rate /= n_cases;
        row.wall_ms = timing ? (t1 - t0) * 1000.0 : 0.0;
        out.rows.push_back(row);
      }
    }
  }
  return out;
}

StabilityReport stability_report(const std::vector<Candidate>& candidates) {
  StabilityReport rep;
  for (const auto& c : candidates) {
    rep.cutoff_rate += c.hit_cutoff ? 1.0 : 0.0;
    int longest = 0, run = 0, prev = -1;
    for (int t = c.prompt_frames; t < c.codes.frames; ++t) {
      const int code = c.codes.at(t, 0);
      run = (code == prev) ? run + 1 : 1;
      prev = code;
      longest = std::max(longest, run);
    }
    rep.longest_runs.push_back(longest);
    rep.max_run = std::max(rep.max_run, longest);
    rep.mean_run += longest;
  }
  if (!candidates.empty()) {
    rep.cutoff_rate /= static_cast<double>(candidates.size());
    rep.mean_run /= static_cast<double>(candidates.size());
  }
  return rep;
}

std::vector<ThroughputRow> throughput_report(const std::vector<PromptSpec>& specs,
                                             const std::map<int, const ARModel*>& models_by_g,
                                             const std::vector<int>& group_sizes,
                                             int fixed_frames, const SamplingConfig& base,
                                             const WorldConfig& cfg, int repeats) {
  if (std::find(group_sizes.begin(), group_sizes.end(), 1) == group_sizes.end())
    throw std::invalid_argument("throughput_report: group size 1 required as the baseline");
  std::vector<ThroughputRow> rows;
  for (int g : group_sizes) {
    if (!models_by_g.count(g))
      throw std::runtime_error("throughput_report: missing checkpoint for group size " +
                               std::to_string(g));
    if (fixed_frames % g != 0)
      throw std::invalid_argument("throughput_report: fixed_frames must be divisible by G");
    const ARModel& ar = *models_by_g.at(g);
    ThroughputRow row;
    row.group_size = g;
    const double t0 = omp_get_wtime();
    for (int rep = 0; rep < repeats; ++rep) {
      for (size_t si = 0; si < specs.size(); ++si) {
        PreparedPrompt p = prepare_prompt(specs[si], g, cfg);
        RngStream rng(base.seed, si);
        ARGenerateResult res =
            ar.generate(p.cond_text, p.grouped, base, rng, fixed_frames / g, false);
        if (rep == 0) row.ar_steps += res.steps;
      }
    }
    row.wall_ms = (omp_get_wtime() - t0) * 1000.0 / repeats;
    rows.push_back(row);
  }
  const ThroughputRow* g1 = nullptr;
  for (const auto& r : rows)
    if (r.group_size == 1) g1 = &r;
  for (auto& r : rows) {
    r.step_ratio_vs_g1 = static_cast<double>(r.ar_steps) / static_cast<double>(g1->ar_steps);
    r.speedup_vs_g1 = g1->wall_ms / r.wall_ms;
  }
  return rows;
}

void apply_thread_cap_from_env() {
  const char* env = std::getenv("CODEC_LM_THREADS");
  if (!env) return;
  const int n = std::atoi(env);
  if (n >= 1) omp_set_num_threads(n);
}

}  // namespace vle2
