#pragma once

#include <map>
#include <string>
#include <vector>

#include "vle2/pipeline.hpp"

namespace vle2 {

/// Continuation specs for every utterance, or reference specs rotating
/// within each speaker ((i-1)-th utterance prompts the i-th; the first is
/// prompted by the last). Speakers with a single utterance are dropped in
/// reference mode.
std::vector<PromptSpec> build_eval_specs(const std::vector<Utterance>& corpus, PromptMode mode,
                                         const WorldConfig& cfg, int prompt_frames = 12);

struct SweepRow {
  double v = 0.0;
  int group_size = 1;
  int ras = 0;
  double mean_ter = 0.0;
  double mean_sim = 0.0;
  double cutoff_rate = 0.0;
  long long ar_steps = 0;
  double wall_ms = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::string to_csv() const;  // header + one row per cell, 6-decimal reals
};

/// Full factorial sweep over (G, ras on/off, v); per-cell means over
/// specs x seeds. RAS off runs the same path with an unreachable threshold.
/// Wall times are measured only when `timing` is set, keeping default CSV
/// output byte-reproducible.
SweepResult sweep_top_p(const std::vector<PromptSpec>& specs,
                        const std::map<int, const ARModel*>& models_by_g, const NARModel& nar,
                        const std::vector<int>& group_sizes, const std::vector<double>& vs,
                        const std::vector<int>& ras_modes, int n_seeds,
                        const SamplingConfig& base, const WorldConfig& cfg, bool timing = false);

struct StabilityReport {
  double cutoff_rate = 0.0;
  std::vector<int> longest_runs;  // per candidate, over the generated region
  int max_run = 0;
  double mean_run = 0.0;
};

StabilityReport stability_report(const std::vector<Candidate>& candidates);

struct ThroughputRow {
  int group_size = 1;
  long long ar_steps = 0;
  double wall_ms = 0.0;
  double step_ratio_vs_g1 = 0.0;
  double speedup_vs_g1 = 0.0;
};

/// Fixed-length AR generation (EOS ignored) so the step-count law is exact:
/// steps = fixed_frames / G per utterance.
std::vector<ThroughputRow> throughput_report(const std::vector<PromptSpec>& specs,
                                             const std::map<int, const ARModel*>& models_by_g,
                                             const std::vector<int>& group_sizes,
                                             int fixed_frames, const SamplingConfig& base,
                                             const WorldConfig& cfg, int repeats = 1);

/// Applies the CODEC_LM_THREADS cap (default: all logical cores).
void apply_thread_cap_from_env();

}  // namespace vle2
