#pragma once

#include <cstdint>
#include <vector>

#include "vle2/ar_model.hpp"
#include "vle2/nar_model.hpp"
#include "vle2/sampler.hpp"
#include "vle2/world.hpp"

namespace vle2 {

enum class PromptMode { Continuation, Reference };

struct PromptSpec {
  PromptMode mode = PromptMode::Continuation;
  std::vector<int> prompt_text;
  CodeMatrix prompt_codes;
  std::vector<int> target_text;
};

struct Candidate {
  CodeMatrix codes;  // whole utterance: clipped prompt ++ generation
  double sim = 0.0;
  double ter = 0.0;
  bool hit_cutoff = false;
  int prompt_frames = 0;  // after grouping clip
  long long ar_steps = 0; // ceil(T_out / G)
};

/// Continuation: the utterance's own prefix (default 12 frames) with the full
/// transcript as the text condition.
PromptSpec continuation_spec(const Utterance& u, const WorldConfig& cfg, int prompt_frames = 12);

/// Reference: a different utterance of the same speaker as the prompt.
PromptSpec reference_spec(const Utterance& prompt_utt, const Utterance& target_utt);

/// Prompt after grouping: the text condition (prompt ++ target transcript),
/// the clipped first-quantizer prompt groups, and the matching acoustic
/// condition rows. clip_tokens counts whole text tokens removed by the clip.
struct PreparedPrompt {
  std::vector<int> cond_text;
  GroupedCodes grouped;
  CodeMatrix prompt_matrix;
  int clip_tokens = 0;
};

PreparedPrompt prepare_prompt(const PromptSpec& spec, int group_size, const WorldConfig& cfg);

/// Full zero-shot synthesis: AR first-quantizer generation with
/// repetition-aware sampling, seven-pass greedy NAR fill, surrogate metrics
/// over the whole utterance. `stream` selects the RNG stream (sample i of a
/// multi-sample run uses stream i, i.e. seed ^ i). max_groups <= 0 selects
/// the default cutoff of 4x the reference length in groups.
Candidate synthesize(const PromptSpec& spec, const ARModel& ar, const NARModel& nar,
                     int group_size, const SamplingConfig& scfg, const WorldConfig& cfg,
                     int max_groups = 0, uint64_t stream = 0);

std::vector<Candidate> synthesize_many(const PromptSpec& spec, const ARModel& ar,
                                       const NARModel& nar, int group_size,
                                       const SamplingConfig& scfg, const WorldConfig& cfg,
                                       int n_samples, int max_groups = 0);

/// Lexicographic argmax of [min(sim, 0.3), 1 - ter]; ties break to the lowest
/// candidate index. Returns the winning index.
size_t sort_candidates(const std::vector<Candidate>& cands);

/// Each metric maximized independently: (max sim, min ter).
std::pair<double, double> metric_wise_max(const std::vector<Candidate>& cands);

}  // namespace vle2
