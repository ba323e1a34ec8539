#include "vle2/pipeline.hpp"

#include <stdexcept>
#include <string>

#include "vle2/grouping.hpp"

namespace vle2 {

PromptSpec continuation_spec(const Utterance& u, const WorldConfig& cfg, int prompt_frames) {
  if (prompt_frames % cfg.expansion != 0)
    throw std::invalid_argument("continuation_spec: prompt frames must cover whole text tokens");
  if (prompt_frames <= 0 || prompt_frames >= u.codes.frames)
    throw std::invalid_argument("continuation_spec: prompt must be a proper prefix");
  const int prompt_tokens = prompt_frames / cfg.expansion;
  PromptSpec s;
  s.mode = PromptMode::Continuation;
  s.prompt_text.assign(u.text.begin(), u.text.begin() + prompt_tokens);
  s.target_text.assign(u.text.begin() + prompt_tokens, u.text.end());
  s.prompt_codes = u.codes.slice(0, prompt_frames);
  return s;
}

PromptSpec reference_spec(const Utterance& prompt_utt, const Utterance& target_utt) {
  PromptSpec s;
  s.mode = PromptMode::Reference;
  s.prompt_text = prompt_utt.text;
  s.prompt_codes = prompt_utt.codes;
  s.target_text = target_utt.text;
  return s;
}

PreparedPrompt prepare_prompt(const PromptSpec& spec, int group_size, const WorldConfig& cfg) {
  if (spec.prompt_codes.frames == 0) throw std::invalid_argument("synthesize: empty prompt");
  PreparedPrompt p;
  p.cond_text = spec.prompt_text;
  p.cond_text.insert(p.cond_text.end(), spec.target_text.begin(), spec.target_text.end());
  const std::vector<int> prompt_c0 = spec.prompt_codes.first_quantizer();
  p.grouped = partition_into_groups(prompt_c0, group_size);
  if (p.grouped.clipped % cfg.expansion != 0)
    throw std::runtime_error("synthesize: grouping clip does not align with whole text tokens");
  p.clip_tokens = p.grouped.clipped / cfg.expansion;
  p.prompt_matrix = spec.prompt_codes.slice(p.grouped.clipped, spec.prompt_codes.frames);
  return p;
}

Candidate synthesize(const PromptSpec& spec, const ARModel& ar, const NARModel& nar,
                     int group_size, const SamplingConfig& scfg, const WorldConfig& cfg,
                     int max_groups, uint64_t stream) {
  if (ar.cfg.group_size != group_size)
    throw std::invalid_argument("synthesize: group size mismatch (checkpoint G=" +
                                std::to_string(ar.cfg.group_size) + ", requested G=" +
                                std::to_string(group_size) + ")");
  if (ar.cfg.text_vocab != nar.cfg.text_vocab || ar.cfg.code_vocab != nar.cfg.code_vocab)
    throw std::invalid_argument("synthesize: AR/NAR vocab mismatch");
  if (ar.cfg.text_vocab != cfg.text_vocab || ar.cfg.code_vocab != cfg.code_vocab)
    throw std::invalid_argument("synthesize: model vocab does not match world config");

  PreparedPrompt p = prepare_prompt(spec, group_size, cfg);
  if (max_groups <= 0) {
    const int ref_frames = cfg.expansion * static_cast<int>(spec.target_text.size());
    max_groups = std::max(1, 4 * ((ref_frames + group_size - 1) / group_size));
  }

  RngStream rng(scfg.seed, stream);
  ARGenerateResult gen = ar.generate(p.cond_text, p.grouped, scfg, rng, max_groups);

  CodeMatrix full = nar.greedy_infer(p.cond_text, p.prompt_matrix, gen.codes);

  // metrics over the whole utterance, references aligned by the clip count
  std::vector<int> prompt_text_aligned(spec.prompt_text.begin() + p.clip_tokens,
                                       spec.prompt_text.end());
  const int offset = infer_speaker_offset(p.prompt_matrix, prompt_text_aligned, cfg);
  const std::vector<int> decoded = decode_text(full, offset, cfg);
  std::vector<int> ref = p.cond_text;
  ref.erase(ref.begin(), ref.begin() + p.clip_tokens);

  Candidate c;
  c.codes = std::move(full);
  c.ter = token_error_rate(decoded, ref);
  c.sim = surrogate_sim(c.codes, decoded, offset, cfg);
  c.hit_cutoff = gen.hit_cutoff;
  c.prompt_frames = p.prompt_matrix.frames;
  const long long t_out = static_cast<long long>(gen.codes.size());
  c.ar_steps = (t_out + group_size - 1) / group_size;
  return c;
}

std::vector<Candidate> synthesize_many(const PromptSpec& spec, const ARModel& ar,
                                       const NARModel& nar, int group_size,
                                       const SamplingConfig& scfg, const WorldConfig& cfg,
                                       int n_samples, int max_groups) {
  if (n_samples < 1) throw std::invalid_argument("synthesize_many: need at least one sample");
  std::vector<Candidate> out(n_samples);
  std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n_samples; ++i) {
    try {
      out[i] = synthesize(spec, ar, nar, group_size, scfg, cfg, max_groups,
                          static_cast<uint64_t>(i));
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

size_t sort_candidates(const std::vector<Candidate>& cands) {
  if (cands.empty()) throw std::invalid_argument("sort_candidates: empty candidate list");
  size_t best = 0;
  for (size_t i = 1; i < cands.size(); ++i) {
    const double a0 = std::min(cands[i].sim, 0.3), b0 = std::min(cands[best].sim, 0.3);
    const double a1 = 1.0 - cands[i].ter, b1 = 1.0 - cands[best].ter;
    if (a0 > b0 || (a0 == b0 && a1 > b1)) best = i;
  }
  return best;
}

std::pair<double, double> metric_wise_max(const std::vector<Candidate>& cands) {
  if (cands.empty()) throw std::invalid_argument("metric_wise_max: empty candidate list");
  double best_sim = cands[0].sim, best_ter = cands[0].ter;
  for (const auto& c : cands) {
    best_sim = std::max(best_sim, c.sim);
    best_ter = std::min(best_ter, c.ter);
  }
  return {best_sim, best_ter};
}

}  // namespace vle2
