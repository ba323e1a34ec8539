#include "vle2/train.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "vle2/pipeline.hpp"

namespace vle2 {

namespace {

std::vector<int> epoch_order(size_t n, RngStream& rng) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (size_t i = n; i > 1; --i) {
    const size_t j = rng.next_below(i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

void write_log(const std::string& path, const std::vector<TrainRow>& rows) {
  if (path.empty()) return;
  std::ofstream f(path, std::ios::binary);
  f << "step,loss,lr,val_ter\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%.6f,%.6f,%.6f\n", static_cast<long long>(r.step),
                  r.loss, r.lr, r.val_ter);
    f << buf;
  }
}

}  // namespace

double ar_validation_ter(const ARModel& model, const std::vector<Utterance>& val,
                         const WorldConfig& cfg, int prompt_frames, int max_utts) {
  SamplingConfig greedy;
  greedy.top_p = 0.0;
  greedy.threshold = 2.0;  // argmax only: deterministic validation
  double sum = 0.0;
  int n = 0;
  for (const auto& u : val) {
    if (n >= max_utts) break;
    if (u.codes.frames <= prompt_frames) continue;
    PromptSpec spec = continuation_spec(u, cfg, prompt_frames);
    PreparedPrompt p = prepare_prompt(spec, model.cfg.group_size, cfg);
    const int ref_frames = cfg.expansion * static_cast<int>(spec.target_text.size());
    const int max_groups =
        std::max(1, 4 * ((ref_frames + model.cfg.group_size - 1) / model.cfg.group_size));
    RngStream rng(0, n);
    ARGenerateResult gen = model.generate(p.cond_text, p.grouped, greedy, rng, max_groups);

    std::vector<int> c0 = p.prompt_matrix.first_quantizer();
    c0.insert(c0.end(), gen.codes.begin(), gen.codes.end());
    CodeMatrix m(static_cast<int>(c0.size()), cfg.quantizers);
    for (int t = 0; t < m.frames; ++t) m.at(t, 0) = c0[t];

    std::vector<int> prompt_text_aligned(spec.prompt_text.begin() + p.clip_tokens,
                                         spec.prompt_text.end());
    const int offset = infer_speaker_offset(p.prompt_matrix, prompt_text_aligned, cfg);
    const std::vector<int> decoded = decode_text(m, offset, cfg, /*max_quantizers=*/1);
    std::vector<int> ref = p.cond_text;
    ref.erase(ref.begin(), ref.begin() + p.clip_tokens);
    sum += token_error_rate(decoded, ref);
    ++n;
  }
  return n == 0 ? -1.0 : sum / n;
}

double nar_validation_ter(const NARModel& model, const std::vector<Utterance>& val,
                          const WorldConfig& cfg, int prompt_frames, int max_utts) {
  double sum = 0.0;
  int n = 0;
  for (const auto& u : val) {
    if (n >= max_utts) break;
    if (u.codes.frames <= prompt_frames) continue;
    const CodeMatrix prompt = u.codes.slice(0, prompt_frames);
    std::vector<int> c0;
    for (int t = prompt_frames; t < u.codes.frames; ++t) c0.push_back(u.codes.at(t, 0));
    const CodeMatrix full = model.greedy_infer(u.text, prompt, c0);
    const int offset = infer_speaker_offset(prompt, u.text, cfg);
    const std::vector<int> decoded = decode_text(full, offset, cfg);
    sum += token_error_rate(decoded, u.text);
    ++n;
  }
  return n == 0 ? -1.0 : sum / n;
}

std::vector<TrainRow> train_ar(ARModel& model, const std::vector<Utterance>& corpus,
                               const OptimizerState& opt, const TrainOptions& topt,
                               const std::vector<Utterance>* val, const WorldConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("train_ar: empty corpus");
  AdamWT<float> adamw(opt);
  auto params = model.params();
  RngStream shuffle_rng(topt.seed, 0x73687566ull);
  std::vector<int> order;
  size_t cursor = 0;
  std::vector<TrainRow> log;
  for (int64_t step = 0; step < topt.steps; ++step) {
    std::vector<ARSample> batch;
    for (int b = 0; b < topt.batch_size; ++b) {
      if (cursor >= order.size()) {
        order = epoch_order(corpus.size(), shuffle_rng);
        cursor = 0;
      }
      const Utterance& u = corpus[order[cursor++]];
      batch.push_back({u.text, u.codes.first_quantizer()});
    }
    model.zero_grads();
    const double loss = model.loss(batch, true);
    adamw.step(params);
    if ((step + 1) % topt.log_every == 0 || step + 1 == topt.steps) {
      TrainRow row;
      row.step = step + 1;
      row.loss = loss;
      row.lr = lr_at_step(step, adamw.state);
      if (val)
        row.val_ter = ar_validation_ter(model, *val, cfg, topt.prompt_frames, topt.val_utts);
      log.push_back(row);
      if (!topt.quiet)
        std::fprintf(stderr, "[train-ar G=%d] step %lld loss %.5f lr %.6f val_ter %.4f\n",
                     model.cfg.group_size, static_cast<long long>(row.step), row.loss, row.lr,
                     row.val_ter);
    }
  }
  write_log(topt.csv_path, log);
  return log;
}

std::vector<TrainRow> train_nar(NARModel& model, const std::vector<Utterance>& corpus,
                                const OptimizerState& opt, const TrainOptions& topt,
                                const std::vector<Utterance>* val, const WorldConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("train_nar: empty corpus");
  AdamWT<float> adamw(opt);
  auto params = model.params();
  RngStream shuffle_rng(topt.seed, 0x73687566ull);
  RngStream split_rng(topt.seed, 0x73706c69ull);
  std::vector<int> order;
  size_t cursor = 0;
  std::vector<TrainRow> log;
  for (int64_t step = 0; step < topt.steps; ++step) {
    std::vector<Utterance> batch;
    for (int b = 0; b < topt.batch_size; ++b) {
      if (cursor >= order.size()) {
        order = epoch_order(corpus.size(), shuffle_rng);
        cursor = 0;
      }
      batch.push_back(corpus[order[cursor++]]);
    }
    model.zero_grads();
    const double loss = model.loss(batch, split_rng, true);
    adamw.step(params);
    if ((step + 1) % topt.log_every == 0 || step + 1 == topt.steps) {
      TrainRow row;
      row.step = step + 1;
      row.loss = loss;
      row.lr = lr_at_step(step, adamw.state);
      if (val)
        row.val_ter = nar_validation_ter(model, *val, cfg, topt.prompt_frames, topt.val_utts);
      log.push_back(row);
      if (!topt.quiet)
        std::fprintf(stderr, "[train-nar] step %lld loss %.5f lr %.6f val_ter %.4f\n",
                     static_cast<long long>(row.step), row.loss, row.lr, row.val_ter);
    }
  }
  write_log(topt.csv_path, log);
  return log;
}

}  // namespace vle2
