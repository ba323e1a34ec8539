#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vle2 {

/// Deterministic stand-in for the audio codec + evaluation stack. Codes are
/// an affine function of (text token, frame phase, quantizer, speaker), so
/// text and speaker can be recovered exactly from clean codes.
struct WorldConfig {
  int text_vocab = 32;  // V_x; token V_x is the reserved GARBAGE token
  int code_vocab = 64;  // V_c; code V_c is EOS_CODE
  int quantizers = 8;   // J, fixed
  int expansion = 4;    // frames per text token
  int speakers = 16;

  int garbage_token() const { return text_vocab; }
  int eos_code() const { return code_vocab; }
  void validate() const;
};

struct CodeMatrix {
  int frames = 0;
  int quantizers = 8;
  std::vector<int> codes;  // row-major frames x quantizers

  CodeMatrix() = default;
  CodeMatrix(int t, int j) : frames(t), quantizers(j), codes(static_cast<size_t>(t) * j, 0) {}
  int& at(int t, int j) { return codes[static_cast<size_t>(t) * quantizers + j]; }
  int at(int t, int j) const { return codes[static_cast<size_t>(t) * quantizers + j]; }
  std::vector<int> first_quantizer() const;
  /// Rows [from, to) as a new matrix.
  CodeMatrix slice(int from, int to) const;
};

struct Utterance {
  std::vector<int> text;
  int speaker = 0;
  CodeMatrix codes;
};

int speaker_offset(int speaker, const WorldConfig& cfg);

CodeMatrix synth_utterance(std::span<const int> text, int speaker, const WorldConfig& cfg);

/// Majority vote over all (frame, quantizer) entries for the speaker offset
/// implied by the generation rule. Throws on an empty prompt.
int infer_speaker_offset(const CodeMatrix& prompt_codes, std::span<const int> prompt_text,
                         const WorldConfig& cfg);

/// Per text-position majority vote over the expansion x quantizers cell.
/// Garbage codes never throw; unresolvable cells decode to GARBAGE.
/// `max_quantizers` restricts the vote to the first rows (training-time
/// diagnostics on AR-only output); <= 0 means all rows.
std::vector<int> decode_text(const CodeMatrix& codes, int offset, const WorldConfig& cfg,
                             int max_quantizers = 0);

/// Levenshtein distance / len(ref); empty ref and hyp -> 0;
/// empty ref, non-empty hyp -> len(hyp).
double token_error_rate(std::span<const int> hyp, std::span<const int> ref);

/// Fraction of non-EOS entries whose implied offset (given the decoded text)
/// matches the prompt offset. Empty matrix -> 0.
double surrogate_sim(const CodeMatrix& gen, std::span<const int> decoded_text, int prompt_offset,
                     const WorldConfig& cfg);

enum class CorpusSplit { All, Train, Eval };

/// Text patterns reserved for evaluation (~10%).
bool held_out_text(std::span<const int> text);
/// Speakers reserved for evaluation (the last quarter).
bool held_out_speaker(int speaker, const WorldConfig& cfg);

/// Uniform texts/speakers driven by per-utterance streams (seed ^ index).
/// Train rejects held-out speakers and texts; Eval requires both held out.
std::vector<Utterance> make_corpus(const WorldConfig& cfg, int n_utts, int len_lo, int len_hi,
                                   uint64_t seed, CorpusSplit split = CorpusSplit::Train);

// Corpus JSONL: one object per line, keys `codes`, `speaker`, `text`.
void write_corpus_jsonl(const std::string& path, const std::vector<Utterance>& corpus);
std::vector<Utterance> read_corpus_jsonl(const std::string& path, const WorldConfig& cfg);

}  // namespace vle2
