#include "vle2/world.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "vle2/rng.hpp"
#include "json.hpp"

namespace vle2 {

namespace {

int pos_mod(long long v, int m) {
  int r = static_cast<int>(v % m);
  return r < 0 ? r + m : r;
}

// modular inverse via extended Euclid (exists: gcd(a, m) = 1 is validated)
int mod_inverse(int a, int m) {
  int t = 0, new_t = 1, r = m, new_r = a % m;
  while (new_r != 0) {
    int q = r / new_r;
    t -= q * new_t;
    std::swap(t, new_t);
    r -= q * new_r;
    std::swap(r, new_r);
  }
  if (r != 1) throw std::invalid_argument("mod_inverse: not invertible");
  return t < 0 ? t + m : t;
}

}  // namespace

void WorldConfig::validate() const {
  if (quantizers != 8) throw std::invalid_argument("world: quantizers must be 8");
  if (code_vocab <= text_vocab) throw std::invalid_argument("world: code_vocab must exceed text_vocab");
  if (std::gcd(7, code_vocab) != 1)
    throw std::invalid_argument("world: code_vocab must be coprime with 7");
  if (expansion < 1 || speakers < 1 || text_vocab < 2)
    throw std::invalid_argument("world: invalid config");
}

std::vector<int> CodeMatrix::first_quantizer() const {
  std::vector<int> out(frames);
  for (int t = 0; t < frames; ++t) out[t] = at(t, 0);
  return out;
}

CodeMatrix CodeMatrix::slice(int from, int to) const {
  CodeMatrix out(to - from, quantizers);
  for (int t = from; t < to; ++t)
    for (int j = 0; j < quantizers; ++j) out.at(t - from, j) = at(t, j);
  return out;
}

int speaker_offset(int speaker, const WorldConfig& cfg) {
  return pos_mod(3LL * speaker + 1, cfg.code_vocab);
}

CodeMatrix synth_utterance(std::span<const int> text, int speaker, const WorldConfig& cfg) {
  cfg.validate();
  if (speaker < 0 || speaker >= cfg.speakers)
    throw std::invalid_argument("synth_utterance: speaker " + std::to_string(speaker) +
                                " out of range [0," + std::to_string(cfg.speakers) + ")");
  for (size_t i = 0; i < text.size(); ++i)
    if (text[i] < 0 || text[i] >= cfg.text_vocab)
      throw std::invalid_argument("synth_utterance: text token " + std::to_string(text[i]) +
                                  " out of range at position " + std::to_string(i));
  const int T = cfg.expansion * static_cast<int>(text.size());
  const int off = speaker_offset(speaker, cfg);
  CodeMatrix m(T, cfg.quantizers);
  for (int t = 0; t < T; ++t) {
    const int x = text[t / cfg.expansion];
    const int phase = t % cfg.expansion;
    for (int j = 0; j < cfg.quantizers; ++j)
      m.at(t, j) = pos_mod(7LL * x + 5LL * phase + 11LL * j + off, cfg.code_vocab);
  }
  return m;
}

int infer_speaker_offset(const CodeMatrix& prompt_codes, std::span<const int> prompt_text,
                         const WorldConfig& cfg) {
  if (prompt_codes.frames == 0) throw std::invalid_argument("infer_speaker_offset: empty prompt");
  if (static_cast<int>(prompt_text.size()) * cfg.expansion < prompt_codes.frames)
    throw std::invalid_argument("infer_speaker_offset: prompt text shorter than prompt codes");
  std::vector<int> votes(cfg.code_vocab, 0);
  for (int t = 0; t < prompt_codes.frames; ++t) {
    const int x = prompt_text[t / cfg.expansion];
    const int phase = t % cfg.expansion;
    for (int j = 0; j < prompt_codes.quantizers; ++j) {
      const int code = prompt_codes.at(t, j);
      if (code < 0 || code >= cfg.code_vocab) continue;  // skip EOS padding
      votes[pos_mod(code - 7LL * x - 5LL * phase - 11LL * j, cfg.code_vocab)]++;
    }
  }
  int best = 0;
  for (int o = 1; o < cfg.code_vocab; ++o)
    if (votes[o] > votes[best]) best = o;
  return best;
}

std::vector<int> decode_text(const CodeMatrix& codes, int offset, const WorldConfig& cfg,
                             int max_quantizers) {
  const int inv7 = mod_inverse(7 % cfg.code_vocab, cfg.code_vocab);
  const int jmax = (max_quantizers <= 0 || max_quantizers > codes.quantizers)
                       ? codes.quantizers
                       : max_quantizers;
  const int cells = (codes.frames + cfg.expansion - 1) / cfg.expansion;
  std::vector<int> out(cells, cfg.garbage_token());
  for (int c = 0; c < cells; ++c) {
    std::vector<int> votes(cfg.text_vocab, 0);
    int any = 0;
    const int t_end = std::min((c + 1) * cfg.expansion, codes.frames);
    for (int t = c * cfg.expansion; t < t_end; ++t) {
      const int phase = t % cfg.expansion;
      for (int j = 0; j < jmax; ++j) {
        const int code = codes.at(t, j);
        if (code < 0 || code >= cfg.code_vocab) continue;
        const int x =
            pos_mod(static_cast<long long>(inv7) *
                        pos_mod(code - 5LL * phase - 11LL * j - offset, cfg.code_vocab),
                    cfg.code_vocab);
        if (x >= cfg.text_vocab) continue;  // impossible under the rule: discard
        votes[x]++;
        any = 1;
      }
    }
    if (!any) continue;
    int best = 0;
    for (int x = 1; x < cfg.text_vocab; ++x)
      if (votes[x] > votes[best]) best = x;
    out[c] = best;
  }
  return out;
}

double token_error_rate(std::span<const int> hyp, std::span<const int> ref) {
  const size_t n = ref.size(), m = hyp.size();
  if (n == 0) return static_cast<double>(m);
  std::vector<int> prev(m + 1), cur(m + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[m]) / static_cast<double>(n);
}

double surrogate_sim(const CodeMatrix& gen, std::span<const int> decoded_text, int prompt_offset,
                     const WorldConfig& cfg) {
  long long total = 0, match = 0;
  for (int t = 0; t < gen.frames; ++t) {
    const size_t cell = static_cast<size_t>(t / cfg.expansion);
    const int x = cell < decoded_text.size() ? decoded_text[cell] : cfg.garbage_token();
    const int phase = t % cfg.expansion;
    for (int j = 0; j < gen.quantizers; ++j) {
      const int code = gen.at(t, j);
      if (code < 0 || code >= cfg.code_vocab) continue;
      ++total;
      if (pos_mod(code - 7LL * x - 5LL * phase - 11LL * j, cfg.code_vocab) == prompt_offset)
        ++match;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(match) / static_cast<double>(total);
}

bool held_out_text(std::span<const int> text) {
  // FNV-1a over the token values
  uint64_t h = 1469598103934665603ull;
  for (int t : text) {
    h ^= static_cast<uint64_t>(static_cast<uint32_t>(t));
    h *= 1099511628211ull;
  }
  return h % 10 == 0;
}

bool held_out_speaker(int speaker, const WorldConfig& cfg) {
  const int eval_speakers = std::max(1, cfg.speakers / 4);
  return speaker >= cfg.speakers - eval_speakers;
}

std::vector<Utterance> make_corpus(const WorldConfig& cfg, int n_utts, int len_lo, int len_hi,
                                   uint64_t seed, CorpusSplit split) {
  cfg.validate();
  if (n_utts < 1) throw std::invalid_argument("make_corpus: n_utts must be >= 1");
  if (len_lo < 1 || len_hi < len_lo) throw std::invalid_argument("make_corpus: bad length range");
  std::vector<Utterance> out;
  out.reserve(n_utts);
  for (int i = 0; i < n_utts; ++i) {
    RngStream rng(seed, static_cast<uint64_t>(i));
    Utterance u;
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw std::runtime_error("make_corpus: rejection sampling stuck");
      const int len = rng.uniform_int(len_lo, len_hi);
      u.text.resize(len);
      for (int& t : u.text) t = rng.uniform_int(0, cfg.text_vocab - 1);
      u.speaker = rng.uniform_int(0, cfg.speakers - 1);
      if (split == CorpusSplit::Train &&
          (held_out_speaker(u.speaker, cfg) || held_out_text(u.text)))
        continue;
      if (split == CorpusSplit::Eval &&
          !(held_out_speaker(u.speaker, cfg) && held_out_text(u.text)))
        continue;
      break;
    }
    u.codes = synth_utterance(u.text, u.speaker, cfg);
    out.push_back(std::move(u));
  }
  return out;
}

void write_corpus_jsonl(const std::string& path, const std::vector<Utterance>& corpus) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_corpus_jsonl: cannot open " + path);
  for (const auto& u : corpus) {
    nlohmann::json j;
    j["text"] = u.text;
    j["speaker"] = u.speaker;
    std::vector<std::vector<int>> rows(u.codes.frames);
    for (int t = 0; t < u.codes.frames; ++t) {
      rows[t].resize(u.codes.quantizers);
      for (int q = 0; q < u.codes.quantizers; ++q) rows[t][q] = u.codes.at(t, q);
    }
    j["codes"] = rows;
    f << j.dump() << "\n";
  }
}

std::vector<Utterance> read_corpus_jsonl(const std::string& path, const WorldConfig& cfg) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_corpus_jsonl: cannot open " + path);
  std::vector<Utterance> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    Utterance u;
    u.text = j.at("text").get<std::vector<int>>();
    u.speaker = j.at("speaker").get<int>();
    const auto rows = j.at("codes").get<std::vector<std::vector<int>>>();
    u.codes = CodeMatrix(static_cast<int>(rows.size()), cfg.quantizers);
    for (size_t t = 0; t < rows.size(); ++t) {
      if (static_cast<int>(rows[t].size()) != cfg.quantizers)
        throw std::runtime_error("read_corpus_jsonl: bad row width at line " +
                                 std::to_string(lineno));
      for (int q = 0; q < cfg.quantizers; ++q) u.codes.at(static_cast<int>(t), q) = rows[t][q];
    }
    out.push_back(std::move(u));
  }
  return out;
}

}  // namespace vle2
