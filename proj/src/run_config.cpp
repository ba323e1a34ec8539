#include "vle2/run_config.hpp"

#include <fstream>
#include <stdexcept>

namespace vle2 {

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) throw std::invalid_argument("config: unknown key '" + where + key + "'");
  }
}

template <class T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  reject_unknown(j, {"world", "model", "optim", "sampling", "corpus", "out_dir", "seed"}, "");
  if (j.contains("world")) {
    const auto& w = j.at("world");
    reject_unknown(w, {"text_vocab", "code_vocab", "quantizers", "expansion", "speakers"},
                   "world.");
    maybe(w, "text_vocab", c.world.text_vocab);
    maybe(w, "code_vocab", c.world.code_vocab);
    maybe(w, "quantizers", c.world.quantizers);
    maybe(w, "expansion", c.world.expansion);
    maybe(w, "speakers", c.world.speakers);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    reject_unknown(m, {"d", "blocks", "heads", "max_text_pos", "max_code_pos"}, "model.");
    maybe(m, "d", c.model.d);
    maybe(m, "blocks", c.model.blocks);
    maybe(m, "heads", c.model.heads);
    maybe(m, "max_text_pos", c.model.max_text_pos);
    maybe(m, "max_code_pos", c.model.max_code_pos);
  }
  if (j.contains("optim")) {
    const auto& o = j.at("optim");
    reject_unknown(o,
                   {"peak_lr", "warmup_steps", "total_steps", "beta1", "beta2", "eps",
                    "weight_decay", "batch_size"},
                   "optim.");
    maybe(o, "peak_lr", c.optim.peak_lr);
    maybe(o, "warmup_steps", c.optim.warmup_steps);
    maybe(o, "total_steps", c.optim.total_steps);
    maybe(o, "beta1", c.optim.beta1);
    maybe(o, "beta2", c.optim.beta2);
    maybe(o, "eps", c.optim.eps);
    maybe(o, "weight_decay", c.optim.weight_decay);
    maybe(o, "batch_size", c.optim.batch_size);
  }
  if (j.contains("sampling")) {
    const auto& s = j.at("sampling");
    reject_unknown(s, {"top_p", "window", "threshold"}, "sampling.");
    maybe(s, "top_p", c.sampling.top_p);
    maybe(s, "window", c.sampling.window);
    maybe(s, "threshold", c.sampling.threshold);
  }
  if (j.contains("corpus")) {
    const auto& k = j.at("corpus");
    reject_unknown(k, {"n_utts", "len_lo", "len_hi"}, "corpus.");
    maybe(k, "n_utts", c.corpus.n_utts);
    maybe(k, "len_lo", c.corpus.len_lo);
    maybe(k, "len_hi", c.corpus.len_hi);
  }
  maybe(j, "out_dir", c.out_dir);
  maybe(j, "seed", c.seed);
  c.validate();
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json j;
  f >> j;
  return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["world"] = {{"text_vocab", world.text_vocab},
                {"code_vocab", world.code_vocab},
                {"quantizers", world.quantizers},
                {"expansion", world.expansion},
                {"speakers", world.speakers}};
  j["model"] = {{"d", model.d},
                {"blocks", model.blocks},
                {"heads", model.heads},
                {"max_text_pos", model.max_text_pos},
                {"max_code_pos", model.max_code_pos}};
  j["optim"] = {{"peak_lr", optim.peak_lr},
                {"warmup_steps", optim.warmup_steps},
                {"total_steps", optim.total_steps},
                {"beta1", optim.beta1},
                {"beta2", optim.beta2},
                {"eps", optim.eps},
                {"weight_decay", optim.weight_decay},
                {"batch_size", optim.batch_size}};
  j["sampling"] = {{"top_p", sampling.top_p},
                   {"window", sampling.window},
                   {"threshold", sampling.threshold}};
  j["corpus"] = {{"n_utts", corpus.n_utts},
                 {"len_lo", corpus.len_lo},
                 {"len_hi", corpus.len_hi}};
  j["out_dir"] = out_dir;
  j["seed"] = seed;
  return j;
}

void RunConfig::validate() const {
  world.validate();
  if (model.d < 2 || model.blocks < 1 || model.heads < 1 || model.d % model.heads != 0)
    throw std::invalid_argument("config: bad model dims");
  if (optim.warmup_steps >= optim.total_steps)
    throw std::invalid_argument("config: warmup_steps must be < total_steps");
  if (optim.batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (corpus.n_utts < 1 || corpus.len_lo < 1 || corpus.len_hi < corpus.len_lo)
    throw std::invalid_argument("config: bad corpus settings");
  if (sampling.window < 1 || sampling.top_p < 0 || sampling.top_p > 1)
    throw std::invalid_argument("config: bad sampling defaults");
}

std::string RunConfig::world_hash() const {
  const std::string s = to_json().at("world").dump();
  uint64_t h = 1469598103934665603ull;
  for (char ch : s) {
    h ^= static_cast<uint8_t>(ch);
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace vle2
