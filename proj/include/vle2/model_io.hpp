#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "vle2/ar_model.hpp"
#include "vle2/checkpoint.hpp"
#include "vle2/nar_model.hpp"

namespace vle2 {

inline void copy_params_from_checkpoint(const LoadedCheckpoint& ck,
                                        const std::vector<ParamT<float>*>& params) {
  for (auto* p : params) {
    const LoadedTensor& t = ck.find(p->name);
    if (t.shape != p->value.shape)
      throw std::runtime_error("checkpoint: shape mismatch for tensor '" + p->name + "'");
    p->value.data = t.data;
  }
}

inline nlohmann::json model_meta(const std::string& kind, int group_size, int text_vocab,
                                 int code_vocab, int d, int blocks, int heads, int max_text_pos,
                                 int max_code_pos, int64_t step, const std::string& world_hash) {
  nlohmann::json m;
  m["kind"] = kind;
  m["group_size"] = group_size;
  m["text_vocab"] = text_vocab;
  m["code_vocab"] = code_vocab;
  m["d"] = d;
  m["blocks"] = blocks;
  m["heads"] = heads;
  m["max_text_pos"] = max_text_pos;
  m["max_code_pos"] = max_code_pos;
  m["step"] = step;
  m["world_hash"] = world_hash;
  return m;
}

inline void save_ar(const std::string& path, ARModel& m, int64_t step,
                    const std::string& world_hash) {
  nlohmann::json meta =
      model_meta("AR", m.cfg.group_size, m.cfg.text_vocab, m.cfg.code_vocab, m.cfg.d,
                 m.cfg.blocks, m.cfg.heads, m.cfg.max_text_pos, m.cfg.max_code_pos, step,
                 world_hash);
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (auto* p : m.params()) tensors.emplace_back(p->name, &p->value);
  save_checkpoint(path, meta, tensors);
}

inline void save_nar(const std::string& path, NARModel& m, int64_t step,
                     const std::string& world_hash) {
  nlohmann::json meta = model_meta("NAR", 0, m.cfg.text_vocab, m.cfg.code_vocab, m.cfg.d,
                                   m.cfg.blocks, m.cfg.heads, m.cfg.max_text_pos,
                                   m.cfg.max_code_pos, step, world_hash);
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (auto* p : m.params()) tensors.emplace_back(p->name, &p->value);
  save_checkpoint(path, meta, tensors);
}

inline void require_kind(const LoadedCheckpoint& ck, const std::string& kind) {
  const std::string found = ck.meta.at("kind").get<std::string>();
  if (found != kind)
    throw std::runtime_error("checkpoint: model kind mismatch (expected " + kind + ", found " +
                             found + ")");
}

inline ARModel load_ar(const std::string& path, nlohmann::json* meta_out = nullptr) {
  LoadedCheckpoint ck = load_checkpoint(path);
  require_kind(ck, "AR");
  if (meta_out) *meta_out = ck.meta;
  ARConfig cfg;
  cfg.group_size = ck.meta.at("group_size").get<int>();
  cfg.text_vocab = ck.meta.at("text_vocab").get<int>();
  cfg.code_vocab = ck.meta.at("code_vocab").get<int>();
  cfg.d = ck.meta.at("d").get<int>();
  cfg.blocks = ck.meta.at("blocks").get<int>();
  cfg.heads = ck.meta.at("heads").get<int>();
  cfg.max_text_pos = ck.meta.at("max_text_pos").get<int>();
  cfg.max_code_pos = ck.meta.at("max_code_pos").get<int>();
  ARModel m;
  m.init(cfg, 0);
  copy_params_from_checkpoint(ck, m.params());
  return m;
}

inline NARModel load_nar(const std::string& path, nlohmann::json* meta_out = nullptr) {
  LoadedCheckpoint ck = load_checkpoint(path);
  require_kind(ck, "NAR");
  if (meta_out) *meta_out = ck.meta;
  NARConfig cfg;
  cfg.text_vocab = ck.meta.at("text_vocab").get<int>();
  cfg.code_vocab = ck.meta.at("code_vocab").get<int>();
  cfg.d = ck.meta.at("d").get<int>();
  cfg.blocks = ck.meta.at("blocks").get<int>();
  cfg.heads = ck.meta.at("heads").get<int>();
  cfg.max_text_pos = ck.meta.at("max_text_pos").get<int>();
  cfg.max_code_pos = ck.meta.at("max_code_pos").get<int>();
  NARModel m;
  m.init(cfg, 0);
  copy_params_from_checkpoint(ck, m.params());
  return m;
}

}  // namespace vle2
