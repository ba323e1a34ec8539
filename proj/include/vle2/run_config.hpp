#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "vle2/optim.hpp"
#include "vle2/world.hpp"

namespace vle2 {

/// Resolved run configuration. Loaded from JSON; unknown keys are rejected
/// so typos never silently fall back to defaults.
struct RunConfig {
  WorldConfig world;

  struct Model {
    int d = 128;
    int blocks = 4;
    int heads = 4;
    int max_text_pos = 32;
    int max_code_pos = 256;
  } model;

  struct Optim {
    double peak_lr = 1e-3;
    int64_t warmup_steps = 500;
    int64_t total_steps = 5000;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-8;
    double weight_decay = 0.001;
    int batch_size = 8;
  } optim;

  struct Sampling {
    double top_p = 0.5;
    int window = 10;
    double threshold = 0.1;
  } sampling;

  struct Corpus {
    int n_utts = 2000;
    int len_lo = 6;
    int len_hi = 12;
  } corpus;

  std::string out_dir = ".";
  uint64_t seed = 0;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::string& path);
  nlohmann::json to_json() const;
  void validate() const;

  /// FNV-1a over the canonical world-config JSON; stored in checkpoints so a
  /// model is never evaluated against a different world.
  std::string world_hash() const;

  OptimizerState optimizer_state() const {
    OptimizerState st;
    st.peak_lr = optim.peak_lr;
    st.warmup_steps = optim.warmup_steps;
    st.total_steps = optim.total_steps;
    st.beta1 = optim.beta1;
    st.beta2 = optim.beta2;
    st.eps = optim.eps;
    st.weight_decay = optim.weight_decay;
    return st;
  }
};

}  // namespace vle2
