#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vle2/rng.hpp"

namespace vle2 {

struct SamplingConfig {
  double top_p = 0.5;      // v
  int window = 10;         // K
  double threshold = 0.1;  // t_r
  uint64_t seed = 0;

  void validate() const;
};

/// Minimal probability-mass prefix reaching cumulative probability v.
/// Support is sorted by (prob desc, index asc); probs are renormalized.
struct TruncatedDist {
  std::vector<int> support;
  std::vector<double> probs;
};

void validate_distribution(std::span<const double> probs);

TruncatedDist nucleus_truncate(std::span<const double> probs, double v);

int nucleus_sample(std::span<const double> probs, double v, RngStream& rng);

int random_sample(std::span<const double> probs, RngStream& rng);

/// Repetition ratio of the candidate (the history's last element) against
/// its K predecessors: r = (1/K) * sum_{k=0}^{K} [h[last] == h[last-k]].
/// Out-of-range window indices contribute 0; the k=0 self-match always hits.
double repetition_ratio(std::span<const int> history, int window);

/// Algorithm: nucleus-sample a token; if its repetition ratio in
/// (history ++ [token]) exceeds the threshold, replace it by one draw from
/// the full distribution.
int ras_sample(std::span<const double> probs, std::span<const int> history,
               const SamplingConfig& cfg, RngStream& rng);

}  // namespace vle2
