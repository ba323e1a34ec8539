#include "vle2/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace vle2 {

void SamplingConfig::validate() const {
  if (window < 1) throw std::invalid_argument("sampling: window must be >= 1");
  if (threshold < 0.0) throw std::invalid_argument("sampling: threshold must be >= 0");
  if (top_p < 0.0 || top_p > 1.0) throw std::invalid_argument("sampling: top_p must be in [0,1]");
}

void validate_distribution(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("sampling: empty distribution");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p))
      throw std::invalid_argument("sampling: negative or non-finite probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-5)
    throw std::invalid_argument("sampling: distribution sums to " + std::to_string(sum));
}

TruncatedDist nucleus_truncate(std::span<const double> probs, double v) {
  validate_distribution(probs);
  std::vector<int> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (probs[a] != probs[b]) return probs[a] > probs[b];
    return a < b;
  });

  size_t keep;
  if (v >= 1.0) {
    // truncation-free: every positive-probability token
    keep = order.size();
  } else {
    double cum = 0.0;
    keep = order.size();
    for (size_t i = 0; i < order.size(); ++i) {
      cum += probs[order[i]];
      if (cum >= v) {
        keep = i + 1;
        break;
      }
    }
  }
  if (keep < 1) keep = 1;  // always at least the top token
  while (keep > 1 && probs[order[keep - 1]] <= 0.0) --keep;

  TruncatedDist out;
  out.support.assign(order.begin(), order.begin() + keep);
  out.probs.resize(keep);
  double z = 0.0;
  for (size_t i = 0; i < keep; ++i) z += probs[out.support[i]];
  for (size_t i = 0; i < keep; ++i) out.probs[i] = probs[out.support[i]] / z;
  return out;
}

namespace {

// walk the cdf; never lands on a zero-probability entry
int pick(const std::vector<int>& support, const std::vector<double>& probs, double u) {
  double cdf = 0.0;
  int last_positive = -1;
  for (size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    cdf += probs[i];
    if (u < cdf) return support[i];
  }
  return support[last_positive];  // rounding tail
}

}  // namespace

int nucleus_sample(std::span<const double> probs, double v, RngStream& rng) {
  TruncatedDist t = nucleus_truncate(probs, v);
  return pick(t.support, t.probs, rng.next_double());
}

int random_sample(std::span<const double> probs, RngStream& rng) {
  validate_distribution(probs);
  std::vector<int> support(probs.size());
  std::iota(support.begin(), support.end(), 0);
  std::vector<double> p(probs.begin(), probs.end());
  return pick(support, p, rng.next_double());
}

double repetition_ratio(std::span<const int> history, int window) {
  if (history.empty()) throw std::invalid_argument("repetition_ratio: empty history");
  const int last = static_cast<int>(history.size()) - 1;
  const int cand = history[last];
  int matches = 0;
  for (int k = 0; k <= window; ++k) {
    const int idx = last - k;
    if (idx < 0) break;
    if (history[idx] == cand) ++matches;
  }
  return static_cast<double>(matches) / static_cast<double>(window);
}

int ras_sample(std::span<const double> probs, std::span<const int> history,
               const SamplingConfig& cfg, RngStream& rng) {
  cfg.validate();
  int token = nucleus_sample(probs, cfg.top_p, rng);
  // ratio of the candidate against the trailing window, self-match included
  int matches = 1;
  for (int k = 1; k <= cfg.window; ++k) {
    const int idx = static_cast<int>(history.size()) - k;
    if (idx < 0) break;
    if (history[idx] == token) ++matches;
  }
  const double r = static_cast<double>(matches) / static_cast<double>(cfg.window);
  if (r > cfg.threshold) token = random_sample(probs, rng);
  return token;
}

}  // namespace vle2
