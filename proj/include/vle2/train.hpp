#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vle2/ar_model.hpp"
#include "vle2/nar_model.hpp"
#include "vle2/optim.hpp"
#include "vle2/world.hpp"

namespace vle2 {

struct TrainOptions {
  int64_t steps = 5000;
  int batch_size = 8;
  uint64_t seed = 0;
  int64_t log_every = 500;
  std::string csv_path;  // loss/TER log; empty disables
  int val_utts = 8;      // fixed validation slice size
  int prompt_frames = 12;
  bool quiet = false;
};

struct TrainRow {
  int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double val_ter = -1.0;  // -1 when no validation slice
};

/// AR validation decodes from the first quantizer row alone (the NAR rows do
/// not exist yet at this point of the pipeline).
double ar_validation_ter(const ARModel& model, const std::vector<Utterance>& val,
                         const WorldConfig& cfg, int prompt_frames, int max_utts);

/// NAR validation fills rows 1..7 above the ground-truth first-quantizer
/// target and decodes the full matrix.
double nar_validation_ter(const NARModel& model, const std::vector<Utterance>& val,
                          const WorldConfig& cfg, int prompt_frames, int max_utts);

std::vector<TrainRow> train_ar(ARModel& model, const std::vector<Utterance>& corpus,
                               const OptimizerState& opt, const TrainOptions& topt,
                               const std::vector<Utterance>* val, const WorldConfig& cfg);

std::vector<TrainRow> train_nar(NARModel& model, const std::vector<Utterance>& corpus,
                                const OptimizerState& opt, const TrainOptions& topt,
                                const std::vector<Utterance>* val, const WorldConfig& cfg);

}  // namespace vle2
