#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gpsgraph/model.hpp"
#include "gpsgraph/optim.hpp"

namespace gps {

enum class LossKind { kL1, kCrossEntropy, kWeightedCrossEntropy };
enum class MetricKind { kMae, kAccuracy };

struct Dataset {
  std::vector<Graph> graphs;
  std::vector<EncodingSet> encodings;  // aligned with graphs
};

Dataset make_dataset(std::vector<Graph> graphs, const EncodingConfig& enc_cfg);

struct TrainSchedule {
  std::int64_t batch_size = 32;
  double base_lr = 1e-3;
  std::int64_t epochs = 100;
  std::int64_t warmup_epochs = 5;
  double weight_decay = 1e-5;
  LossKind loss = LossKind::kL1;
  MetricKind metric = MetricKind::kMae;
  std::int64_t eval_batch_size = 128;
};

struct TrainState {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  RngStream root;
  double best_val = 0.0;
  bool has_best = false;
  std::int64_t best_epoch = -1;
  explicit TrainState(std::uint64_t seed) : root(seed) {}
};

// Parameter + runtime-state snapshot for best-model selection.
struct ModelSnapshot {
  std::vector<std::pair<std::string, std::vector<double>>> params;
  std::vector<std::pair<std::string, std::vector<double>>> state;
};
ModelSnapshot snapshot_model(const GpsModel& model);
void restore_model(GpsModel& model, const ModelSnapshot& snap);

struct EpochResult {
  double mean_train_loss = 0.0;
  double train_metric = 0.0;
};

// One pass over the training set: deterministic epoch-seeded shuffle, then
// forward / loss / backward / AdamW with the warmup-cosine rate per step.
// The returned train metric reuses evaluate() on the same parameters.
// Aborts on a non-finite loss, naming the batch.
EpochResult train_epoch(TrainState& state, GpsModel& model, const Dataset& train,
                        const TrainSchedule& sched, std::int64_t steps_per_epoch,
                        std::int64_t total_steps);

double evaluate(GpsModel& model, const Dataset& data, MetricKind metric,
                std::int64_t batch_size = 128);

// Loss on one batch given the model output (exposed for tests).
Value batch_loss(const Value& out, const GraphBatch& batch, LossKind kind,
                 const std::vector<double>* class_weights = nullptr);

// Inverse-frequency class weights for node tasks.
std::vector<double> inverse_frequency_weights(const Dataset& data, std::int64_t num_classes);

}  // namespace gps
