#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "foley/dataset.hpp"
#include "foley/losses.hpp"
#include "foley/models.hpp"

namespace foley {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t steps = 1000;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  LossKind loss = LossKind::xent_bernoulli;
  double clip_norm = 1.0;
  std::size_t checkpoint_interval = 1000;
  // Validation loss is computed every val_interval steps and after the last
  // step; 0 disables it.
  std::size_t val_interval = 0;

  bool operator==(const TrainConfig&) const = default;
};

// Throws ParameterError naming the first non-positive field. A learning rate
// of exactly 0 is accepted.
void validate(const TrainConfig& config);

struct CurvePoint {
  std::size_t step = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> val_loss;
};

struct TrainReport {
  std::vector<CurvePoint> curve;
  double final_train_loss = 0.0;
};

// Hook invoked every checkpoint_interval steps and after the final step.
using CheckpointHook = std::function<void(std::size_t step, const Model& model)>;

// ContractError when the loss kind does not fit the model's output.
void check_loss_compatible(LossKind kind, const Model& model);

// Adam (0.9, 0.999, eps 1e-8) over uniformly sampled windows of the train
// split, global gradient-norm clipping, float32 parameter storage after each
// update. Throws DivergenceError on a non-finite loss.
TrainReport train(Model& model, const Dataset& dataset, const TrainConfig& config,
                  const CheckpointHook& on_checkpoint = {});

// Mean loss over every validation window, teacher-forced, no updates.
// ContractError on an empty validation split.
double evaluate(const Model& model, const Dataset& dataset, LossKind kind);

// Loss curve CSV: header "step,train_loss,val_loss"; val_loss is empty on
// steps without a validation pass.
void write_loss_csv(const TrainReport& report, const std::filesystem::path& path);

}  // namespace foley
