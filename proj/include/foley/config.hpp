#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>

#include "foley/losses.hpp"
#include "foley/models.hpp"
#include "foley/train.hpp"

namespace foley {

// Run config file: a JSON object with optional "model" and "train" sections.
// "model" takes any ModelConfig field except spf and frame size, which come
// from the dataset; "train" takes every TrainConfig field. Unknown keys are
// rejected with a FormatError naming them.

struct ModelOverrides {
  std::optional<ModelKind> kind;
  std::optional<ContextMode> ctx_mode;
  bool quantized = false;
};

// Precedence: command-line overrides, then the file, then default_config.
ModelConfig resolve_model_config(const std::optional<std::filesystem::path>& config_file, std::size_t spf,
                                 std::size_t frame_height, std::size_t frame_width, const ModelOverrides& cli);

TrainConfig resolve_train_config(const std::optional<std::filesystem::path>& config_file,
                                 std::optional<std::uint64_t> seed, std::optional<LossKind> loss);

void write_run_config(const ModelConfig& model, const TrainConfig& train, const std::filesystem::path& path);

}  // namespace foley
