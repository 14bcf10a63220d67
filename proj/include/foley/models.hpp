#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "foley/cross_modal.hpp"
#include "foley/ops.hpp"
#include "foley/parameters.hpp"
#include "foley/tensor.hpp"

namespace foley {

enum class ModelKind { deep_fusion, wavenet, transformer };
enum class ContextMode { strided_embed, raw_short };

std::string to_string(ModelKind kind);
std::string to_string(ContextMode mode);
ModelKind parse_model_kind(const std::string& text);
ContextMode parse_context_mode(const std::string& text);

// Column label used in loss reports.
std::string report_label(ModelKind kind);

struct ModelConfig {
  ModelKind kind = ModelKind::transformer;
  std::size_t audio_ctx_len = 64;  // A
  std::size_t video_ctx_len = 1;   // n
  std::size_t spf = 294;
  std::size_t frame_height = 36;
  std::size_t frame_width = 64;

  // Video embedder (and deep-fusion video tower).
  std::size_t video_channels = 8;
  std::size_t video_blocks = 2;

  // Deep fusion.
  std::size_t fusion_blocks = 2;
  std::size_t audio_channels = 8;
  std::size_t audio_kernel = 3;

  // Wavenet.
  std::size_t residual_channels = 16;
  std::size_t kernel_size = 2;
  std::vector<std::size_t> dilations;

  // Transformer.
  ContextMode ctx_mode = ContextMode::raw_short;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t transformer_blocks = 2;
  std::size_t ff_dim = 128;
  std::size_t strided_layers = 3;
  std::size_t max_positions = 0;  // 0: exactly the token count
  bool quantized = false;

  bool operator==(const ModelConfig&) const = default;
};

// Defaults per architecture for a given samples-per-frame. The transformer's
// strided mode starts from A = 512 (64 tokens after three stride-2 layers).
ModelConfig default_config(ModelKind kind, std::size_t spf, ContextMode mode = ContextMode::raw_short);

// Throws ParameterError describing the first inconsistent field.
void validate(const ModelConfig& config);

// Tokens entering the transformer stack.
std::size_t token_count(const ModelConfig& config);
std::size_t positional_table_size(const ModelConfig& config);

// 1 + (K - 1) * (1 + sum of residual dilations); the input causal conv has dilation 1.
std::size_t receptive_field(const ModelConfig& config);

// Closed-form trainable scalar count.
std::size_t parameter_count(const ModelConfig& config);

// Common interface. Sequence-mode models emit [2, spf] per step; sample-mode
// models emit [2] amplitudes, or [2, 256] logits when quantized.
class Model {
 public:
  virtual ~Model() = default;

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }

  bool sequence_mode() const { return config_.kind == ModelKind::deep_fusion; }
  bool quantized() const { return config_.kind == ModelKind::transformer && config_.quantized; }

  // Per-frame conditioning computed from video_ctx [3, n, H, W]: the video
  // embedding [2, A] for sample-mode models, the context itself for deep fusion.
  virtual Tensor condition(const Tensor& video_ctx) const = 0;

  virtual Tensor forward(const Tensor& audio_ctx, const Tensor& conditioning) const = 0;

 protected:
  explicit Model(ModelConfig config) : config_(std::move(config)) {}

  ModelConfig config_;
  ParameterStore params_;
};

std::unique_ptr<Model> make_model(const ModelConfig& config, std::uint64_t seed);

// --- Deep fusion -----------------------------------------------------------

struct AudioBlockParams {
  Tensor conv1_w, conv1_b, conv2_w, conv2_b;  // [c, c, K], [c]
};

struct FusionParams {
  VideoToAudioParams to_audio;
  AudioToVideoParams to_video;
  Tensor gate_av;  // scales video -> audio contribution
  Tensor gate_va;  // scales audio -> video contribution
};

class DeepFusionModel final : public Model {
 public:
  DeepFusionModel(ModelConfig config, std::uint64_t seed);

  Tensor condition(const Tensor& video_ctx) const override { return video_ctx; }
  Tensor forward(const Tensor& audio_ctx, const Tensor& video_ctx) const override;

  // audio_ctx [2, A], video_ctx [3, n, H, W] -> [2, spf]
  Tensor deep_fusion_forward(const Tensor& audio_ctx, const Tensor& video_ctx) const;
  // The audio tower and head alone, with no fusion.
  Tensor audio_only_forward(const Tensor& audio_ctx) const;

  std::vector<FusionParams>& fusion() { return fusion_; }

 private:
  Tensor audio_block(const Tensor& a, const AudioBlockParams& p) const;
  Tensor head(const Tensor& a) const;

  Tensor audio_in_w_, audio_in_b_;
  std::vector<AudioBlockParams> audio_blocks_;
  std::vector<ResBlock3DParams> video_blocks_;
  std::vector<FusionParams> fusion_;
  Tensor head_mix_w_, head_mix_b_;  // [2, c_a]
  Tensor head_w_, head_b_;          // [A, spf]
};

// --- Wavenet ---------------------------------------------------------------

struct WavenetLayerParams {
  Tensor conv_w, conv_b;  // [C, C, K], dilated causal
  Tensor out_w, out_b;    // [C, C] 1x1
  std::size_t dilation = 1;
};

class WavenetModel final : public Model {
 public:
  WavenetModel(ModelConfig config, std::uint64_t seed);

  Tensor condition(const Tensor& video_ctx) const override;
  Tensor forward(const Tensor& audio_ctx, const Tensor& video_embed) const override;

  // audio_ctx + video_embed, each [2, A] -> next sample [2] in [-1, 1].
  Tensor wavenet_forward(const Tensor& audio_ctx, const Tensor& video_embed) const;
  // Full [C, A] activations of the dilated stack for causality probes.
  Tensor stack_forward(const Tensor& input) const;

  const VideoEmbedderParams& embedder() const { return embedder_; }

 private:
  VideoEmbedderParams embedder_;
  Tensor in_w_, in_b_;
  std::vector<WavenetLayerParams> layers_;
  Tensor dense_w_, dense_b_;  // [2, C]
};

// --- Transformer -----------------------------------------------------------

struct TransformerBlockParams {
  ops::AttentionParams attention;
  Tensor ff1_w, ff1_b, ff2_w, ff2_b;
};

class TransformerModel final : public Model {
 public:
  TransformerModel(ModelConfig config, std::uint64_t seed);

  Tensor condition(const Tensor& video_ctx) const override;
  Tensor forward(const Tensor& audio_ctx, const Tensor& video_embed) const override;

  // Next sample [2] in [-1, 1], or [2, 256] logits when quantized.
  Tensor transformer_forward(const Tensor& audio_ctx, const Tensor& video_embed) const;

  // [2, A] summed context -> [T_tok, d_model] tokens with positions added.
  Tensor tokens(const Tensor& input) const;
  // Every position of the causal stack, [T_tok, d_model].
  Tensor stack_forward(const Tensor& tokens) const;

  const VideoEmbedderParams& embedder() const { return embedder_; }

 private:
  Tensor ffn(const Tensor& x, const TransformerBlockParams& b) const;

  VideoEmbedderParams embedder_;
  Tensor lift_w_, lift_b_;                   // raw_short: [2, d]
  std::vector<Tensor> strided_w_, strided_b_;  // strided_embed: [d, c_in, 2], [d]
  Tensor positions_;                          // [P, d]
  std::vector<TransformerBlockParams> blocks_;
  Tensor decode_w_, decode_b_;  // [d, 2] or [d, 512]
};

}  // namespace foley
