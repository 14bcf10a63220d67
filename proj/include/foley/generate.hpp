#pragma once

#include <cstddef>
#include <filesystem>

#include "foley/audio.hpp"
#include "foley/models.hpp"
#include "foley/video.hpp"

namespace foley {

enum class GenerationMode { sample, sequence };

// Sample mode: spf model steps per frame under one frozen video context.
// Sequence mode: one step per frame emitting spf samples.
struct GenerationSchedule {
  std::size_t spf = 0;
  std::size_t total_frames = 0;
  GenerationMode mode = GenerationMode::sample;

  std::size_t steps_per_frame() const { return mode == GenerationMode::sample ? spf : 1; }
  std::size_t output_length() const { return spf * total_frames; }
};

// The schedule a model runs under; frames == 0 means every frame of the clip.
GenerationSchedule schedule_for(const Model& model, const VideoClip& video, std::size_t frames = 0);

struct GenerationStats {
  std::size_t conditioning_calls = 0;  // per-frame video conditioning evaluations
  std::size_t model_steps = 0;
};

// Autoregressive generation from the model's own outputs only. The output
// rate is spf * frame_rate. ContractError when the schedule's mode does not
// match the model or the clip does not fit the model's frame size.
AudioBuffer generate(const Model& model, const VideoClip& video, const GenerationSchedule& schedule,
                     GenerationStats* stats = nullptr);
AudioBuffer generate(const Model& model, const VideoClip& video, std::size_t frames = 0,
                     GenerationStats* stats = nullptr);

// Mean |x[k*spf] - x[k*spf-1]| over boundaries k = 1..F-1 divided by
// (mean |x[t] - x[t-1]| over all t) + 1e-12, both channels pooled.
// ContractError for fewer than two frames or a length not divisible by spf.
double frame_boundary_discontinuity(const AudioBuffer& audio, std::size_t spf);

// "index,left,right" rows.
void write_waveform_csv(const AudioBuffer& audio, const std::filesystem::path& path);

}  // namespace foley
