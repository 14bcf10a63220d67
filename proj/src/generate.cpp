#include "foley/generate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "foley/dataset.hpp"
#include "foley/errors.hpp"
#include "foley/quantize.hpp"

namespace foley {

GenerationSchedule schedule_for(const Model& model, const VideoClip& video, std::size_t frames) {
  GenerationSchedule s;
  s.spf = model.config().spf;
  s.total_frames = frames == 0 ? video.frame_count : frames;
  s.mode = model.sequence_mode() ? GenerationMode::sequence : GenerationMode::sample;
  return s;
}

namespace {

std::size_t argmax_bin(std::span<const double> logits, std::size_t row) {
  const auto begin = logits.begin() + static_cast<std::ptrdiff_t>(row * kQuantBins);
  return static_cast<std::size_t>(std::max_element(begin, begin + kQuantBins) - begin);
}

}  // namespace

AudioBuffer generate(const Model& model, const VideoClip& video, const GenerationSchedule& schedule,
                     GenerationStats* stats) {
  const auto& c = model.config();
  const GenerationMode expected = model.sequence_mode() ? GenerationMode::sequence : GenerationMode::sample;
  if (schedule.mode != expected) {
    throw ContractError(std::string("generate: ") + (model.sequence_mode() ? "sequence" : "sample") +
                        "-mode model cannot run a " +
                        (schedule.mode == GenerationMode::sequence ? "sequence" : "sample") + "-mode schedule");
  }
  if (schedule.spf != c.spf) {
    throw ContractError("generate: schedule spf " + std::to_string(schedule.spf) + " vs model spf " +
                        std::to_string(c.spf));
  }
  if (schedule.total_frames < 1 || schedule.total_frames > video.frame_count) {
    throw ContractError("generate: requested " + std::to_string(schedule.total_frames) + " frames from a clip of " +
                        std::to_string(video.frame_count));
  }
  if (video.height != c.frame_height || video.width != c.frame_width) {
    throw ContractError("generate: clip is " + std::to_string(video.height) + "x" + std::to_string(video.width) +
                        ", model expects " + std::to_string(c.frame_height) + "x" + std::to_string(c.frame_width));
  }

  NoGradGuard no_grad;
  AudioBuffer out = AudioBuffer::silence(schedule.output_length(), static_cast<int>(c.spf) * video.frame_rate);
  GenerationStats local;
  for (std::size_t f = 0; f < schedule.total_frames; ++f) {
    const Tensor conditioning = model.condition(video_context(video, f, c.video_ctx_len));
    ++local.conditioning_calls;
    for (std::size_t s = 0; s < schedule.steps_per_frame(); ++s) {
      const std::size_t position = f * c.spf + s;
      // Only samples before `position` have been written, so the context
      // holds generated audio and zero padding.
      const Tensor ctx = audio_context(out, position, c.audio_ctx_len);
      const Tensor y = model.forward(ctx, conditioning);
      ++local.model_steps;
      if (schedule.mode == GenerationMode::sequence) {
        for (std::size_t ch = 0; ch < 2; ++ch)
          for (std::size_t i = 0; i < c.spf; ++i)
            out.channels[ch][position + i] = std::clamp(y[ch * c.spf + i], -1.0, 1.0);
      } else if (model.quantized()) {
        for (std::size_t ch = 0; ch < 2; ++ch) out.channels[ch][position] = dequantize(argmax_bin(y.data(), ch));
      } else {
        for (std::size_t ch = 0; ch < 2; ++ch) out.channels[ch][position] = std::clamp(y[ch], -1.0, 1.0);
      }
    }
  }
  if (stats) *stats = local;
  return out;
}

AudioBuffer generate(const Model& model, const VideoClip& video, std::size_t frames, GenerationStats* stats) {
  return generate(model, video, schedule_for(model, video, frames), stats);
}

double frame_boundary_discontinuity(const AudioBuffer& audio, std::size_t spf) {
  if (spf == 0) throw ContractError("frame_boundary_discontinuity: spf must be >= 1");
  const std::size_t n = audio.size();
  if (n % spf != 0) {
    throw ContractError("frame_boundary_discontinuity: length " + std::to_string(n) + " is not a multiple of spf " +
                        std::to_string(spf));
  }
  const std::size_t frames = n / spf;
  if (frames < 2) throw ContractError("frame_boundary_discontinuity: needs at least 2 frames");
  double boundary = 0.0, overall = 0.0;
  for (const auto& x : audio.channels) {
    for (std::size_t k = 1; k < frames; ++k) boundary += std::abs(x[k * spf] - x[k * spf - 1]);
    for (std::size_t t = 1; t < n; ++t) overall += std::abs(x[t] - x[t - 1]);
  }
  boundary /= static_cast<double>(2 * (frames - 1));
  overall /= static_cast<double>(2 * (n - 1));
  return boundary / (overall + 1e-12);
}

void write_waveform_csv(const AudioBuffer& audio, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("waveform csv: cannot write " + path.string());
  out << "index,left,right\n";
  char buf[96];
  for (std::size_t i = 0; i < audio.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", i, audio.channels[0][i], audio.channels[1][i]);
    out << buf;
  }
  if (!out) throw IoError("waveform csv: write failed for " + path.string());
}

}  // namespace foley
