#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "foley/audio.hpp"
#include "foley/tensor.hpp"
#include "foley/video.hpp"

namespace foley {

// Audio and video trimmed so that every frame owns exactly `spf` samples:
//   spf == audio.sample_rate / video.frame_rate (exact)
//   audio.size() % spf == 0
//   video.frame_count * spf == audio.size()
struct AlignedAV {
  AudioBuffer audio;
  VideoClip video;
  std::size_t spf = 0;

  std::size_t frames() const { return video.frame_count; }
};

void validate(const AlignedAV& av);

// Truncates both streams from the end. Throws AlignmentError when the rate is
// not a multiple of the frame rate or the audio needs more frames than exist.
AlignedAV align(AudioBuffer audio, VideoClip video);

std::size_t samples_per_frame(int sample_rate, int frame_rate);

enum class TargetKind { sample, frame_sequence };

// One zero-padded training/generation step. Tensor layouts are model-ready:
//   audio_ctx [2, A]            samples preceding the target, oldest first
//   video_ctx [3, n, H, W]      frames frame_index-n+1 .. frame_index
//   target    [2] or [2, spf]
struct ContextWindow {
  Tensor audio_ctx;
  Tensor video_ctx;
  Tensor target;
  std::size_t frame_index = 0;
  std::size_t sample_offset = 0;
};

ContextWindow sample_window(const AlignedAV& d, std::size_t frame_index, std::size_t audio_ctx_len,
                            std::size_t video_ctx_len, TargetKind kind, std::size_t sample_offset = 0);

// The `length` samples before `position` as a [2, length] tensor; indices
// before the start of the buffer read as zero.
Tensor audio_context(const AudioBuffer& audio, std::size_t position, std::size_t length);

// Frames [frame_index - length + 1, frame_index] as [3, length, H, W], with
// missing leading frames zero.
Tensor video_context(const VideoClip& video, std::size_t frame_index, std::size_t length);

// An aligned clip plus its identity and time-ordered train/validation split.
// Validation is the final segment of frames.
struct Dataset {
  std::string name;
  AlignedAV av;
  double train_fraction = 0.8;

  std::size_t train_frames() const;
  std::size_t validation_frames() const { return av.frames() - train_frames(); }
};

// Paired-clip manifest: {clip_manifest, wav_path, train_fraction}, with an
// optional "name" used as the video id in loss reports.
struct PairedManifest {
  std::filesystem::path clip_manifest;
  std::filesystem::path wav_path;
  double train_fraction = 0.8;
  std::string name;
};

PairedManifest read_paired_manifest(const std::filesystem::path& path);
void write_paired_manifest(const PairedManifest& manifest, const std::filesystem::path& path);

struct IngestOptions {
  int audio_rate = 8820;
  std::size_t height = 36;
  std::size_t width = 64;
};

// load -> downsample -> resize -> align.
Dataset ingest(const PairedManifest& manifest, const IngestOptions& options);

// Single binary container: header followed by float32 audio and pixels.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace foley
