#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace foley {

// Frame-major pixels laid out [frame][channel][row][col], values in [0, 1].
struct VideoClip {
  std::vector<double> pixels;
  std::size_t frame_count = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  int frame_rate = 0;

  static constexpr std::size_t kChannels = 3;

  std::size_t frame_size() const { return kChannels * height * width; }
  std::span<const double> frame(std::size_t index) const;
  std::span<double> frame(std::size_t index);

  static VideoClip blank(std::size_t frames, std::size_t height, std::size_t width, int frame_rate);
};

void validate(const VideoClip& clip);

// Clip manifest: JSON object {frames_file, width, height, frame_count, frame_rate}.
// frames_file is raw interleaved RGB8, frame-major, relative to the manifest.
struct ClipManifest {
  std::string frames_file;
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t frame_count = 0;
  int frame_rate = 0;
};

ClipManifest read_clip_manifest(const std::filesystem::path& path);
void write_clip_manifest(const ClipManifest& manifest, const std::filesystem::path& path);

// Pixels scaled by 1/255.
VideoClip load_clip(const std::filesystem::path& manifest_path);
VideoClip decode_rgb8(const std::vector<unsigned char>& bytes, const ClipManifest& manifest);

// Inverse of decode_rgb8 (rounded to the nearest byte).
std::vector<unsigned char> encode_rgb8(const VideoClip& clip);

// Writes raw frames next to `manifest_path` and the manifest itself.
void save_clip(const VideoClip& clip, const std::filesystem::path& manifest_path);

// Bilinear resize with half-pixel centres; same-size input is returned unchanged.
VideoClip resize_frames(const VideoClip& clip, std::size_t height, std::size_t width);

}  // namespace foley
