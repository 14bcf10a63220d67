#include "foley/video.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "foley/errors.hpp"
#include "json_fields.hpp"

namespace foley {

std::span<const double> VideoClip::frame(std::size_t index) const {
  if (index >= frame_count) throw BoundsError("video: frame " + std::to_string(index) + " out of range");
  return {pixels.data() + index * frame_size(), frame_size()};
}

std::span<double> VideoClip::frame(std::size_t index) {
  if (index >= frame_count) throw BoundsError("video: frame " + std::to_string(index) + " out of range");
  return {pixels.data() + index * frame_size(), frame_size()};
}

VideoClip VideoClip::blank(std::size_t frames, std::size_t height, std::size_t width, int frame_rate) {
  VideoClip v;
  v.frame_count = frames;
  v.height = height;
  v.width = width;
  v.frame_rate = frame_rate;
  v.pixels.assign(frames * kChannels * height * width, 0.0);
  return v;
}

void validate(const VideoClip& clip) {
  if (clip.frame_count < 1) throw ContractError("video: clip has no frames");
  if (clip.frame_rate <= 0) throw ContractError("video: frame_rate must be positive");
  if (clip.height < 1 || clip.width < 1) throw ContractError("video: frame dimensions must be positive");
  if (clip.pixels.size() != clip.frame_count * clip.frame_size()) {
    throw ContractError("video: pixel buffer does not match frame_count x 3 x height x width");
  }
  for (double v : clip.pixels) {
    if (!(v >= 0.0 && v <= 1.0)) throw RangeError("video: pixel value outside [0, 1]");
  }
}

ClipManifest read_clip_manifest(const std::filesystem::path& path) {
  const auto j = detail::read_json_file(path, "clip manifest");
  constexpr const char* what = "clip manifest";
  ClipManifest m;
  m.frames_file = detail::field<std::string>(j, "frames_file", what);
  m.width = static_cast<std::size_t>(detail::positive_field(j, "width", what));
  m.height = static_cast<std::size_t>(detail::positive_field(j, "height", what));
  m.frame_count = static_cast<std::size_t>(detail::positive_field(j, "frame_count", what));
  m.frame_rate = static_cast<int>(detail::positive_field(j, "frame_rate", what));
  return m;
}

void write_clip_manifest(const ClipManifest& m, const std::filesystem::path& path) {
  nlohmann::json j = {{"frames_file", m.frames_file},
                      {"width", m.width},
                      {"height", m.height},
                      {"frame_count", m.frame_count},
                      {"frame_rate", m.frame_rate}};
  detail::write_json_file(j, path, "clip manifest");
}

VideoClip decode_rgb8(const std::vector<unsigned char>& bytes, const ClipManifest& m) {
  const std::size_t plane = m.height * m.width;
  const std::size_t expected = m.frame_count * 3 * plane;
  if (bytes.size() != expected) {
    throw FormatError("clip: frames_file holds " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(expected) + " for frame_count x 3 x height x width");
  }
  VideoClip clip = VideoClip::blank(m.frame_count, m.height, m.width, m.frame_rate);
  for (std::size_t f = 0; f < m.frame_count; ++f) {
    const unsigned char* src = bytes.data() + f * 3 * plane;
    double* dst = clip.pixels.data() + f * 3 * plane;
    for (std::size_t p = 0; p < plane; ++p)
      for (std::size_t c = 0; c < 3; ++c) dst[c * plane + p] = static_cast<double>(src[p * 3 + c]) / 255.0;
  }
  return clip;
}

std::vector<unsigned char> encode_rgb8(const VideoClip& clip) {
  const std::size_t plane = clip.height * clip.width;
  std::vector<unsigned char> bytes(clip.frame_count * 3 * plane);
  for (std::size_t f = 0; f < clip.frame_count; ++f) {
    const double* src = clip.pixels.data() + f * 3 * plane;
    unsigned char* dst = bytes.data() + f * 3 * plane;
    for (std::size_t p = 0; p < plane; ++p)
      for (std::size_t c = 0; c < 3; ++c)
        dst[p * 3 + c] = static_cast<unsigned char>(std::lround(std::clamp(src[c * plane + p], 0.0, 1.0) * 255.0));
  }
  return bytes;
}

VideoClip load_clip(const std::filesystem::path& manifest_path) {
  const ClipManifest m = read_clip_manifest(manifest_path);
  std::filesystem::path frames = m.frames_file;
  if (frames.is_relative()) frames = manifest_path.parent_path() / frames;
  std::ifstream in(frames, std::ios::binary);
  if (!in) throw IoError("clip: cannot open frames_file " + frames.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_rgb8(bytes, m);
}

void save_clip(const VideoClip& clip, const std::filesystem::path& manifest_path) {
  validate(clip);
  ClipManifest m;
  m.frames_file = manifest_path.stem().string() + ".rgb";
  m.width = clip.width;
  m.height = clip.height;
  m.frame_count = clip.frame_count;
  m.frame_rate = clip.frame_rate;
  const auto bytes = encode_rgb8(clip);
  const auto frames_path = manifest_path.parent_path() / m.frames_file;
  std::ofstream out(frames_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("clip: cannot write " + frames_path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  write_clip_manifest(m, manifest_path);
}

VideoClip resize_frames(const VideoClip& clip, std::size_t height, std::size_t width) {
  if (height < 1 || width < 1) throw ParameterError("resize: target dimensions must be positive");
  if (height == clip.height && width == clip.width) return clip;

  struct Tap {
    std::size_t i0, i1;
    double frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t d = 0; d < out; ++d) {
      double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      t[d] = {i0, std::min(i0 + 1, in - 1), src - static_cast<double>(i0)};
    }
    return t;
  };
  const auto rows = taps(clip.height, height);
  const auto cols = taps(clip.width, width);

  VideoClip out = VideoClip::blank(clip.frame_count, height, width, clip.frame_rate);
  const std::size_t in_plane = clip.height * clip.width;
  const std::size_t out_plane = height * width;
  for (std::size_t f = 0; f < clip.frame_count; ++f) {
    for (std::size_t c = 0; c < VideoClip::kChannels; ++c) {
      const double* src = clip.pixels.data() + (f * VideoClip::kChannels + c) * in_plane;
      double* dst = out.pixels.data() + (f * VideoClip::kChannels + c) * out_plane;
      for (std::size_t y = 0; y < height; ++y) {
        const auto& ry = rows[y];
        for (std::size_t x = 0; x < width; ++x) {
          const auto& cx = cols[x];
          const double top = src[ry.i0 * clip.width + cx.i0] * (1.0 - cx.frac) + src[ry.i0 * clip.width + cx.i1] * cx.frac;
          const double bot = src[ry.i1 * clip.width + cx.i0] * (1.0 - cx.frac) + src[ry.i1 * clip.width + cx.i1] * cx.frac;
          dst[y * width + x] = std::clamp(top * (1.0 - ry.frac) + bot * ry.frac, 0.0, 1.0);
        }
      }
    }
  }
  return out;
}

}  // namespace foley
