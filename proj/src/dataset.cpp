#include "foley/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "foley/errors.hpp"
#include "json_fields.hpp"

namespace foley {

namespace {

constexpr char kDatasetMagic[8] = {'F', 'O', 'L', 'E', 'Y', 'D', 'S', '\0'};
constexpr std::uint32_t kDatasetVersion = 1;

}  // namespace

std::size_t samples_per_frame(int sample_rate, int frame_rate) {
  if (sample_rate <= 0 || frame_rate <= 0) throw AlignmentError("align: rates must be positive");
  if (sample_rate % frame_rate != 0) {
    throw AlignmentError("align: sample rate " + std::to_string(sample_rate) + " is not a multiple of frame rate " +
                         std::to_string(frame_rate));
  }
  return static_cast<std::size_t>(sample_rate / frame_rate);
}

void validate(const AlignedAV& av) {
  if (av.spf == 0 || av.spf != samples_per_frame(av.audio.sample_rate, av.video.frame_rate)) {
    throw ContractError("aligned: spf does not equal sample_rate / frame_rate");
  }
  if (av.audio.size() % av.spf != 0) throw ContractError("aligned: audio length not a multiple of spf");
  if (av.video.frame_count * av.spf != av.audio.size()) {
    throw ContractError("aligned: frame count x spf differs from audio length");
  }
}

AlignedAV align(AudioBuffer audio, VideoClip video) {
  const std::size_t spf = samples_per_frame(audio.sample_rate, video.frame_rate);
  const std::size_t kept = audio.size() - audio.size() % spf;
  const std::size_t frames = kept / spf;
  if (frames == 0) throw AlignmentError("align: audio shorter than one frame (" + std::to_string(spf) + " samples)");
  if (frames > video.frame_count) {
    throw AlignmentError("align: audio covers " + std::to_string(frames) + " frames but the clip has only " +
                         std::to_string(video.frame_count));
  }
  for (auto& ch : audio.channels) ch.resize(kept);
  video.pixels.resize(frames * video.frame_size());
  video.frame_count = frames;
  return AlignedAV{std::move(audio), std::move(video), spf};
}

Tensor audio_context(const AudioBuffer& audio, std::size_t position, std::size_t length) {
  std::vector<double> data(2 * length, 0.0);
  const std::size_t available = std::min(position, audio.size());
  const std::size_t copy = std::min(length, available);
  // Right-align the most recent `copy` samples.
  for (std::size_t c = 0; c < 2; ++c) {
    const auto& src = audio.channels[c];
    std::copy_n(src.begin() + static_cast<long>(available - copy), copy,
                data.begin() + static_cast<long>(c * length + (length - copy)));
  }
  return Tensor::from({2, length}, std::move(data));
}

Tensor video_context(const VideoClip& video, std::size_t frame_index, std::size_t length) {
  const std::size_t plane = video.height * video.width;
  std::vector<double> data(3 * length * plane, 0.0);
  for (std::size_t slot = 0; slot < length; ++slot) {
    // slot `length - 1` holds frame_index.
    const long f = static_cast<long>(frame_index) - static_cast<long>(length - 1 - slot);
    if (f < 0) continue;
    const auto frame = video.frame(static_cast<std::size_t>(f));
    for (std::size_t c = 0; c < 3; ++c)
      std::copy_n(frame.data() + c * plane, plane, data.data() + (c * length + slot) * plane);
  }
  return Tensor::from({3, length, video.height, video.width}, std::move(data));
}

ContextWindow sample_window(const AlignedAV& d, std::size_t frame_index, std::size_t audio_ctx_len,
                            std::size_t video_ctx_len, TargetKind kind, std::size_t sample_offset) {
  if (frame_index >= d.frames()) {
    throw BoundsError("window: frame_index " + std::to_string(frame_index) + " outside [0, " +
                      std::to_string(d.frames()) + ")");
  }
  if (audio_ctx_len == 0 || video_ctx_len == 0) throw BoundsError("window: context lengths must be positive");
  if (kind == TargetKind::sample && sample_offset >= d.spf) {
    throw BoundsError("window: sample_offset " + std::to_string(sample_offset) + " outside [0, " +
                      std::to_string(d.spf) + ")");
  }
  if (kind == TargetKind::frame_sequence) sample_offset = 0;
  const std::size_t position = frame_index * d.spf + sample_offset;

  ContextWindow w;
  w.frame_index = frame_index;
  w.sample_offset = sample_offset;
  w.audio_ctx = audio_context(d.audio, position, audio_ctx_len);
  w.video_ctx = video_context(d.video, frame_index, video_ctx_len);
  if (kind == TargetKind::sample) {
    w.target = Tensor::from({2}, {d.audio.channels[0][position], d.audio.channels[1][position]});
  } else {
    std::vector<double> t(2 * d.spf);
    for (std::size_t c = 0; c < 2; ++c)
      std::copy_n(d.audio.channels[c].begin() + static_cast<long>(position), d.spf, t.begin() + static_cast<long>(c * d.spf));
    w.target = Tensor::from({2, d.spf}, std::move(t));
  }
  return w;
}

std::size_t Dataset::train_frames() const {
  const auto f = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(av.frames())));
  return std::min(f, av.frames());
}

PairedManifest read_paired_manifest(const std::filesystem::path& path) {
  constexpr const char* what = "paired manifest";
  const auto j = detail::read_json_file(path, what);
  PairedManifest m;
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path q(p);
    return q.is_relative() ? base / q : q;
  };
  m.clip_manifest = resolve(detail::field<std::string>(j, "clip_manifest", what));
  m.wav_path = resolve(detail::field<std::string>(j, "wav_path", what));
  m.train_fraction = detail::field<double>(j, "train_fraction", what);
  if (!(m.train_fraction > 0.0 && m.train_fraction < 1.0)) {
    throw FormatError("paired manifest: field 'train_fraction' must lie in (0, 1)");
  }
  m.name = detail::field_or<std::string>(j, "name", path.stem().string(), what);
  return m;
}

void write_paired_manifest(const PairedManifest& m, const std::filesystem::path& path) {
  nlohmann::json j = {{"clip_manifest", m.clip_manifest.string()},
                      {"wav_path", m.wav_path.string()},
                      {"train_fraction", m.train_fraction},
                      {"name", m.name}};
  detail::write_json_file(j, path, "paired manifest");
}

Dataset ingest(const PairedManifest& manifest, const IngestOptions& options) {
  AudioBuffer audio = downsample_audio(load_wav(manifest.wav_path), options.audio_rate);
  VideoClip video = resize_frames(load_clip(manifest.clip_manifest), options.height, options.width);
  Dataset d;
  d.name = manifest.name;
  d.train_fraction = manifest.train_fraction;
  d.av = align(std::move(audio), std::move(video));
  if (d.train_frames() == 0 || d.validation_frames() == 0) {
    throw AlignmentError("ingest: train_fraction leaves an empty train or validation split");
  }
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  validate(d.av);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("dataset: cannot write " + path.string());
  detail::BinaryWriter w(out);
  w.bytes(kDatasetMagic, sizeof kDatasetMagic);
  w.u32(kDatasetVersion);
  w.str(d.name);
  w.f64(d.train_fraction);
  w.u32(static_cast<std::uint32_t>(d.av.audio.sample_rate));
  w.u32(static_cast<std::uint32_t>(d.av.video.frame_rate));
  w.u32(static_cast<std::uint32_t>(d.av.spf));
  w.u64(d.av.video.frame_count);
  w.u32(static_cast<std::uint32_t>(d.av.video.height));
  w.u32(static_cast<std::uint32_t>(d.av.video.width));
  w.u64(d.av.audio.size());
  for (const auto& ch : d.av.audio.channels)
    for (double v : ch) w.f32(static_cast<float>(v));
  for (double v : d.av.video.pixels) w.f32(static_cast<float>(v));
  if (!out) throw IoError("dataset: write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("dataset: cannot open " + path.string());
  detail::BinaryReader r(in, "dataset");
  char magic[8];
  r.bytes(magic, sizeof magic, "magic");
  if (!std::equal(magic, magic + 8, kDatasetMagic)) throw FormatError("dataset: bad magic number");
  if (const auto v = r.u32("version"); v != kDatasetVersion) {
    throw UnsupportedError("dataset: version " + std::to_string(v));
  }
  Dataset d;
  d.name = r.str("name");
  d.train_fraction = r.f64("train_fraction");
  d.av.audio.sample_rate = static_cast<int>(r.u32("sample_rate"));
  d.av.video.frame_rate = static_cast<int>(r.u32("frame_rate"));
  d.av.spf = r.u32("spf");
  d.av.video.frame_count = r.u64("frame_count");
  d.av.video.height = r.u32("height");
  d.av.video.width = r.u32("width");
  const auto samples = r.u64("sample_count");
  if (d.av.spf == 0 || samples != d.av.video.frame_count * d.av.spf) {
    throw FormatError("dataset: sample_count inconsistent with frame_count x spf");
  }
  if (d.av.video.frame_count * d.av.video.frame_size() > (std::size_t{1} << 32)) {
    throw FormatError("dataset: implausible frame dimensions");
  }
  for (auto& ch : d.av.audio.channels) {
    ch.resize(samples);
    for (auto& v : ch) v = r.f32("audio samples");
  }
  d.av.video.pixels.resize(d.av.video.frame_count * d.av.video.frame_size());
  for (auto& v : d.av.video.pixels) v = r.f32("pixels");
  try {
    validate(d.av);
    validate(d.av.audio);
    validate(d.av.video);
  } catch (const Error& e) {
    throw FormatError(std::string("dataset: ") + e.what());
  }
  return d;
}

}  // namespace foley
