#include "foley/cross_modal.hpp"

#include "foley/errors.hpp"
#include "foley/ops.hpp"

namespace foley {

namespace {
constexpr ops::Triple kUnitStride{1, 1, 1};
constexpr ops::Triple kSpatialPad{0, 1, 1};

// Time is edge-replicated, space zero-padded; a run of identical frames then
// maps to identical features at every time step.
Tensor conv3_same(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t T = x.dim(1);
  const Tensor padded = ops::concat({ops::slice(x, 1, 0, 1), x, ops::slice(x, 1, T - 1, T)}, 1);
  return ops::conv3d(padded, w, b, kUnitStride, kSpatialPad);
}
}  // namespace

Tensor res_block_3d(const Tensor& x, const ResBlock3DParams& p) {
  if (x.rank() != 4) throw DimensionError("res_block_3d: expected [c, T, H, W], got " + to_string(x.shape()));
  if (x.dim(1) == 0) throw DimensionError("res_block_3d: empty time axis");
  const Tensor h = ops::relu(conv3_same(x, p.conv1_w, p.conv1_b));
  const Tensor branch = conv3_same(h, p.conv2_w, p.conv2_b);
  const Tensor skip = p.skip.defined() ? ops::conv1x1_channels(x, p.skip) : x;
  if (skip.shape() != branch.shape()) {
    throw DimensionError("res_block_3d: residual " + to_string(branch.shape()) + " vs skip " + to_string(skip.shape()));
  }
  return ops::relu(ops::add(branch, skip));
}

Tensor video_to_audio(const Tensor& video, const VideoToAudioParams& p) {
  Tensor v = video;
  if (v.rank() == 4) v = ops::mean_axis(v, 1);
  if (v.rank() != 3) throw DimensionError("video_to_audio: expected [c, H, W], got " + to_string(video.shape()));
  const std::size_t channels = v.dim(0), pixels = v.dim(1) * v.dim(2);
  if (pixels != p.flat_w.dim(0)) {
    throw DimensionError("video_to_audio: spatial size " + std::to_string(pixels) + " of " + to_string(video.shape()) +
                         " does not match projection " + to_string(p.flat_w.shape()));
  }
  const Tensor flat = ops::linear(ops::reshape(v, {channels, pixels}), p.flat_w, p.flat_b);
  return ops::conv1x1_channels(flat, p.mix_w, p.mix_b);
}

Tensor audio_to_video(const Tensor& audio, const AudioToVideoParams& p) {
  if (audio.rank() != 2 || audio.dim(1) != p.lin_w.dim(0)) {
    throw DimensionError("audio_to_video: audio " + to_string(audio.shape()) + " does not match projection " +
                         to_string(p.lin_w.shape()));
  }
  const Tensor spatial = ops::linear(audio, p.lin_w, p.lin_b);
  const Tensor mixed = ops::conv1x1_channels(spatial, p.mix_w, p.mix_b);
  return ops::reshape(mixed, {mixed.dim(0), p.height, p.width});
}

Tensor embed_video_context(const Tensor& frames, const VideoEmbedderParams& p) {
  if (frames.rank() != 4 || frames.dim(0) != 3) {
    throw DimensionError("embed_video_context: expected [3, n, H, W], got " + to_string(frames.shape()));
  }
  if (frames.dim(1) != p.context_frames) {
    throw DimensionError("embed_video_context: context of " + std::to_string(frames.dim(1)) + " frames, expected " +
                         std::to_string(p.context_frames));
  }
  Tensor h = frames;
  for (const auto& block : p.blocks) h = res_block_3d(h, block);
  return video_to_audio(h, p.projection);
}

ResBlock3DParams make_res_block_3d(ParameterStore& store, const std::string& prefix, std::size_t c_in,
                                   std::size_t c_out, Rng& rng) {
  ResBlock3DParams p;
  p.conv1_w = store.add_uniform(prefix + ".conv1.w", {c_out, c_in, 3, 3, 3}, c_in * 27, rng);
  p.conv1_b = store.add_constant(prefix + ".conv1.b", {c_out}, 0.0);
  p.conv2_w = store.add_uniform(prefix + ".conv2.w", {c_out, c_out, 3, 3, 3}, c_out * 27, rng);
  p.conv2_b = store.add_constant(prefix + ".conv2.b", {c_out}, 0.0);
  if (c_in != c_out) p.skip = store.add_uniform(prefix + ".skip", {c_out, c_in}, c_in, rng);
  return p;
}

VideoToAudioParams make_video_to_audio(ParameterStore& store, const std::string& prefix, std::size_t height,
                                       std::size_t width, std::size_t n_aud, std::size_t c_vid, std::size_t c_aud,
                                       Rng& rng) {
  VideoToAudioParams p;
  p.flat_w = store.add_uniform(prefix + ".flat.w", {height * width, n_aud}, height * width, rng);
  p.flat_b = store.add_constant(prefix + ".flat.b", {n_aud}, 0.0);
  p.mix_w = store.add_uniform(prefix + ".mix.w", {c_aud, c_vid}, c_vid, rng);
  p.mix_b = store.add_constant(prefix + ".mix.b", {c_aud}, 0.0);
  return p;
}

AudioToVideoParams make_audio_to_video(ParameterStore& store, const std::string& prefix, std::size_t n_aud,
                                       std::size_t height, std::size_t width, std::size_t c_aud, std::size_t c_vid,
                                       Rng& rng) {
  AudioToVideoParams p;
  p.lin_w = store.add_uniform(prefix + ".lin.w", {n_aud, height * width}, n_aud, rng);
  p.lin_b = store.add_constant(prefix + ".lin.b", {height * width}, 0.0);
  p.mix_w = store.add_uniform(prefix + ".mix.w", {c_vid, c_aud}, c_aud, rng);
  p.mix_b = store.add_constant(prefix + ".mix.b", {c_vid}, 0.0);
  p.height = height;
  p.width = width;
  return p;
}

VideoEmbedderParams make_video_embedder(ParameterStore& store, const std::string& prefix,
                                        const VideoEmbedderShape& s, Rng& rng) {
  VideoEmbedderParams p;
  p.context_frames = s.context_frames;
  std::size_t c_in = 3;
  for (std::size_t b = 0; b < s.blocks; ++b) {
    p.blocks.push_back(make_res_block_3d(store, prefix + ".block" + std::to_string(b), c_in, s.channels, rng));
    c_in = s.channels;
  }
  p.projection = make_video_to_audio(store, prefix + ".to_audio", s.height, s.width, s.n_aud, c_in, 2, rng);
  return p;
}

}  // namespace foley
