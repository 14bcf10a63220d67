#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "foley/parameters.hpp"
#include "foley/tensor.hpp"

namespace foley {

// Two 3x3x3 convolutions (stride 1; edge-replicated in time, zero-padded in
// space) with a residual path. The skip
// path is identity unless `skip` holds a [c_out, c_in] channel projection.
struct ResBlock3DParams {
  Tensor conv1_w, conv1_b;  // [c_out, c_in, 3, 3, 3], [c_out]
  Tensor conv2_w, conv2_b;  // [c_out, c_out, 3, 3, 3], [c_out]
  Tensor skip;              // optional [c_out, c_in]
};

// Flatten spatial dims and project (H*W) -> n_aud with one linear map shared
// by every channel, then mix channels c_vid -> c_aud with a 1x1 convolution.
struct VideoToAudioParams {
  Tensor flat_w, flat_b;  // [H*W, n_aud], [n_aud]
  Tensor mix_w, mix_b;    // [c_aud, c_vid], [c_aud]
};

// n_aud -> (H*W) per channel, then c_aud -> c_vid, reshaped to [c_vid, H, W].
struct AudioToVideoParams {
  Tensor lin_w, lin_b;  // [n_aud, H*W], [H*W]
  Tensor mix_w, mix_b;  // [c_vid, c_aud], [c_vid]
  std::size_t height = 0, width = 0;
};

struct VideoEmbedderParams {
  std::vector<ResBlock3DParams> blocks;
  VideoToAudioParams projection;
  std::size_t context_frames = 1;
};

// y = relu(conv2(relu(conv1(x))) + skip(x))
Tensor res_block_3d(const Tensor& x, const ResBlock3DParams& p);

// Accepts [c_vid, H, W] or [c_vid, T, H, W]; the latter is mean-pooled over T.
// Returns [c_aud, n_aud].
Tensor video_to_audio(const Tensor& video, const VideoToAudioParams& p);

// [c_aud, n_aud] -> [c_vid, H, W]
Tensor audio_to_video(const Tensor& audio, const AudioToVideoParams& p);

// Residual stack over [3, n, H, W], mean-pool over time, project to [2, n_aud].
Tensor embed_video_context(const Tensor& frames, const VideoEmbedderParams& p);

// Initialisers: weights uniform in +-1/sqrt(fan_in), biases zero.
ResBlock3DParams make_res_block_3d(ParameterStore& store, const std::string& prefix, std::size_t c_in,
                                   std::size_t c_out, Rng& rng);
VideoToAudioParams make_video_to_audio(ParameterStore& store, const std::string& prefix, std::size_t height,
                                       std::size_t width, std::size_t n_aud, std::size_t c_vid, std::size_t c_aud,
                                       Rng& rng);
AudioToVideoParams make_audio_to_video(ParameterStore& store, const std::string& prefix, std::size_t n_aud,
                                       std::size_t height, std::size_t width, std::size_t c_aud, std::size_t c_vid,
                                       Rng& rng);

struct VideoEmbedderShape {
  std::size_t height = 36;
  std::size_t width = 64;
  std::size_t context_frames = 1;
  std::size_t channels = 8;  // internal width of the residual stack
  std::size_t blocks = 2;
  std::size_t n_aud = 294;
};

// First block projects 3 -> channels on its skip path; the rest are identity.
VideoEmbedderParams make_video_embedder(ParameterStore& store, const std::string& prefix,
                                        const VideoEmbedderShape& shape, Rng& rng);

}  // namespace foley
