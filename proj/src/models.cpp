#include "foley/models.hpp"

#include <algorithm>

#include "foley/errors.hpp"
#include "foley/quantize.hpp"

namespace foley {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::deep_fusion:
      return "deep-fusion";
    case ModelKind::wavenet:
      return "wavenet";
    case ModelKind::transformer:
      return "transformer";
  }
  return "unknown";
}

std::string to_string(ContextMode mode) { return mode == ContextMode::strided_embed ? "strided" : "raw"; }

ModelKind parse_model_kind(const std::string& text) {
  if (text == "deep-fusion" || text == "deep_fusion") return ModelKind::deep_fusion;
  if (text == "wavenet") return ModelKind::wavenet;
  if (text == "transformer") return ModelKind::transformer;
  throw ParameterError("unknown model kind '" + text + "' (deep-fusion, wavenet, transformer)");
}

ContextMode parse_context_mode(const std::string& text) {
  if (text == "strided" || text == "strided_embed") return ContextMode::strided_embed;
  if (text == "raw" || text == "raw_short") return ContextMode::raw_short;
  throw ParameterError("unknown context mode '" + text + "' (strided, raw)");
}

std::string report_label(ModelKind kind) {
  switch (kind) {
    case ModelKind::deep_fusion:
      return "Deep Fusion";
    case ModelKind::wavenet:
      return "Wavenet-based";
    case ModelKind::transformer:
      return "Aud & Vid Transformer";
  }
  return "unknown";
}

ModelConfig default_config(ModelKind kind, std::size_t spf, ContextMode mode) {
  ModelConfig c;
  c.kind = kind;
  c.spf = spf;
  c.ctx_mode = mode;
  switch (kind) {
    case ModelKind::deep_fusion:
      c.video_ctx_len = 1;
      c.audio_ctx_len = spf;
      break;
    case ModelKind::wavenet:
      c.video_ctx_len = 2;
      for (int round = 0; round < 2; ++round)
        for (std::size_t d = 1; d <= 64; d *= 2) c.dilations.push_back(d);
      c.audio_ctx_len = receptive_field(c);
      break;
    case ModelKind::transformer:
      c.video_ctx_len = 2;
      c.audio_ctx_len = mode == ContextMode::strided_embed ? 512 : 64;
      break;
  }
  return c;
}

std::size_t token_count(const ModelConfig& c) {
  if (c.ctx_mode == ContextMode::raw_short) return c.audio_ctx_len;
  return c.audio_ctx_len >> c.strided_layers;
}

std::size_t positional_table_size(const ModelConfig& c) {
  return c.max_positions == 0 ? token_count(c) : c.max_positions;
}

std::size_t receptive_field(const ModelConfig& c) {
  std::size_t total = 1;
  for (auto d : c.dilations) total += d;
  return 1 + (c.kernel_size - 1) * total;
}

void validate(const ModelConfig& c) {
  auto fail = [](const std::string& msg) { throw ParameterError("model config: " + msg); };
  if (c.spf < 1) fail("spf must be >= 1");
  if (c.audio_ctx_len < 1) fail("audio_ctx_len must be >= 1");
  if (c.video_ctx_len < 1) fail("video_ctx_len must be >= 1");
  if (c.frame_height < 1 || c.frame_width < 1) fail("frame dimensions must be >= 1");
  if (c.video_channels < 1) fail("video_channels must be >= 1");
  switch (c.kind) {
    case ModelKind::deep_fusion:
      if (c.fusion_blocks < 1) fail("fusion_blocks must be >= 1");
      if (c.audio_channels < 1 || c.audio_kernel < 1) fail("audio_channels and audio_kernel must be >= 1");
      break;
    case ModelKind::wavenet:
      if (c.residual_channels < 1 || c.kernel_size < 1) fail("residual_channels and kernel_size must be >= 1");
      for (auto d : c.dilations)
        if (d < 1) fail("dilations must be >= 1");
      break;
    case ModelKind::transformer:
      if (c.d_model < 1 || c.heads < 1 || c.d_model % c.heads != 0) fail("d_model must be divisible by heads");
      if (c.ff_dim < 1) fail("ff_dim must be >= 1");
      if (c.ctx_mode == ContextMode::strided_embed) {
        if (c.strided_layers < 1) fail("strided_layers must be >= 1");
        if (c.strided_layers >= 63 || c.audio_ctx_len % (std::size_t{1} << c.strided_layers) != 0) {
          fail("audio_ctx_len must be divisible by 2^strided_layers");
        }
      }
      if (token_count(c) > positional_table_size(c)) {
        fail("token count " + std::to_string(token_count(c)) + " exceeds positional table of " +
             std::to_string(positional_table_size(c)));
      }
      break;
  }
  if (c.quantized && c.kind != ModelKind::transformer) fail("quantized output is only available for the transformer");
}

namespace {

std::size_t embedder_count(const ModelConfig& c, std::size_t n_aud) {
  const std::size_t ch = c.video_channels;
  std::size_t total = 0, c_in = 3;
  for (std::size_t b = 0; b < c.video_blocks; ++b) {
    total += ch * c_in * 27 + ch + ch * ch * 27 + ch;
    if (c_in != ch) total += ch * c_in;
    c_in = ch;
  }
  const std::size_t pixels = c.frame_height * c.frame_width;
  return total + pixels * n_aud + n_aud + 2 * c_in + 2;
}

}  // namespace

std::size_t parameter_count(const ModelConfig& c) {
  const std::size_t A = c.audio_ctx_len;
  const std::size_t pixels = c.frame_height * c.frame_width;
  switch (c.kind) {
    case ModelKind::deep_fusion: {
      const std::size_t ca = c.audio_channels, cv = c.video_channels, k = c.audio_kernel;
      std::size_t total = 2 * ca + ca;
      std::size_t c_in = 3;
      for (std::size_t b = 0; b < c.fusion_blocks; ++b) {
        total += 2 * (ca * ca * k + ca);
        total += cv * c_in * 27 + cv + cv * cv * 27 + cv + (c_in != cv ? cv * c_in : 0);
        c_in = cv;
        total += pixels * A + A + ca * cv + ca;
        total += A * pixels + pixels + cv * ca + cv;
        total += 2;
      }
      return total + 2 * ca + 2 + A * c.spf + c.spf;
    }
    case ModelKind::wavenet: {
      const std::size_t C = c.residual_channels, K = c.kernel_size;
      std::size_t total = C * 2 * K + C;
      total += c.dilations.size() * (C * C * K + C + C * C + C);
      return total + 2 * C + 2 + embedder_count(c, A);
    }
    case ModelKind::transformer: {
      const std::size_t d = c.d_model, ff = c.ff_dim;
      std::size_t total = 0;
      if (c.ctx_mode == ContextMode::raw_short) {
        total += 2 * d + d;
      } else {
        for (std::size_t l = 0; l < c.strided_layers; ++l) total += d * (l == 0 ? 2 : d) * 2 + d;
      }
      total += positional_table_size(c) * d;
      total += c.transformer_blocks * (4 * (d * d + d) + d * ff + ff + ff * d + d);
      const std::size_t out = c.quantized ? 2 * kQuantBins : 2;
      return total + d * out + out + embedder_count(c, A);
    }
  }
  return 0;
}

std::unique_ptr<Model> make_model(const ModelConfig& config, std::uint64_t seed) {
  switch (config.kind) {
    case ModelKind::deep_fusion:
      return std::make_unique<DeepFusionModel>(config, seed);
    case ModelKind::wavenet:
      return std::make_unique<WavenetModel>(config, seed);
    case ModelKind::transformer:
      return std::make_unique<TransformerModel>(config, seed);
  }
  throw ParameterError("unknown model kind");
}

namespace {

void require_shape(const Tensor& t, const Shape& shape, const char* what) {
  if (t.shape() != shape) {
    throw DimensionError(std::string(what) + ": expected shape " + to_string(shape) + ", got " + to_string(t.shape()));
  }
}

VideoEmbedderShape embedder_shape(const ModelConfig& c) {
  VideoEmbedderShape s;
  s.height = c.frame_height;
  s.width = c.frame_width;
  s.context_frames = c.video_ctx_len;
  s.channels = c.video_channels;
  s.blocks = c.video_blocks;
  s.n_aud = c.audio_ctx_len;
  return s;
}

}  // namespace

// --- Deep fusion -----------------------------------------------------------

DeepFusionModel::DeepFusionModel(ModelConfig config, std::uint64_t seed) : Model(std::move(config)) {
  validate(config_);
  Rng rng(seed);
  const auto& c = config_;
  const std::size_t ca = c.audio_channels, cv = c.video_channels, k = c.audio_kernel;
  audio_in_w_ = params_.add_uniform("audio.in.w", {ca, 2}, 2, rng);
  audio_in_b_ = params_.add_constant("audio.in.b", {ca}, 0.0);
  std::size_t c_in = 3;
  for (std::size_t b = 0; b < c.fusion_blocks; ++b) {
    const std::string p = "block" + std::to_string(b);
    AudioBlockParams ab;
    ab.conv1_w = params_.add_uniform(p + ".audio.conv1.w", {ca, ca, k}, ca * k, rng);
    ab.conv1_b = params_.add_constant(p + ".audio.conv1.b", {ca}, 0.0);
    ab.conv2_w = params_.add_uniform(p + ".audio.conv2.w", {ca, ca, k}, ca * k, rng);
    ab.conv2_b = params_.add_constant(p + ".audio.conv2.b", {ca}, 0.0);
    audio_blocks_.push_back(ab);
    video_blocks_.push_back(make_res_block_3d(params_, p + ".video", c_in, cv, rng));
    c_in = cv;
    FusionParams f;
    f.to_audio = make_video_to_audio(params_, p + ".v2a", c.frame_height, c.frame_width, c.audio_ctx_len, cv, ca, rng);
    f.to_video = make_audio_to_video(params_, p + ".a2v", c.audio_ctx_len, c.frame_height, c.frame_width, ca, cv, rng);
    f.gate_av = params_.add_constant(p + ".gate_av", {1}, 1.0);
    f.gate_va = params_.add_constant(p + ".gate_va", {1}, 1.0);
    fusion_.push_back(f);
  }
  head_mix_w_ = params_.add_uniform("head.mix.w", {2, ca}, ca, rng);
  head_mix_b_ = params_.add_constant("head.mix.b", {2}, 0.0);
  head_w_ = params_.add_uniform("head.w", {c.audio_ctx_len, c.spf}, c.audio_ctx_len, rng);
  head_b_ = params_.add_constant("head.b", {c.spf}, 0.0);
  params_.round_to_float();
}

Tensor DeepFusionModel::audio_block(const Tensor& a, const AudioBlockParams& p) const {
  const Tensor h = ops::relu(ops::conv1d_causal(a, p.conv1_w, 1, p.conv1_b));
  return ops::relu(ops::add(a, ops::conv1d_causal(h, p.conv2_w, 1, p.conv2_b)));
}

Tensor DeepFusionModel::head(const Tensor& a) const {
  const Tensor mixed = ops::conv1x1_channels(a, head_mix_w_, head_mix_b_);
  return ops::tanh(ops::linear(mixed, head_w_, head_b_));
}

Tensor DeepFusionModel::deep_fusion_forward(const Tensor& audio_ctx, const Tensor& video_ctx) const {
  const auto& c = config_;
  require_shape(audio_ctx, {2, c.audio_ctx_len}, "deep_fusion audio_ctx");
  require_shape(video_ctx, {3, c.video_ctx_len, c.frame_height, c.frame_width}, "deep_fusion video_ctx");
  Tensor a = ops::conv1x1_channels(audio_ctx, audio_in_w_, audio_in_b_);
  Tensor v = video_ctx;
  for (std::size_t b = 0; b < c.fusion_blocks; ++b) {
    a = audio_block(a, audio_blocks_[b]);
    v = res_block_3d(v, video_blocks_[b]);
    // Both directions read the pre-exchange streams.
    const auto& f = fusion_[b];
    const Tensor v2a = video_to_audio(v, f.to_audio);
    const Tensor a2v = audio_to_video(a, f.to_video);
    const Tensor a2v_time = ops::repeat_axis(
        ops::reshape(a2v, {c.video_channels, 1, c.frame_height, c.frame_width}), 1, c.video_ctx_len);
    const Tensor a_next = ops::add(a, ops::scale_by(v2a, f.gate_av));
    v = ops::add(v, ops::scale_by(a2v_time, f.gate_va));
    a = a_next;
  }
  return head(a);
}

Tensor DeepFusionModel::audio_only_forward(const Tensor& audio_ctx) const {
  require_shape(audio_ctx, {2, config_.audio_ctx_len}, "deep_fusion audio_ctx");
  Tensor a = ops::conv1x1_channels(audio_ctx, audio_in_w_, audio_in_b_);
  for (const auto& block : audio_blocks_) a = audio_block(a, block);
  return head(a);
}

Tensor DeepFusionModel::forward(const Tensor& audio_ctx, const Tensor& video_ctx) const {
  return deep_fusion_forward(audio_ctx, video_ctx);
}

// --- Wavenet ---------------------------------------------------------------

WavenetModel::WavenetModel(ModelConfig config, std::uint64_t seed) : Model(std::move(config)) {
  validate(config_);
  Rng rng(seed);
  const auto& c = config_;
  const std::size_t C = c.residual_channels, K = c.kernel_size;
  embedder_ = make_video_embedder(params_, "video", embedder_shape(c), rng);
  in_w_ = params_.add_uniform("wavenet.in.w", {C, 2, K}, 2 * K, rng);
  in_b_ = params_.add_constant("wavenet.in.b", {C}, 0.0);
  for (std::size_t i = 0; i < c.dilations.size(); ++i) {
    const std::string p = "wavenet.layer" + std::to_string(i);
    WavenetLayerParams l;
    l.dilation = c.dilations[i];
    l.conv_w = params_.add_uniform(p + ".conv.w", {C, C, K}, C * K, rng);
    l.conv_b = params_.add_constant(p + ".conv.b", {C}, 0.0);
    l.out_w = params_.add_uniform(p + ".out.w", {C, C}, C, rng);
    l.out_b = params_.add_constant(p + ".out.b", {C}, 0.0);
    layers_.push_back(l);
  }
  dense_w_ = params_.add_uniform("wavenet.dense.w", {2, C}, C, rng);
  dense_b_ = params_.add_constant("wavenet.dense.b", {2}, 0.0);
  params_.round_to_float();
}

Tensor WavenetModel::condition(const Tensor& video_ctx) const { return embed_video_context(video_ctx, embedder_); }

Tensor WavenetModel::stack_forward(const Tensor& input) const {
  Tensor h = ops::conv1d_causal(input, in_w_, 1, in_b_);
  for (const auto& l : layers_) {
    const Tensor z = ops::relu(ops::conv1d_causal(h, l.conv_w, static_cast<long>(l.dilation), l.conv_b));
    h = ops::add(h, ops::conv1x1_channels(z, l.out_w, l.out_b));
  }
  return h;
}

Tensor WavenetModel::wavenet_forward(const Tensor& audio_ctx, const Tensor& video_embed) const {
  const Shape expected{2, config_.audio_ctx_len};
  require_shape(audio_ctx, expected, "wavenet audio_ctx");
  require_shape(video_embed, expected, "wavenet video_embed");
  const Tensor h = stack_forward(ops::add(audio_ctx, video_embed));
  const std::size_t last = config_.audio_ctx_len - 1;
  const Tensor tail = ops::relu(ops::slice(h, 1, last, last + 1));
  return ops::reshape(ops::tanh(ops::conv1x1_channels(tail, dense_w_, dense_b_)), {2});
}

Tensor WavenetModel::forward(const Tensor& audio_ctx, const Tensor& video_embed) const {
  return wavenet_forward(audio_ctx, video_embed);
}

// --- Transformer -----------------------------------------------------------

TransformerModel::TransformerModel(ModelConfig config, std::uint64_t seed) : Model(std::move(config)) {
  validate(config_);
  Rng rng(seed);
  const auto& c = config_;
  const std::size_t d = c.d_model;
  embedder_ = make_video_embedder(params_, "video", embedder_shape(c), rng);
  if (c.ctx_mode == ContextMode::raw_short) {
    lift_w_ = params_.add_uniform("tokens.lift.w", {2, d}, 2, rng);
    lift_b_ = params_.add_constant("tokens.lift.b", {d}, 0.0);
  } else {
    for (std::size_t l = 0; l < c.strided_layers; ++l) {
      const std::size_t c_in = l == 0 ? 2 : d;
      const std::string p = "tokens.strided" + std::to_string(l);
      strided_w_.push_back(params_.add_uniform(p + ".w", {d, c_in, 2}, c_in * 2, rng));
      strided_b_.push_back(params_.add_constant(p + ".b", {d}, 0.0));
    }
  }
  positions_ = params_.add_uniform("tokens.positions", {positional_table_size(c), d}, d, rng);
  for (std::size_t b = 0; b < c.transformer_blocks; ++b) {
    const std::string p = "block" + std::to_string(b);
    TransformerBlockParams blk;
    auto& at = blk.attention;
    at.heads = c.heads;
    at.wq = params_.add_uniform(p + ".attn.wq", {d, d}, d, rng);
    at.bq = params_.add_constant(p + ".attn.bq", {d}, 0.0);
    at.wk = params_.add_uniform(p + ".attn.wk", {d, d}, d, rng);
    at.bk = params_.add_constant(p + ".attn.bk", {d}, 0.0);
    at.wv = params_.add_uniform(p + ".attn.wv", {d, d}, d, rng);
    at.bv = params_.add_constant(p + ".attn.bv", {d}, 0.0);
    at.wo = params_.add_uniform(p + ".attn.wo", {d, d}, d, rng);
    at.bo = params_.add_constant(p + ".attn.bo", {d}, 0.0);
    blk.ff1_w = params_.add_uniform(p + ".ff1.w", {d, c.ff_dim}, d, rng);
    blk.ff1_b = params_.add_constant(p + ".ff1.b", {c.ff_dim}, 0.0);
    blk.ff2_w = params_.add_uniform(p + ".ff2.w", {c.ff_dim, d}, c.ff_dim, rng);
    blk.ff2_b = params_.add_constant(p + ".ff2.b", {d}, 0.0);
    blocks_.push_back(blk);
  }
  const std::size_t out = c.quantized ? 2 * kQuantBins : 2;
  decode_w_ = params_.add_uniform("decode.w", {d, out}, d, rng);
  decode_b_ = params_.add_constant("decode.b", {out}, 0.0);
  params_.round_to_float();
}

Tensor TransformerModel::condition(const Tensor& video_ctx) const { return embed_video_context(video_ctx, embedder_); }

Tensor TransformerModel::tokens(const Tensor& input) const {
  const auto& c = config_;
  Tensor t;
  if (c.ctx_mode == ContextMode::raw_short) {
    t = ops::linear(ops::transpose(input), lift_w_, lift_b_);
  } else {
    ops::Conv1dOptions opt;
    opt.stride = 2;
    Tensor h = input;
    for (std::size_t l = 0; l < strided_w_.size(); ++l) h = ops::relu(ops::conv1d(h, strided_w_[l], strided_b_[l], opt));
    t = ops::transpose(h);
  }
  const std::size_t n = t.dim(0);
  if (n > positions_.dim(0)) {
    throw ParameterError("transformer: " + std::to_string(n) + " tokens exceed positional table of " +
                         std::to_string(positions_.dim(0)));
  }
  return ops::add(t, ops::slice(positions_, 0, 0, n));
}

Tensor TransformerModel::ffn(const Tensor& x, const TransformerBlockParams& b) const {
  return ops::linear(ops::relu(ops::linear(x, b.ff1_w, b.ff1_b)), b.ff2_w, b.ff2_b);
}

Tensor TransformerModel::stack_forward(const Tensor& tokens) const {
  Tensor h = tokens;
  for (const auto& b : blocks_) {
    h = ops::add(h, ops::multi_head_attention(h, b.attention, true));
    h = ops::add(h, ffn(h, b));
  }
  return h;
}

Tensor TransformerModel::transformer_forward(const Tensor& audio_ctx, const Tensor& video_embed) const {
  const auto& c = config_;
  const Shape expected{2, c.audio_ctx_len};
  require_shape(audio_ctx, expected, "transformer audio_ctx");
  require_shape(video_embed, expected, "transformer video_embed");
  Tensor h = tokens(ops::add(audio_ctx, video_embed));
  // Only the final position is decoded, so the last block needs one query.
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& blk = blocks_[b];
    if (b + 1 < blocks_.size()) {
      h = ops::add(h, ops::multi_head_attention(h, blk.attention, true));
    } else {
      const std::size_t n = h.dim(0);
      h = ops::add(ops::slice(h, 0, n - 1, n), ops::multi_head_attention(h, blk.attention, true, true));
    }
    h = ops::add(h, ffn(h, blk));
  }
  if (blocks_.empty()) h = ops::slice(h, 0, h.dim(0) - 1, h.dim(0));
  const Tensor decoded = ops::linear(h, decode_w_, decode_b_);
  if (c.quantized) return ops::reshape(decoded, {2, kQuantBins});
  return ops::reshape(ops::tanh(decoded), {2});
}

Tensor TransformerModel::forward(const Tensor& audio_ctx, const Tensor& video_embed) const {
  return transformer_forward(audio_ctx, video_embed);
}

}  // namespace foley
