#include "foley/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include "binary_io.hpp"
#include "foley/errors.hpp"

namespace foley {

namespace {

constexpr char kMagic[8] = {'F', 'O', 'L', 'E', 'Y', 'C', 'K', '\0'};
constexpr std::uint32_t kMaxRank = 8;

void write_config(detail::BinaryWriter& w, const ModelConfig& c) {
  w.u32(static_cast<std::uint32_t>(c.kind));
  for (std::size_t v : {c.audio_ctx_len, c.video_ctx_len, c.spf, c.frame_height, c.frame_width, c.video_channels,
                        c.video_blocks, c.fusion_blocks, c.audio_channels, c.audio_kernel, c.residual_channels,
                        c.kernel_size}) {
    w.u64(v);
  }
  w.u32(static_cast<std::uint32_t>(c.dilations.size()));
  for (auto d : c.dilations) w.u64(d);
  w.u32(static_cast<std::uint32_t>(c.ctx_mode));
  for (std::size_t v : {c.d_model, c.heads, c.transformer_blocks, c.ff_dim, c.strided_layers, c.max_positions}) {
    w.u64(v);
  }
  w.u32(c.quantized ? 1 : 0);
}

ModelConfig read_config(detail::BinaryReader& r) {
  ModelConfig c;
  const auto kind = r.u32("kind");
  if (kind > static_cast<std::uint32_t>(ModelKind::transformer)) throw FormatError("checkpoint: unknown model kind");
  c.kind = static_cast<ModelKind>(kind);
  c.audio_ctx_len = r.u64("audio_ctx_len");
  c.video_ctx_len = r.u64("video_ctx_len");
  c.spf = r.u64("spf");
  c.frame_height = r.u64("frame_height");
  c.frame_width = r.u64("frame_width");
  c.video_channels = r.u64("video_channels");
  c.video_blocks = r.u64("video_blocks");
  c.fusion_blocks = r.u64("fusion_blocks");
  c.audio_channels = r.u64("audio_channels");
  c.audio_kernel = r.u64("audio_kernel");
  c.residual_channels = r.u64("residual_channels");
  c.kernel_size = r.u64("kernel_size");
  const auto n_dil = r.u32("dilation count");
  if (n_dil > 4096) throw FormatError("checkpoint: implausible dilation count");
  for (std::uint32_t i = 0; i < n_dil; ++i) c.dilations.push_back(r.u64("dilations"));
  const auto mode = r.u32("ctx_mode");
  if (mode > static_cast<std::uint32_t>(ContextMode::raw_short)) throw FormatError("checkpoint: unknown ctx_mode");
  c.ctx_mode = static_cast<ContextMode>(mode);
  c.d_model = r.u64("d_model");
  c.heads = r.u64("heads");
  c.transformer_blocks = r.u64("transformer_blocks");
  c.ff_dim = r.u64("ff_dim");
  c.strided_layers = r.u64("strided_layers");
  c.max_positions = r.u64("max_positions");
  const auto q = r.u32("quantized");
  if (q > 1) throw FormatError("checkpoint: field 'quantized' must be 0 or 1");
  c.quantized = q == 1;
  return c;
}

}  // namespace

void write_checkpoint(const Model& model, std::ostream& out) {
  detail::BinaryWriter w(out);
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  write_config(w, model.config());
  const auto& entries = model.parameters().entries();
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.u64(d);
    for (double v : t.data()) w.f32(static_cast<float>(v));
  }
  if (!out) throw IoError("checkpoint: write failed");
}

std::unique_ptr<Model> read_checkpoint(std::istream& in) {
  detail::BinaryReader r(in, "checkpoint");
  char magic[8];
  r.bytes(magic, sizeof magic, "magic");
  if (!std::equal(magic, magic + 8, kMagic)) throw FormatError("checkpoint: bad magic number");
  const auto version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const ModelConfig config = read_config(r);
  std::unique_ptr<Model> model;
  try {
    model = make_model(config, 0);
  } catch (const ParameterError& e) {
    throw FormatError(std::string("checkpoint: invalid config (") + e.what() + ")");
  }
  const auto count = r.u32("tensor count");
  const auto& expected = model->parameters().entries();
  if (count != expected.size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                      std::to_string(expected.size()));
  }
  std::vector<std::pair<std::string, Tensor>> values;
  values.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str("tensor name", 4096);
    const auto rank = r.u32("tensor rank");
    if (rank == 0 || rank > kMaxRank) throw FormatError("checkpoint: tensor '" + name + "' has invalid rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.u64("tensor extent");
    // Compare before allocating so a corrupt extent cannot request huge buffers.
    if (shape != expected[i].second.shape()) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " + to_string(shape) + ", model expects " +
                        to_string(expected[i].second.shape()));
    }
    std::vector<double> data(numel(shape));
    for (auto& v : data) v = static_cast<double>(r.f32("tensor data"));
    values.emplace_back(std::move(name), Tensor::from(std::move(shape), std::move(data)));
  }
  model->parameters().load_values(values);
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot write " + path.string());
  write_checkpoint(model, out);
}

std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace foley
