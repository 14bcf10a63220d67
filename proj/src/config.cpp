#include "foley/config.hpp"

#include <set>
#include <string>

#include "foley/errors.hpp"
#include "json_fields.hpp"

namespace foley {

namespace {

using nlohmann::json;

constexpr const char* kWhat = "run config";

json section(const json& root, const char* name) {
  if (!root.is_object()) throw FormatError("run config: top level must be an object");
  for (const auto& [key, _] : root.items()) {
    if (key != "model" && key != "train") throw FormatError("run config: unknown section '" + key + "'");
  }
  if (!root.contains(name)) return json::object();
  const json& s = root.at(name);
  if (!s.is_object()) throw FormatError(std::string("run config: section '") + name + "' must be an object");
  return s;
}

void reject_unknown(const json& s, const std::set<std::string>& known, const char* name) {
  for (const auto& [key, _] : s.items()) {
    if (!known.count(key)) throw FormatError(std::string("run config: unknown field '") + name + "." + key + "'");
  }
}

void size_field(const json& s, const char* name, std::size_t& out) {
  if (!s.contains(name)) return;
  const auto v = detail::field<long long>(s, name, kWhat);
  if (v < 0) throw FormatError(std::string("run config: field '") + name + "' must be non-negative");
  out = static_cast<std::size_t>(v);
}

const std::set<std::string> kModelFields = {
    "kind",           "audio_ctx_len",     "video_ctx_len", "video_channels", "video_blocks",
    "fusion_blocks",  "audio_channels",    "audio_kernel",  "residual_channels", "kernel_size",
    "dilations",      "ctx_mode",          "d_model",       "heads",          "transformer_blocks",
    "ff_dim",         "strided_layers",    "max_positions", "quantized"};

const std::set<std::string> kTrainFields = {"learning_rate", "steps",     "batch_size",          "seed",
                                            "loss",          "clip_norm", "checkpoint_interval", "val_interval"};

json load(const std::optional<std::filesystem::path>& file) {
  return file ? detail::read_json_file(*file, kWhat) : json::object();
}

template <typename Parse>
auto parse_enum(const json& s, const char* name, Parse parse) -> std::optional<decltype(parse(std::string()))> {
  if (!s.contains(name)) return std::nullopt;
  try {
    return parse(detail::field<std::string>(s, name, kWhat));
  } catch (const ParameterError& e) {
    throw FormatError(std::string("run config: field '") + name + "': " + e.what());
  }
}

}  // namespace

ModelConfig resolve_model_config(const std::optional<std::filesystem::path>& config_file, std::size_t spf,
                                 std::size_t frame_height, std::size_t frame_width, const ModelOverrides& cli) {
  const json m = section(load(config_file), "model");
  reject_unknown(m, kModelFields, "model");
  const auto file_kind = parse_enum(m, "kind", parse_model_kind);
  const auto file_mode = parse_enum(m, "ctx_mode", parse_context_mode);
  const ModelKind kind = cli.kind.value_or(file_kind.value_or(ModelKind::transformer));
  const ContextMode mode = cli.ctx_mode.value_or(file_mode.value_or(ContextMode::raw_short));

  ModelConfig c = default_config(kind, spf, mode);
  c.frame_height = frame_height;
  c.frame_width = frame_width;
  size_field(m, "video_ctx_len", c.video_ctx_len);
  size_field(m, "video_channels", c.video_channels);
  size_field(m, "video_blocks", c.video_blocks);
  size_field(m, "fusion_blocks", c.fusion_blocks);
  size_field(m, "audio_channels", c.audio_channels);
  size_field(m, "audio_kernel", c.audio_kernel);
  size_field(m, "residual_channels", c.residual_channels);
  size_field(m, "kernel_size", c.kernel_size);
  size_field(m, "d_model", c.d_model);
  size_field(m, "heads", c.heads);
  size_field(m, "transformer_blocks", c.transformer_blocks);
  size_field(m, "ff_dim", c.ff_dim);
  size_field(m, "strided_layers", c.strided_layers);
  size_field(m, "max_positions", c.max_positions);
  if (m.contains("dilations")) {
    const auto d = detail::field<std::vector<long long>>(m, "dilations", kWhat);
    c.dilations.clear();
    for (auto v : d) {
      if (v < 1) throw FormatError("run config: field 'dilations' entries must be >= 1");
      c.dilations.push_back(static_cast<std::size_t>(v));
    }
  }
  // The wavenet default context tracks its receptive field unless pinned.
  if (kind == ModelKind::wavenet) c.audio_ctx_len = receptive_field(c);
  if (kind == ModelKind::deep_fusion) c.audio_ctx_len = c.video_ctx_len * spf;
  size_field(m, "audio_ctx_len", c.audio_ctx_len);
  c.quantized = cli.quantized || detail::field_or<bool>(m, "quantized", false, kWhat);
  validate(c);
  return c;
}

TrainConfig resolve_train_config(const std::optional<std::filesystem::path>& config_file,
                                 std::optional<std::uint64_t> seed, std::optional<LossKind> loss) {
  const json t = section(load(config_file), "train");
  reject_unknown(t, kTrainFields, "train");
  TrainConfig c;
  c.learning_rate = detail::field_or<double>(t, "learning_rate", c.learning_rate, kWhat);
  size_field(t, "steps", c.steps);
  size_field(t, "batch_size", c.batch_size);
  c.seed = detail::field_or<std::uint64_t>(t, "seed", c.seed, kWhat);
  if (const auto l = parse_enum(t, "loss", parse_loss_kind)) c.loss = *l;
  c.clip_norm = detail::field_or<double>(t, "clip_norm", c.clip_norm, kWhat);
  size_field(t, "checkpoint_interval", c.checkpoint_interval);
  size_field(t, "val_interval", c.val_interval);
  if (seed) c.seed = *seed;
  if (loss) c.loss = *loss;
  validate(c);
  return c;
}

void write_run_config(const ModelConfig& m, const TrainConfig& t, const std::filesystem::path& path) {
  json model = {{"kind", to_string(m.kind)},
                {"audio_ctx_len", m.audio_ctx_len},
                {"video_ctx_len", m.video_ctx_len},
                {"video_channels", m.video_channels},
                {"video_blocks", m.video_blocks},
                {"fusion_blocks", m.fusion_blocks},
                {"audio_channels", m.audio_channels},
                {"audio_kernel", m.audio_kernel},
                {"residual_channels", m.residual_channels},
                {"kernel_size", m.kernel_size},
                {"dilations", m.dilations},
                {"ctx_mode", to_string(m.ctx_mode)},
                {"d_model", m.d_model},
                {"heads", m.heads},
                {"transformer_blocks", m.transformer_blocks},
                {"ff_dim", m.ff_dim},
                {"strided_layers", m.strided_layers},
                {"max_positions", m.max_positions},
                {"quantized", m.quantized}};
  json train = {{"learning_rate", t.learning_rate}, {"steps", t.steps},
                {"batch_size", t.batch_size},       {"seed", t.seed},
                {"loss", to_string(t.loss)},        {"clip_norm", t.clip_norm},
                {"checkpoint_interval", t.checkpoint_interval}, {"val_interval", t.val_interval}};
  detail::write_json_file(json{{"model", model}, {"train", train}}, path, kWhat);
}

}  // namespace foley
