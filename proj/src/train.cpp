#include "foley/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "foley/errors.hpp"
#include "foley/ops.hpp"
#include "foley/quantize.hpp"

namespace foley {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::size_t t = 0;
};

TargetKind target_kind(const Model& model) {
  return model.sequence_mode() ? TargetKind::frame_sequence : TargetKind::sample;
}

Tensor window_loss(const Model& model, const ContextWindow& w, LossKind kind) {
  const Tensor out = model.forward(w.audio_ctx, model.condition(w.video_ctx));
  return loss(kind, out, w.target);
}

void check_spf(const Model& model, const Dataset& dataset) {
  if (model.config().spf != dataset.av.spf) {
    throw ContractError("model expects spf " + std::to_string(model.config().spf) + " but dataset '" + dataset.name +
                        "' has spf " + std::to_string(dataset.av.spf));
  }
  const auto& v = dataset.av.video;
  if (v.height != model.config().frame_height || v.width != model.config().frame_width) {
    throw ContractError("model expects " + std::to_string(model.config().frame_height) + "x" +
                        std::to_string(model.config().frame_width) + " frames but dataset has " +
                        std::to_string(v.height) + "x" + std::to_string(v.width));
  }
}

Tensor eval_target(const AlignedAV& av, std::size_t frame, std::size_t offset, TargetKind kind) {
  const std::size_t begin = frame * av.spf + (kind == TargetKind::sample ? offset : 0);
  const std::size_t len = kind == TargetKind::sample ? 1 : av.spf;
  std::vector<double> values;
  values.reserve(2 * len);
  for (const auto& ch : av.audio.channels) values.insert(values.end(), ch.begin() + begin, ch.begin() + begin + len);
  return Tensor::from(kind == TargetKind::sample ? Shape{2} : Shape{2, len}, std::move(values));
}

}  // namespace

void validate(const TrainConfig& c) {
  auto fail = [](const std::string& msg) { throw ParameterError("train config: " + msg); };
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate)) fail("learning_rate must be finite and >= 0");
  if (c.steps < 1) fail("steps must be >= 1");
  if (c.batch_size < 1) fail("batch_size must be >= 1");
  if (!(c.clip_norm > 0.0)) fail("clip_norm must be > 0");
  if (c.checkpoint_interval < 1) fail("checkpoint_interval must be >= 1");
}

void check_loss_compatible(LossKind kind, const Model& model) {
  if (kind == LossKind::xent_categorical && !model.quantized()) {
    throw ContractError("loss xent-cat needs a quantized transformer");
  }
  if (kind != LossKind::xent_categorical && model.quantized()) {
    throw ContractError("a quantized transformer must be trained with the xent-cat loss");
  }
}

TrainReport train(Model& model, const Dataset& dataset, const TrainConfig& config, const CheckpointHook& on_checkpoint) {
  validate(config);
  check_loss_compatible(config.loss, model);
  check_spf(model, dataset);
  const std::size_t train_frames = dataset.train_frames();
  if (train_frames == 0) throw ContractError("dataset '" + dataset.name + "' has an empty train split");

  const auto& mc = model.config();
  const TargetKind kind = target_kind(model);
  const std::vector<Tensor> params = model.parameters().tensors();
  AdamState adam;
  for (const auto& p : params) {
    adam.m.emplace_back(p.size(), 0.0);
    adam.v.emplace_back(p.size(), 0.0);
  }

  Rng rng(config.seed);
  TrainReport report;
  for (std::size_t step = 1; step <= config.steps; ++step) {
    Tensor total;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const std::size_t frame = rng.below(train_frames);
      const std::size_t offset = kind == TargetKind::sample ? rng.below(dataset.av.spf) : 0;
      const ContextWindow w = sample_window(dataset.av, frame, mc.audio_ctx_len, mc.video_ctx_len, kind, offset);
      const Tensor l = window_loss(model, w, config.loss);
      total = total.defined() ? ops::add(total, l) : l;
    }
    const Tensor batch_loss = ops::scale(total, 1.0 / static_cast<double>(config.batch_size));
    const double value = batch_loss.item();
    if (!std::isfinite(value)) {
      throw DivergenceError("training diverged at step " + std::to_string(step) + ": loss is " + std::to_string(value));
    }
    backward(batch_loss);

    double norm_sq = 0.0;
    for (const auto& p : params)
      for (double g : p.grad()) norm_sq += g * g;
    const double norm = std::sqrt(norm_sq);
    const double clip = norm > config.clip_norm ? config.clip_norm / norm : 1.0;

    ++adam.t;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam.t));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor p = params[i];
      const auto g = p.grad();
      auto data = p.mutable_data();
      auto& m = adam.m[i];
      auto& v = adam.v[i];
      for (std::size_t j = 0; j < data.size(); ++j) {
        const double gj = g[j] * clip;
        m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * gj;
        v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * gj * gj;
        const double update = config.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + kAdamEps);
        data[j] = static_cast<double>(static_cast<float>(data[j] - update));
      }
    }

    CurvePoint point{step, value, std::nullopt};
    const bool last = step == config.steps;
    if (config.val_interval > 0 && (step % config.val_interval == 0 || last) && dataset.validation_frames() > 0) {
      point.val_loss = evaluate(model, dataset, config.loss);
    }
    report.curve.push_back(point);
    if (on_checkpoint && (step % config.checkpoint_interval == 0 || last)) on_checkpoint(step, model);
  }
  report.final_train_loss = report.curve.back().train_loss;
  return report;
}

double evaluate(const Model& model, const Dataset& dataset, LossKind kind) {
  check_loss_compatible(kind, model);
  check_spf(model, dataset);
  const std::size_t first = dataset.train_frames();
  const std::size_t frames = dataset.av.frames();
  if (first >= frames) throw ContractError("dataset '" + dataset.name + "' has an empty validation split");

  NoGradGuard no_grad;
  const auto& mc = model.config();
  const TargetKind target = target_kind(model);
  const std::size_t steps_per_frame = target == TargetKind::sample ? dataset.av.spf : 1;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t f = first; f < frames; ++f) {
    // The video context is shared by every window of a frame.
    const Tensor conditioning = model.condition(video_context(dataset.av.video, f, mc.video_ctx_len));
    for (std::size_t s = 0; s < steps_per_frame; ++s) {
      const std::size_t position = f * dataset.av.spf + s;
      const Tensor ctx = audio_context(dataset.av.audio, position, mc.audio_ctx_len);
      total += loss(kind, model.forward(ctx, conditioning), eval_target(dataset.av, f, s, target)).item();
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

void write_loss_csv(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("loss csv: cannot write " + path.string());
  out << "step,train_loss,val_loss\n";
  char buf[64];
  for (const auto& p : report.curve) {
    std::snprintf(buf, sizeof buf, "%.9g", p.train_loss);
    out << p.step << ',' << buf << ',';
    if (p.val_loss) {
      std::snprintf(buf, sizeof buf, "%.9g", *p.val_loss);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("loss csv: write failed for " + path.string());
}

}  // namespace foley
