#include "foley/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>

#include "foley/dataset.hpp"
#include "foley/errors.hpp"
#include "foley/grad_check.hpp"
#include "foley/losses.hpp"
#include "foley/ops.hpp"
#include "foley/parameters.hpp"

namespace foley {

ModelConfig tiny_config(ModelKind kind) {
  ModelConfig c;
  c.kind = kind;
  c.spf = 4;
  c.frame_height = 3;
  c.frame_width = 4;
  c.video_ctx_len = 2;
  c.video_channels = 2;
  c.video_blocks = 1;
  c.fusion_blocks = 1;
  c.audio_channels = 2;
  c.audio_kernel = 2;
  c.residual_channels = 3;
  c.kernel_size = 2;
  c.dilations = {1, 2};
  c.d_model = 4;
  c.heads = 2;
  c.transformer_blocks = 2;
  c.ff_dim = 6;
  c.ctx_mode = ContextMode::raw_short;
  switch (kind) {
    case ModelKind::deep_fusion:
      c.audio_ctx_len = c.video_ctx_len * c.spf;
      break;
    case ModelKind::wavenet:
      c.audio_ctx_len = receptive_field(c);
      break;
    case ModelKind::transformer:
      c.audio_ctx_len = 4;
      break;
  }
  return c;
}

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v));
}

// Values in [-2, 2] at least 0.1 away from zero so relu kinks are avoided.
Tensor kink_free(Shape shape, Rng& rng) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) {
    const double m = rng.uniform(0.1, 2.0);
    x = rng.uniform() < 0.5 ? -m : m;
  }
  return Tensor::from(std::move(shape), std::move(v));
}

std::string fmt_err(double e) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "max rel err %.3e", e);
  return buf;
}

class Suite {
 public:
  explicit Suite(std::ostream& log) : log_(log) {}

  void record(const std::string& suite, const std::string& name, bool ok, const std::string& detail) {
    results.push_back({suite, name, ok, detail});
    log_ << (ok ? "PASS " : "FAIL ") << suite << '/' << name << ": " << detail << '\n';
  }

  template <typename Fn>
  void run(const std::string& suite, const std::string& name, Fn&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      record(suite, name, false, std::string("threw: ") + e.what());
    }
  }

  std::vector<CheckResult> results;

 private:
  std::ostream& log_;
};

void gradient_suite(Suite& s, Rng& rng) {
  constexpr double kOpTol = 1e-4, kModelTol = 1e-3;
  auto op = [&](const std::string& name, const TensorFn& fn, const std::vector<Tensor>& inputs) {
    s.run("gradient", name, [&] {
      const double e = grad_check(fn, inputs);
      s.record("gradient", name, e < kOpTol, fmt_err(e));
    });
  };
  using V = std::vector<Tensor>;
  op("linear", [](const V& in) { return ops::linear(in[0], in[1], in[2]); },
     {random_tensor({3, 3}, rng), random_tensor({3, 3}, rng), random_tensor({3}, rng)});
  op("conv1d_causal", [](const V& in) { return ops::conv1d_causal(in[0], in[1], 2, in[2]); },
     {random_tensor({2, 6}, rng), random_tensor({3, 2, 2}, rng), random_tensor({3}, rng)});
  op("conv1d_strided", [](const V& in) { return ops::conv1d(in[0], in[1], in[2], {2, 1, 0, 0}); },
     {random_tensor({2, 8}, rng), random_tensor({3, 2, 2}, rng), random_tensor({3}, rng)});
  op("conv3d",
     [](const V& in) { return ops::conv3d(in[0], in[1], in[2], {1, 1, 1}, {1, 1, 1}); },
     {random_tensor({2, 2, 3, 3}, rng), random_tensor({2, 2, 3, 3, 3}, rng), random_tensor({2}, rng)});
  op("conv1x1_channels", [](const V& in) { return ops::conv1x1_channels(in[0], in[1], in[2]); },
     {random_tensor({3, 2, 2}, rng), random_tensor({2, 3}, rng), random_tensor({2}, rng)});
  // The key bias only shifts every score of a query equally, so its exact
  // gradient is zero and finite differences on it measure roundoff alone. It
  // is held fixed here.
  const Tensor key_bias = random_tensor({4}, rng, -1, 1);
  op("multi_head_attention",
     [key_bias](const V& in) {
       ops::AttentionParams p{in[1], in[2], in[3], key_bias, in[4], in[5], in[6], in[7], 2};
       return ops::multi_head_attention(in[0], p, true);
     },
     {random_tensor({3, 4}, rng), random_tensor({4, 4}, rng, -1, 1), random_tensor({4}, rng, -1, 1),
      random_tensor({4, 4}, rng, -1, 1), random_tensor({4, 4}, rng, -1, 1), random_tensor({4}, rng, -1, 1),
      random_tensor({4, 4}, rng, -1, 1), random_tensor({4}, rng, -1, 1)});
  op("tanh", [](const V& in) { return ops::tanh(in[0]); }, {random_tensor({5}, rng)});
  op("relu", [](const V& in) { return ops::relu(in[0]); }, {kink_free({6}, rng)});
  op("softmax_lastdim", [](const V& in) { return ops::softmax_lastdim(in[0]); }, {random_tensor({2, 4}, rng)});
  // Targets are constants of the losses.
  const Tensor target = random_tensor({2, 3}, rng, -1, 1);
  op("mse", [target](const V& in) { return loss(LossKind::mse, in[0], target); },
     {random_tensor({2, 3}, rng, -1, 1)});
  op("mae", [target](const V& in) { return loss(LossKind::mae, in[0], target); },
     {random_tensor({2, 3}, rng, -1, 1)});
  op("xent_bernoulli", [target](const V& in) { return loss(LossKind::xent_bernoulli, in[0], target); },
     {random_tensor({2, 3}, rng, -0.9, 0.9)});
  op("xent_literal", [target](const V& in) { return loss(LossKind::xent_literal, in[0], target); },
     {random_tensor({2, 3}, rng, -1, 1)});

  for (ModelKind kind : {ModelKind::deep_fusion, ModelKind::wavenet, ModelKind::transformer}) {
    const std::string name = "model/" + to_string(kind);
    s.run("gradient", name, [&] {
      auto model = make_model(tiny_config(kind), rng.next());
      const auto& c = model->config();
      const Tensor audio = random_tensor({2, c.audio_ctx_len}, rng, -1, 1);
      const Tensor video = random_tensor({3, c.video_ctx_len, c.frame_height, c.frame_width}, rng, 0, 1);
      const Tensor target = random_tensor(model->sequence_mode() ? Shape{2, c.spf} : Shape{2}, rng, -1, 1);
      const auto r = grad_check_leaves(
          [&] { return loss(LossKind::mse, model->forward(audio, model->condition(video)), target); },
          model->parameters().tensors());
      s.record("gradient", name, r.max_relative_error < kModelTol,
               fmt_err(r.max_relative_error) + " over " + std::to_string(model->parameters().scalar_count()) +
                   " parameters");
    });
  }
}

// Largest |a - b| over the given output columns [begin, end) of [C, T] tensors.
double column_diff(const Tensor& a, const Tensor& b, std::size_t begin, std::size_t end) {
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  double m = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t t = begin; t < end; ++t) m = std::max(m, std::abs(a[r * cols + t] - b[r * cols + t]));
  return m;
}

Tensor perturbed(const Tensor& x, std::size_t column, double delta) {
  std::vector<double> v(x.data().begin(), x.data().end());
  const std::size_t cols = x.dim(1);
  for (std::size_t r = 0; r < x.dim(0); ++r) v[r * cols + column] += delta;
  return Tensor::from(x.shape(), std::move(v));
}

void causality_suite(Suite& s, Rng& rng) {
  NoGradGuard no_grad;
  s.run("causality", "conv1d_causal", [&] {
    const Tensor x = random_tensor({2, 12}, rng), k = random_tensor({3, 2, 3}, rng);
    const Tensor y = ops::conv1d_causal(x, k, 2);
    bool ok = true;
    for (std::size_t t = 0; t < 12; ++t) {
      const Tensor y2 = ops::conv1d_causal(perturbed(x, t, 0.5), k, 2);
      ok = ok && column_diff(y, y2, 0, t) == 0.0 && column_diff(y, y2, t, t + 1) > 0.0;
    }
    s.record("causality", "conv1d_causal", ok, "past outputs unchanged for every perturbed step");
  });

  s.run("causality", "masked_attention", [&] {
    const std::size_t T = 6, d = 4;
    ops::AttentionParams p{random_tensor({d, d}, rng, -1, 1), random_tensor({d}, rng, -1, 1),
                           random_tensor({d, d}, rng, -1, 1), random_tensor({d}, rng, -1, 1),
                           random_tensor({d, d}, rng, -1, 1), random_tensor({d}, rng, -1, 1),
                           random_tensor({d, d}, rng, -1, 1), random_tensor({d}, rng, -1, 1), 2};
    const Tensor x = random_tensor({T, d}, rng);
    const Tensor y = ops::transpose(ops::multi_head_attention(x, p, true));
    bool ok = true;
    for (std::size_t t = 0; t < T; ++t) {
      const Tensor xp = ops::transpose(perturbed(ops::transpose(x), t, 0.5));
      const Tensor y2 = ops::transpose(ops::multi_head_attention(xp, p, true));
      ok = ok && column_diff(y, y2, 0, t) == 0.0 && column_diff(y, y2, t, T) > 0.0;
    }
    s.record("causality", "masked_attention", ok, "earlier positions unchanged for every perturbed token");
  });

  s.run("causality", "wavenet_receptive_field", [&] {
    ModelConfig c = tiny_config(ModelKind::wavenet);
    c.dilations = {1, 2, 4};
    c.kernel_size = 3;
    const std::size_t rf = receptive_field(c);
    const std::size_t expected = 1 + (3 - 1) * (1 + 1 + 2 + 4);
    c.audio_ctx_len = rf + 4;
    WavenetModel model(c, rng.next());
    const std::size_t A = c.audio_ctx_len, out = A - 1;
    const Tensor x = random_tensor({2, A}, rng, -1, 1);
    const Tensor h = model.stack_forward(x);
    bool ok = rf == expected;
    for (std::size_t t = 0; t < A; ++t) {
      const Tensor h2 = model.stack_forward(perturbed(x, t, 0.5));
      ok = ok && column_diff(h, h2, 0, t) == 0.0;
      const bool inside = out - t < rf;
      const double d = column_diff(h, h2, out, out + 1);
      ok = ok && (inside ? d > 0.0 : d == 0.0);
    }
    s.record("causality", "wavenet_receptive_field", ok,
             "receptive field " + std::to_string(rf) + " (closed form " + std::to_string(expected) + ")");
  });

  s.run("causality", "transformer_stack", [&] {
    ModelConfig c = tiny_config(ModelKind::transformer);
    TransformerModel model(c, rng.next());
    const std::size_t A = c.audio_ctx_len;
    const Tensor x = random_tensor({2, A}, rng, -1, 1);
    const Tensor h = ops::transpose(model.stack_forward(model.tokens(x)));
    bool ok = true;
    for (std::size_t t = 0; t < A; ++t) {
      const Tensor h2 = ops::transpose(model.stack_forward(model.tokens(perturbed(x, t, 0.5))));
      ok = ok && column_diff(h, h2, 0, t) == 0.0 && column_diff(h, h2, A - 1, A) > 0.0;
    }
    s.record("causality", "transformer_stack", ok, "tokens before the perturbation unchanged; last token reacts");
  });
}

void alignment_suite(Suite& s, Rng& rng, std::size_t cases) {
  s.run("alignment", "random_alignment", [&] {
    const int fps_choices[] = {1, 2, 3, 5, 10, 24, 25, 30, 50, 60};
    std::size_t failures = 0;
    for (std::size_t i = 0; i < cases; ++i) {
      const int fps = fps_choices[rng.below(std::size(fps_choices))];
      const int rate = fps * static_cast<int>(1 + rng.below(200));
      const std::size_t spf = static_cast<std::size_t>(rate / fps);
      const std::size_t len = rng.below(12 * spf + 5);
      const std::size_t frames_needed = len / spf;
      const std::size_t frames = std::max<std::size_t>(1, frames_needed + rng.below(3));
      AudioBuffer a = AudioBuffer::silence(len, rate);
      for (std::size_t t = 0; t < len; ++t) a.channels[0][t] = a.channels[1][t] = std::sin(0.01 * t);
      VideoClip v = VideoClip::blank(frames, 1, 1, fps);
      try {
        if (frames_needed == 0) {
          try {
            align(a, v);
            ++failures;
          } catch (const AlignmentError&) {
          }
          continue;
        }
        const AlignedAV av = align(a, v);
        const bool ok = av.spf == spf && av.audio.size() % spf == 0 && av.frames() * spf == av.audio.size() &&
                        av.audio.size() == len - len % spf && av.audio.channels[0][av.audio.size() - 1] == a.channels[0][av.audio.size() - 1];
        if (!ok) ++failures;
        const std::size_t f = rng.below(av.frames());
        const std::size_t A = 1 + rng.below(3 * spf), n = 1 + rng.below(4);
        const auto w = sample_window(av, f, A, n, TargetKind::sample, rng.below(spf));
        if (w.audio_ctx.shape() != Shape{2, A} || w.video_ctx.shape() != Shape{3, n, 1, 1}) ++failures;
        const auto w0 = sample_window(av, 0, A, n, TargetKind::sample, 0);
        for (double x : w0.audio_ctx.data())
          if (x != 0.0) {
            ++failures;
            break;
          }
      } catch (const std::exception&) {
        ++failures;
      }
    }
    s.record("alignment", "random_alignment", failures == 0,
             std::to_string(cases) + " cases, " + std::to_string(failures) + " failures");
  });
}

}  // namespace

std::vector<CheckResult> run_selftest(std::ostream& log, const SelftestOptions& options) {
  const Precision saved = precision();
  set_precision(Precision::f64);
  Suite suite(log);
  Rng rng(options.seed);
  gradient_suite(suite, rng);
  causality_suite(suite, rng);
  alignment_suite(suite, rng, options.alignment_cases);
  set_precision(saved);
  return suite.results;
}

bool all_passed(const std::vector<CheckResult>& results) {
  for (const auto& r : results)
    if (!r.passed) return false;
  return !results.empty();
}

}  // namespace foley
