#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "foley/dataset.hpp"
#include "foley/errors.hpp"
#include "foley/generate.hpp"
#include "foley/quantize.hpp"
#include "foley/selftest.hpp"
#include "test_util.hpp"

namespace foley {
namespace {

// Records every call and emits a deterministic function of its context, so
// the loop can be checked against a hand-written replay.
class ProbeModel final : public Model {
 public:
  explicit ProbeModel(ModelConfig c) : Model(std::move(c)) {}

  Tensor condition(const Tensor& video_ctx) const override {
    videos.push_back(test::values(video_ctx));
    return Tensor::full({2, config_.audio_ctx_len}, static_cast<double>(videos.size()));
  }

  Tensor forward(const Tensor& audio_ctx, const Tensor& conditioning) const override {
    contexts.push_back(test::values(audio_ctx));
    conds.push_back(conditioning[0]);
    const double v = emit(contexts.size());
    if (sequence_mode()) return Tensor::full({2, config_.spf}, v);
    if (quantized()) {
      std::vector<double> logits(2 * kQuantBins, 0.0);
      logits[quantize(v)] = 5.0;
      logits[kQuantBins + quantize(-v)] = 5.0;
      return Tensor::from({2, kQuantBins}, logits);
    }
    return Tensor::from({2}, {v, -v});
  }

  static double emit(std::size_t call) { return std::sin(0.7 * static_cast<double>(call)); }

  mutable std::vector<std::vector<double>> videos, contexts;
  mutable std::vector<double> conds;
};

ModelConfig probe_config(ModelKind kind, std::size_t spf, std::size_t A) {
  ModelConfig c = tiny_config(kind);
  c.spf = spf;
  c.audio_ctx_len = A;
  return c;
}

VideoClip clip(std::size_t frames, std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  VideoClip v = VideoClip::blank(frames, h, w, 30);
  for (auto& p : v.pixels) p = rng.uniform();
  return v;
}

TEST(Generate, OutputLengthIsFramesTimesSpf) {
  auto c = tiny_config(ModelKind::transformer);
  c.spf = 294;
  auto m = make_model(c, 1);
  GenerationStats stats;
  const AudioBuffer out = generate(*m, clip(3, c.frame_height, c.frame_width, 2), 0, &stats);
  EXPECT_EQ(out.size(), 882u);
  EXPECT_EQ(out.sample_rate, 294 * 30);
  EXPECT_EQ(stats.conditioning_calls, 3u);
  EXPECT_EQ(stats.model_steps, 882u);
  for (const auto& ch : out.channels)
    for (double v : ch) {
      ASSERT_GE(v, -1.0);
      ASSERT_LE(v, 1.0);
    }
}

TEST(Generate, SampleModeReplaysOwnOutputsOnly) {
  const auto c = probe_config(ModelKind::transformer, 4, 6);
  ProbeModel m(c);
  const VideoClip v = clip(3, c.frame_height, c.frame_width, 3);
  GenerationStats stats;
  const AudioBuffer out = generate(m, v, 0, &stats);
  ASSERT_EQ(out.size(), 12u);
  EXPECT_EQ(stats.conditioning_calls, 3u);
  EXPECT_EQ(m.videos.size(), 3u);
  ASSERT_EQ(m.contexts.size(), 12u);
  // Replay: sample i is emit(i + 1); context i is the 6 samples before i, zero padded.
  std::vector<double> left(12), right(12);
  for (std::size_t i = 0; i < 12; ++i) {
    std::vector<double> expected(12, 0.0);
    for (std::size_t j = 0; j < 6; ++j) {
      const long src = static_cast<long>(i) - 6 + static_cast<long>(j);
      if (src >= 0) {
        expected[j] = left[src];
        expected[6 + j] = right[src];
      }
    }
    EXPECT_EQ(m.contexts[i], expected) << "step " << i;
    EXPECT_EQ(m.conds[i], static_cast<double>(i / 4 + 1)) << "video context frozen within a frame";
    left[i] = ProbeModel::emit(i + 1);
    right[i] = -left[i];
  }
  EXPECT_EQ(out.channels[0], left);
  EXPECT_EQ(out.channels[1], right);
  for (std::size_t f = 0; f < 3; ++f)
    EXPECT_EQ(m.videos[f], test::values(video_context(v, f, c.video_ctx_len)));
  for (double x : m.contexts[0]) EXPECT_EQ(x, 0.0);
}

TEST(Generate, GroundTruthNeverEntersTheLoop) {
  // The loop only sees the clip; two different "soundtracks" cannot matter.
  // Running twice on the same clip gives identical audio.
  const auto c = tiny_config(ModelKind::wavenet);
  auto m = make_model(c, 4);
  const VideoClip v = clip(4, c.frame_height, c.frame_width, 5);
  const AudioBuffer a = generate(*m, v), b = generate(*m, v);
  EXPECT_EQ(a.channels, b.channels);
}

TEST(Generate, SequenceModeOneStepPerFrame) {
  const auto c = probe_config(ModelKind::deep_fusion, 5, 10);
  ProbeModel m(c);
  GenerationStats stats;
  const AudioBuffer out = generate(m, clip(4, c.frame_height, c.frame_width, 6), 0, &stats);
  EXPECT_EQ(out.size(), 20u);
  EXPECT_EQ(stats.model_steps, 4u);
  EXPECT_EQ(stats.conditioning_calls, 4u);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(out.channels[0][i], ProbeModel::emit(i / 5 + 1));
  // Context for frame 2 is frames 0 and 1 of generated audio.
  for (std::size_t j = 0; j < 10; ++j) EXPECT_EQ(m.contexts[2][j], ProbeModel::emit(j / 5 + 1));
}

TEST(Generate, QuantizedOutputsAreDequantizedArgmax) {
  auto c = probe_config(ModelKind::transformer, 3, 4);
  c.quantized = true;
  ProbeModel m(c);
  const AudioBuffer out = generate(m, clip(2, c.frame_height, c.frame_width, 7));
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(out.channels[0][i], dequantize(quantize(ProbeModel::emit(i + 1))));
    EXPECT_EQ(out.channels[1][i], dequantize(quantize(-ProbeModel::emit(i + 1))));
  }
}

TEST(Generate, RealQuantizedTransformerRuns) {
  auto c = tiny_config(ModelKind::transformer);
  c.quantized = true;
  auto m = make_model(c, 8);
  const AudioBuffer out = generate(*m, clip(2, c.frame_height, c.frame_width, 9));
  for (double v : out.channels[0]) EXPECT_EQ(v, dequantize(quantize(v)));
}

TEST(Generate, ContractErrors) {
  const auto c = tiny_config(ModelKind::transformer);
  auto m = make_model(c, 1);
  const VideoClip v = clip(3, c.frame_height, c.frame_width, 1);
  GenerationSchedule s = schedule_for(*m, v);
  s.mode = GenerationMode::sequence;
  EXPECT_THROW(generate(*m, v, s), ContractError);
  s = schedule_for(*m, v);
  s.spf += 1;
  EXPECT_THROW(generate(*m, v, s), ContractError);
  EXPECT_THROW(generate(*m, v, 4), ContractError);
  EXPECT_THROW(generate(*m, clip(3, c.frame_height + 1, c.frame_width, 1)), ContractError);
  EXPECT_EQ(schedule_for(*m, v, 2).output_length(), 2 * c.spf);
  EXPECT_EQ(schedule_for(*m, v).steps_per_frame(), c.spf);
}

// --- discontinuity -------------------------------------------------------

AudioBuffer mono(const std::vector<double>& x) {
  AudioBuffer a = AudioBuffer::silence(x.size(), 100);
  a.channels[0] = a.channels[1] = x;
  return a;
}

double discontinuity_oracle(const std::vector<double>& x, std::size_t spf) {
  double jumps = 0, all = 0;
  const std::size_t frames = x.size() / spf;
  for (std::size_t k = 1; k < frames; ++k) jumps += std::abs(x[k * spf] - x[k * spf - 1]);
  for (std::size_t t = 1; t < x.size(); ++t) all += std::abs(x[t] - x[t - 1]);
  return (jumps / (frames - 1)) / (all / (x.size() - 1) + 1e-12);
}

TEST(Discontinuity, ConstantSignalScoresZero) {
  EXPECT_EQ(frame_boundary_discontinuity(mono(std::vector<double>(16, 0.3)), 4), 0.0);
}

TEST(Discontinuity, StaircaseMatchesBruteForce) {
  const std::vector<double> x = {0, 0, 0, 0, 1, 1, 1, 1, 0, 0, 0, 0, 1, 1, 1, 1};
  const double score = frame_boundary_discontinuity(mono(x), 4);
  EXPECT_NEAR(score, discontinuity_oracle(x, 4), 1e-12);
  EXPECT_NEAR(score, 5.0, 1e-9);  // 1 / (3/15)
}

TEST(Discontinuity, ChannelsArePooled) {
  AudioBuffer a = mono({0, 0, 1, 1});
  a.channels[1] = {0, 1, 0, 1};
  // boundary |1-0| + |0-1| over 2; overall (1 + 3) / 6
  EXPECT_NEAR(frame_boundary_discontinuity(a, 2), 1.0 / (4.0 / 6.0 + 1e-12), 1e-14);
}

TEST(Discontinuity, SmoothSineScoresNearOne) {
  std::vector<double> x(294 * 30);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.5 * std::sin(2 * std::numbers::pi * i / 97.3);
  EXPECT_NEAR(frame_boundary_discontinuity(mono(x), 294), 1.0, 0.2);
}

TEST(Discontinuity, Errors) {
  EXPECT_THROW(frame_boundary_discontinuity(mono(std::vector<double>(4, 0)), 4), ContractError);
  EXPECT_THROW(frame_boundary_discontinuity(mono(std::vector<double>(9, 0)), 4), ContractError);
}

TEST(WaveformCsv, Format) {
  const auto path = test::scratch_dir() / "w.csv";
  AudioBuffer a = AudioBuffer::silence(2, 100);
  a.channels[0] = {0.5, -0.25};
  a.channels[1] = {0.0, 1.0};
  write_waveform_csv(a, path);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), "index,left,right\n0,0.5,0\n1,-0.25,1\n");
}

}  // namespace
}  // namespace foley
