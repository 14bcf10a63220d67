#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

#include "foley/dataset.hpp"
#include "foley/errors.hpp"
#include "test_util.hpp"

namespace foley {
namespace {

AudioBuffer ramp(std::size_t n, int rate) {
  AudioBuffer a = AudioBuffer::silence(n, rate);
  for (std::size_t i = 0; i < n; ++i) {
    a.channels[0][i] = static_cast<double>(i) / static_cast<double>(n);
    a.channels[1][i] = -a.channels[0][i];
  }
  return a;
}

VideoClip numbered(std::size_t frames, std::size_t h, std::size_t w, int fps) {
  VideoClip v = VideoClip::blank(frames, h, w, fps);
  for (std::size_t f = 0; f < frames; ++f)
    for (auto& p : v.frame(f)) p = static_cast<double>(f + 1) / static_cast<double>(frames + 1);
  return v;
}

TEST(Align, SamplesPerFrame) {
  EXPECT_EQ(samples_per_frame(44100, 30), 1470u);
  EXPECT_EQ(samples_per_frame(8820, 30), 294u);
  EXPECT_THROW(samples_per_frame(44100, 29), AlignmentError);
  EXPECT_THROW(samples_per_frame(44100, 0), AlignmentError);
}

TEST(Align, ClipsAudioRemainderAndVideoTail) {
  const AlignedAV av = align(ramp(44117, 22050), numbered(70, 1, 1, 30));
  EXPECT_EQ(av.spf, 735u);
  EXPECT_EQ(av.audio.size(), 44100u);
  EXPECT_EQ(av.frames(), 60u);
  EXPECT_EQ(av.video.pixels.size(), 60u * 3);
}

TEST(Align, ExactLengthRemovesNothing) {
  const AudioBuffer a = ramp(5 * 294, 8820);
  const VideoClip v = numbered(5, 2, 2, 30);
  const AlignedAV av = align(a, v);
  EXPECT_EQ(av.audio.channels, a.channels);
  EXPECT_EQ(av.video.pixels, v.pixels);
}

TEST(Align, Errors) {
  EXPECT_THROW(align(ramp(1000, 44100), numbered(5, 1, 1, 29)), AlignmentError);
  EXPECT_THROW(align(ramp(10 * 294, 8820), numbered(9, 1, 1, 30)), AlignmentError);
  EXPECT_THROW(align(ramp(100, 8820), numbered(9, 1, 1, 30)), AlignmentError);
}

TEST(Align, RandomTriplesSatisfyInvariantsAndKeepPrefix) {
  Rng rng(99);
  const int fps_choices[] = {24, 25, 30, 50, 60};
  for (int trial = 0; trial < 1000; ++trial) {
    const int fps = fps_choices[rng.below(5)];
    const int rate = fps * static_cast<int>(1 + rng.below(400));
    const std::size_t spf = static_cast<std::size_t>(rate / fps);
    const std::size_t len = spf + rng.below(20 * spf);
    const std::size_t frames_needed = len / spf;
    const std::size_t frames = frames_needed + rng.below(4);
    const AudioBuffer a = ramp(len, rate);
    const AlignedAV av = align(a, numbered(frames, 1, 1, fps));
    ASSERT_EQ(av.spf * static_cast<std::size_t>(fps), static_cast<std::size_t>(rate));
    ASSERT_EQ(av.audio.size() % av.spf, 0u);
    ASSERT_EQ(av.frames() * av.spf, av.audio.size());
    ASSERT_EQ(av.audio.size(), len - len % spf);
    for (int c = 0; c < 2; ++c)
      ASSERT_TRUE(std::equal(av.audio.channels[c].begin(), av.audio.channels[c].end(), a.channels[c].begin()));
    for (std::size_t f = 0; f < av.frames(); ++f)
      ASSERT_EQ(av.video.frame(f)[0], static_cast<double>(f + 1) / static_cast<double>(frames + 1));
  }
}

AlignedAV counting_clip(std::size_t frames, std::size_t spf) {
  // fps 1 so that rate == spf; sample i holds i/100 on the left, -i/100 on the right.
  AudioBuffer a = AudioBuffer::silence(frames * spf, static_cast<int>(spf));
  for (std::size_t i = 0; i < a.size(); ++i) {
    a.channels[0][i] = static_cast<double>(i) / 100.0;
    a.channels[1][i] = -static_cast<double>(i) / 100.0;
  }
  return align(a, numbered(frames, 2, 3, 1));
}

TEST(Window, FirstFrameHasNoAudioHistory) {
  const AlignedAV av = counting_clip(4, 4);
  const ContextWindow w = sample_window(av, 0, 6, 1, TargetKind::sample, 0);
  EXPECT_EQ(w.audio_ctx.shape(), (Shape{2, 6}));
  for (double v : w.audio_ctx.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(test::values(w.target), (std::vector<double>{0.0, -0.0}));
}

TEST(Window, VideoContextPadsMissingLeadingFrames) {
  const AlignedAV av = counting_clip(4, 4);
  const ContextWindow w = sample_window(av, 0, 2, 4, TargetKind::sample, 0);
  ASSERT_EQ(w.video_ctx.shape(), (Shape{3, 4, 2, 3}));
  const std::size_t plane = 6;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t slot = 0; slot < 4; ++slot)
      for (std::size_t p = 0; p < plane; ++p) {
        const double v = w.video_ctx[(c * 4 + slot) * plane + p];
        if (slot < 3) EXPECT_EQ(v, 0.0);
        else EXPECT_EQ(v, av.video.frame(0)[c * plane + p]);
      }
}

TEST(Window, AudioContextIndexArithmetic) {
  const AlignedAV av = counting_clip(4, 4);
  const ContextWindow w = sample_window(av, 2, 3, 1, TargetKind::sample, 1);
  EXPECT_EQ(test::values(w.audio_ctx), (std::vector<double>{0.06, 0.07, 0.08, -0.06, -0.07, -0.08}));
  EXPECT_EQ(test::values(w.target), (std::vector<double>{0.09, -0.09}));
  EXPECT_EQ(w.frame_index, 2u);
  EXPECT_EQ(w.sample_offset, 1u);
}

TEST(Window, FrameSequenceTarget) {
  const AlignedAV av = counting_clip(4, 4);
  const ContextWindow w = sample_window(av, 1, 4, 2, TargetKind::frame_sequence);
  EXPECT_EQ(test::values(w.target), (std::vector<double>{0.04, 0.05, 0.06, 0.07, -0.04, -0.05, -0.06, -0.07}));
  EXPECT_EQ(test::values(w.audio_ctx), (std::vector<double>{0.0, 0.01, 0.02, 0.03, -0.0, -0.01, -0.02, -0.03}));
}

TEST(Window, AlwaysReturnsRequestedLengths) {
  const AlignedAV av = counting_clip(5, 3);
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t f = rng.below(5), off = rng.below(3), A = 1 + rng.below(40), n = 1 + rng.below(7);
    const auto kind = rng.below(2) ? TargetKind::sample : TargetKind::frame_sequence;
    const ContextWindow w = sample_window(av, f, A, n, kind, kind == TargetKind::sample ? off : 0);
    ASSERT_EQ(w.audio_ctx.shape(), (Shape{2, A}));
    ASSERT_EQ(w.video_ctx.shape(), (Shape{3, n, 2, 3}));
    ASSERT_EQ(w.target.shape(), (kind == TargetKind::sample ? Shape{2} : Shape{2, 3}));
  }
}

TEST(Window, OutOfRangeIndicesAreBoundsErrors) {
  const AlignedAV av = counting_clip(4, 4);
  EXPECT_THROW(sample_window(av, 4, 3, 1, TargetKind::sample), BoundsError);
  EXPECT_THROW(sample_window(av, 0, 3, 1, TargetKind::sample, 4), BoundsError);
  EXPECT_THROW(sample_window(av, 0, 0, 1, TargetKind::sample), BoundsError);
  EXPECT_THROW(sample_window(av, 0, 3, 0, TargetKind::sample), BoundsError);
}

TEST(Dataset, SplitIsTimeOrdered) {
  Dataset d{"clip", counting_clip(10, 2), 0.8};
  EXPECT_EQ(d.train_frames(), 8u);
  EXPECT_EQ(d.validation_frames(), 2u);
  d.train_fraction = 0.75;
  EXPECT_EQ(d.train_frames(), 7u);
}

TEST(Dataset, SaveLoadRoundTrip) {
  const auto dir = test::scratch_dir();
  Dataset d{"named", counting_clip(3, 4), 0.5};
  save_dataset(d, dir / "d.fds");
  const Dataset back = load_dataset(dir / "d.fds");
  EXPECT_EQ(back.name, "named");
  EXPECT_EQ(back.train_fraction, 0.5);
  EXPECT_EQ(back.av.spf, 4u);
  EXPECT_EQ(back.av.frames(), 3u);
  EXPECT_EQ(back.av.audio.sample_rate, 4);
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 12; ++i)
      EXPECT_EQ(back.av.audio.channels[c][i], static_cast<double>(static_cast<float>(d.av.audio.channels[c][i])));
  std::ofstream(dir / "bad.fds") << "garbage";
  EXPECT_THROW(load_dataset(dir / "bad.fds"), FormatError);
}

TEST(Dataset, IngestPipeline) {
  const auto dir = test::scratch_dir();
  AudioBuffer a = AudioBuffer::silence(10 * 1470 + 100, 44100);
  for (auto& ch : a.channels) std::fill(ch.begin(), ch.end(), 0.25);
  write_wav(a, dir / "a.wav");
  save_clip(numbered(12, 8, 8, 30), dir / "clip.json");
  write_paired_manifest({dir / "clip.json", dir / "a.wav", 0.8, "vid"}, dir / "pair.json");
  const PairedManifest m = read_paired_manifest(dir / "pair.json");
  EXPECT_EQ(m.name, "vid");
  const Dataset d = ingest(m, IngestOptions{8820, 4, 4});
  EXPECT_EQ(d.name, "vid");
  EXPECT_EQ(d.av.spf, 294u);
  EXPECT_EQ(d.av.frames(), 10u);
  EXPECT_EQ(d.av.video.height, 4u);
  EXPECT_EQ(d.av.audio.sample_rate, 8820);
  EXPECT_NEAR(d.av.audio.channels[0].back(), 0.25, 1e-4);
}

TEST(Dataset, IngestRejectsEmptySplit) {
  const auto dir = test::scratch_dir();
  write_wav(AudioBuffer::silence(2 * 294, 8820), dir / "a.wav");
  save_clip(numbered(2, 2, 2, 30), dir / "clip.json");
  EXPECT_THROW(ingest({dir / "clip.json", dir / "a.wav", 0.4, ""}, IngestOptions{8820, 2, 2}), AlignmentError);
}

}  // namespace
}  // namespace foley
