#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "foley/audio.hpp"
#include "foley/errors.hpp"
#include "test_util.hpp"

namespace foley {
namespace {

using Bytes = std::vector<unsigned char>;

void put_u16(Bytes& b, std::uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back(v >> 8);
}
void put_u32(Bytes& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}
void put_tag(Bytes& b, const char* tag) { b.insert(b.end(), tag, tag + 4); }

// Hand-assembled RIFF file with a canonical 16-byte fmt chunk.
Bytes wav_bytes(std::uint16_t format, std::uint16_t channels, std::uint32_t rate, std::uint16_t bits,
                const Bytes& payload) {
  Bytes b;
  put_tag(b, "RIFF");
  put_u32(b, static_cast<std::uint32_t>(36 + payload.size()));
  put_tag(b, "WAVE");
  put_tag(b, "fmt ");
  put_u32(b, 16);
  put_u16(b, format);
  put_u16(b, channels);
  put_u32(b, rate);
  put_u32(b, rate * channels * bits / 8);
  put_u16(b, static_cast<std::uint16_t>(channels * bits / 8));
  put_u16(b, bits);
  put_tag(b, "data");
  put_u32(b, static_cast<std::uint32_t>(payload.size()));
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

Bytes pcm16(const std::vector<std::int16_t>& samples) {
  Bytes b;
  for (auto s : samples) put_u16(b, static_cast<std::uint16_t>(s));
  return b;
}

std::uint32_t read_u32(const Bytes& b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

TEST(Wav, FullScalePcmMapsToScaledAmplitude) {
  const AudioBuffer a = parse_wav(wav_bytes(1, 2, 8820, 16, pcm16({32767, 0, -32768, 16384})));
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a.channels[0][0], 32767.0 / 32768.0);
  EXPECT_EQ(a.channels[1][0], 0.0);
  EXPECT_EQ(a.channels[0][1], -1.0);
  EXPECT_EQ(a.channels[1][1], 0.5);
  EXPECT_EQ(a.sample_rate, 8820);
}

TEST(Wav, MonoIsDuplicated) {
  const AudioBuffer a = parse_wav(wav_bytes(1, 1, 100, 16, pcm16({1, -2, 300, 4000, -5})));
  ASSERT_EQ(a.size(), 5u);
  EXPECT_EQ(a.channels[0], a.channels[1]);
  EXPECT_EQ(a.channels[0][2], 300.0 / 32768.0);
}

TEST(Wav, Float32Input) {
  Bytes payload;
  for (float f : {0.25f, -0.5f}) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(payload, bits);
  }
  const AudioBuffer a = parse_wav(wav_bytes(3, 2, 44100, 32, payload));
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a.channels[0][0], 0.25);
  EXPECT_EQ(a.channels[1][0], -0.5);
}

TEST(Wav, ExtraChunksAreSkipped) {
  Bytes b = wav_bytes(1, 1, 100, 16, pcm16({7}));
  // Insert a LIST chunk between fmt and data.
  Bytes list;
  put_tag(list, "LIST");
  put_u32(list, 4);
  put_tag(list, "INFO");
  b.insert(b.begin() + 36, list.begin(), list.end());
  const std::uint32_t riff = read_u32(b, 4) + static_cast<std::uint32_t>(list.size());
  for (int i = 0; i < 4; ++i) b[4 + i] = (riff >> (8 * i)) & 0xff;
  EXPECT_EQ(parse_wav(b).channels[0][0], 7.0 / 32768.0);
}

TEST(Wav, MalformedInputIsFormatError) {
  Bytes good = wav_bytes(1, 2, 100, 16, pcm16({1, 2}));
  Bytes bad_tag = good;
  bad_tag[0] = 'X';
  EXPECT_THROW(parse_wav(bad_tag), FormatError);
  EXPECT_THROW(parse_wav(Bytes(good.begin(), good.begin() + 20)), FormatError);
  Bytes truncated_data = good;
  truncated_data.pop_back();
  EXPECT_THROW(parse_wav(truncated_data), FormatError);
  EXPECT_THROW(parse_wav({}), FormatError);
}

TEST(Wav, UnsupportedEncodingsAreRejected) {
  EXPECT_THROW(parse_wav(wav_bytes(1, 3, 100, 16, pcm16({1, 2, 3}))), UnsupportedError);
  EXPECT_THROW(parse_wav(wav_bytes(1, 1, 100, 8, Bytes{1, 2})), UnsupportedError);
  EXPECT_THROW(parse_wav(wav_bytes(1, 1, 100, 24, Bytes{1, 2, 3})), UnsupportedError);
}

TEST(Wav, RoundTripWithinOneLsb) {
  Rng rng(3);
  AudioBuffer a = AudioBuffer::silence(2000, 8820);
  for (auto& ch : a.channels)
    for (auto& v : ch) v = rng.uniform(-1.0, 1.0);
  a.channels[0][0] = 1.0;
  a.channels[1][0] = -1.0;
  a.channels[0][1] = 1.0 - 1e-9;
  const AudioBuffer back = parse_wav(encode_wav(a));
  ASSERT_EQ(back.size(), a.size());
  EXPECT_EQ(back.sample_rate, 8820);
  double worst = 0;
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(back.channels[c][i] - a.channels[c][i]));
  EXPECT_LE(worst, 1.0 / 32767.0);
}

TEST(Wav, ZeroAmplitudeIsPcmZero) {
  const Bytes b = encode_wav(AudioBuffer::silence(3, 100));
  ASSERT_EQ(b.size(), 44u + 12u);
  for (std::size_t i = 44; i < b.size(); ++i) EXPECT_EQ(b[i], 0);
}

TEST(Wav, HeaderDurationMatchesLength) {
  const Bytes b = encode_wav(AudioBuffer::silence(882, 8820));
  const std::uint32_t rate = read_u32(b, 24), byte_rate = read_u32(b, 28), data_bytes = read_u32(b, 40);
  EXPECT_EQ(rate, 8820u);
  EXPECT_EQ(byte_rate, 8820u * 4);
  EXPECT_DOUBLE_EQ(static_cast<double>(data_bytes) / byte_rate, 0.1);
}

TEST(Wav, FileRoundTrip) {
  const auto path = test::scratch_dir() / "a.wav";
  AudioBuffer a = AudioBuffer::silence(10, 4410);
  a.channels[0][3] = 0.5;
  write_wav(a, path);
  const AudioBuffer back = load_wav(path);
  EXPECT_EQ(back.channels[0][3], 0.5);
  EXPECT_EQ(back.sample_rate, 4410);
  EXPECT_THROW(load_wav(test::scratch_dir() / "missing.wav"), IoError);
}

TEST(Wav, WriterRejectsOutOfRangeAmplitude) {
  AudioBuffer a = AudioBuffer::silence(2, 100);
  a.channels[1][1] = 1.5;
  EXPECT_THROW(encode_wav(a), RangeError);
}

TEST(Downsample, PreservesDcAfterSettling) {
  AudioBuffer a = AudioBuffer::silence(44100, 44100);
  for (auto& ch : a.channels) std::fill(ch.begin(), ch.end(), 0.5);
  const AudioBuffer d = downsample_audio(a, 8820);
  ASSERT_EQ(d.size(), 8820u);
  EXPECT_EQ(d.sample_rate, 8820);
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 1000; i < d.size(); ++i) ASSERT_NEAR(d.channels[c][i], 0.5, 1e-6) << i;
}

TEST(Downsample, LengthIsFloorOfRatio) {
  EXPECT_EQ(downsample_audio(AudioBuffer::silence(44100, 44100), 8820).size(), 8820u);
  EXPECT_EQ(downsample_audio(AudioBuffer::silence(44104, 44100), 8820).size(), 8820u);
}

TEST(Downsample, SameRateIsIdentity) {
  Rng rng(4);
  AudioBuffer a = AudioBuffer::silence(50, 8820);
  for (auto& v : a.channels[0]) v = rng.uniform(-1, 1);
  const AudioBuffer d = downsample_audio(a, 8820);
  EXPECT_EQ(d.channels, a.channels);
}

TEST(Downsample, NonDivisorRateIsParameterError) {
  EXPECT_THROW(downsample_audio(AudioBuffer::silence(100, 44100), 8000), ParameterError);
  EXPECT_THROW(downsample_audio(AudioBuffer::silence(100, 8820), 44100), ParameterError);
}

AudioBuffer tone(double hz, std::size_t n, int rate) {
  AudioBuffer a = AudioBuffer::silence(n, rate);
  for (std::size_t i = 0; i < n; ++i)
    a.channels[0][i] = a.channels[1][i] = 0.5 * std::sin(2 * std::numbers::pi * hz * i / rate);
  return a;
}

TEST(Downsample, AttenuatesToneAboveTargetNyquist) {
  // Butterworth magnitude at 15 kHz against a 3969 Hz corner: (3969/15000)^4 ~ 0.005.
  const AudioBuffer a = tone(15000.0, 44100, 44100);
  const AudioBuffer d = downsample_audio(a, 8820);
  EXPECT_LT(rms(d.channels[0], 1000, d.size()), 0.02 * rms(a.channels[0], 0, a.size()));
}

TEST(Downsample, PassesLowTone) {
  const AudioBuffer a = tone(300.0, 44100, 44100);
  const AudioBuffer d = downsample_audio(a, 8820);
  EXPECT_NEAR(rms(d.channels[0], 1000, d.size()) / rms(a.channels[0], 0, a.size()), 1.0, 0.02);
}

TEST(Rms, MatchesDirectFormula) {
  const std::vector<double> x = {3, -4, 0, 12};
  EXPECT_DOUBLE_EQ(rms(x, 0, 2), std::sqrt(12.5));
  EXPECT_DOUBLE_EQ(rms(x, 0, 4), std::sqrt((9 + 16 + 144) / 4.0));
}

}  // namespace
}  // namespace foley
