#include "foley/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include "foley/errors.hpp"

namespace foley {

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class ByteReader {
 public:
  explicit ByteReader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  bool has(std::size_t n) const { return pos_ + n <= bytes_.size(); }
  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }

  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = static_cast<std::uint32_t>(bytes_[pos_]) | (static_cast<std::uint32_t>(bytes_[pos_ + 1]) << 8) |
                      (static_cast<std::uint32_t>(bytes_[pos_ + 2]) << 16) |
                      (static_cast<std::uint32_t>(bytes_[pos_ + 3]) << 24);
    pos_ += 4;
    return v;
  }
  std::uint16_t u16(const char* field) {
    need(2, field);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::string tag(const char* field) {
    need(4, field);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
    pos_ += 4;
    return s;
  }

 private:
  void need(std::size_t n, const char* field) const {
    if (!has(n)) throw FormatError(std::string("wav: truncated while reading ") + field);
  }
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}
void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
}
void put_tag(std::vector<unsigned char>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

// Direct-form II transposed biquad.
struct Biquad {
  double b0, b1, b2, a1, a2;
  double z1 = 0.0, z2 = 0.0;

  double step(double x) {
    const double y = b0 * x + z1;
    z1 = b1 * x - a1 * y + z2;
    z2 = b2 * x - a2 * y;
    return y;
  }
};

Biquad butterworth_section(double k, double q) {
  const double norm = 1.0 / (1.0 + k / q + k * k);
  Biquad s{};
  s.b0 = k * k * norm;
  s.b1 = 2.0 * s.b0;
  s.b2 = s.b0;
  s.a1 = 2.0 * (k * k - 1.0) * norm;
  s.a2 = (1.0 - k / q + k * k) * norm;
  return s;
}

}  // namespace

AudioBuffer AudioBuffer::silence(std::size_t length, int sample_rate) {
  AudioBuffer a;
  a.sample_rate = sample_rate;
  a.channels[0].assign(length, 0.0);
  a.channels[1].assign(length, 0.0);
  return a;
}

void validate(const AudioBuffer& audio) {
  if (audio.sample_rate <= 0) throw ContractError("audio: sample_rate must be positive");
  if (audio.channels[0].size() != audio.channels[1].size()) {
    throw ContractError("audio: channels differ in length");
  }
  for (const auto& ch : audio.channels) {
    for (double v : ch) {
      if (!(v >= -1.0 && v <= 1.0)) throw RangeError("audio: amplitude " + std::to_string(v) + " outside [-1, 1]");
    }
  }
}

AudioBuffer parse_wav(const std::vector<unsigned char>& bytes) {
  ByteReader r(bytes);
  if (r.tag("RIFF tag") != "RIFF") throw FormatError("wav: missing RIFF tag");
  r.u32("RIFF size");
  if (r.tag("WAVE tag") != "WAVE") throw FormatError("wav: missing WAVE tag");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, block_align = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t data_pos = 0, data_size = 0;
  bool have_data = false;

  while (r.has(8)) {
    const std::string id = r.tag("chunk id");
    const std::uint32_t size = r.u32("chunk size");
    const std::size_t body = r.pos();
    if (!r.has(size)) throw FormatError("wav: chunk '" + id + "' runs past end of file");
    if (id == "fmt ") {
      if (size < 16) throw FormatError("wav: fmt chunk too short");
      format = r.u16("format tag");
      channels = r.u16("channel count");
      rate = r.u32("sample rate");
      r.u32("byte rate");
      block_align = r.u16("block align");
      bits = r.u16("bits per sample");
      if (format == kFormatExtensible) {
        if (size < 40) throw FormatError("wav: extensible fmt chunk too short");
        r.u16("extension size");
        r.u16("valid bits");
        r.u32("channel mask");
        format = r.u16("sub-format");
      }
      have_fmt = true;
    } else if (id == "data") {
      data_pos = body;
      data_size = size;
      have_data = true;
    }
    r.seek(body + size + (size & 1U));
  }
  if (!have_fmt) throw FormatError("wav: missing fmt chunk");
  if (!have_data) throw FormatError("wav: missing data chunk");
  if (rate == 0) throw FormatError("wav: sample rate is zero");
  if (channels != 1 && channels != 2) {
    throw UnsupportedError("wav: " + std::to_string(channels) + " channels (only mono and stereo)");
  }
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    throw UnsupportedError("wav: format tag " + std::to_string(format) + " with " + std::to_string(bits) +
                           " bits (only 16-bit PCM and 32-bit float)");
  }
  const std::size_t bytes_per_sample = bits / 8;
  if (block_align != channels * bytes_per_sample) throw FormatError("wav: block align inconsistent with format");

  const std::size_t frames = data_size / block_align;
  AudioBuffer audio;
  audio.sample_rate = static_cast<int>(rate);
  audio.channels[0].resize(frames);
  audio.channels[1].resize(frames);
  const unsigned char* p = bytes.data() + data_pos;
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* s = p + f * block_align + c * bytes_per_sample;
      double v;
      if (pcm16) {
        const auto raw = static_cast<std::int16_t>(static_cast<std::uint16_t>(s[0] | (s[1] << 8)));
        v = static_cast<double>(raw) / 32768.0;
      } else {
        std::uint32_t bitsv = static_cast<std::uint32_t>(s[0]) | (static_cast<std::uint32_t>(s[1]) << 8) |
                              (static_cast<std::uint32_t>(s[2]) << 16) | (static_cast<std::uint32_t>(s[3]) << 24);
        float fv;
        std::memcpy(&fv, &bitsv, sizeof fv);
        v = std::isfinite(fv) ? std::clamp(static_cast<double>(fv), -1.0, 1.0) : 0.0;
      }
      audio.channels[c][f] = v;
    }
    if (channels == 1) audio.channels[1][f] = audio.channels[0][f];
  }
  return audio;
}

AudioBuffer load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("wav: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_wav(bytes);
}

std::vector<unsigned char> encode_wav(const AudioBuffer& audio) {
  validate(audio);
  const std::uint32_t frames = static_cast<std::uint32_t>(audio.size());
  const std::uint32_t data_bytes = frames * 4;
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 2);
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * 4);
  put_u16(out, 4);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (std::uint32_t f = 0; f < frames; ++f) {
    for (int c = 0; c < 2; ++c) {
      const double scaled = std::round(audio.channels[c][f] * 32768.0);
      const auto pcm = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
      put_u16(out, static_cast<std::uint16_t>(pcm));
    }
  }
  return out;
}

void write_wav(const AudioBuffer& audio, const std::filesystem::path& path) {
  const auto bytes = encode_wav(audio);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("wav: cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("wav: write failed for " + path.string());
}

AudioBuffer downsample_audio(const AudioBuffer& audio, int target_rate) {
  if (target_rate <= 0 || audio.sample_rate <= 0 || audio.sample_rate % target_rate != 0) {
    throw ParameterError("downsample: target rate " + std::to_string(target_rate) + " does not divide " +
                         std::to_string(audio.sample_rate));
  }
  if (target_rate == audio.sample_rate) return audio;
  const auto factor = static_cast<std::size_t>(audio.sample_rate / target_rate);
  const double cutoff = 0.45 * target_rate;
  const double k = std::tan(std::numbers::pi * cutoff / audio.sample_rate);
  // Pole-pair Qs of a 4th-order Butterworth: 1 / (2 cos(pi/8)), 1 / (2 cos(3pi/8)).
  const double q1 = 1.0 / (2.0 * std::cos(std::numbers::pi / 8.0));
  const double q2 = 1.0 / (2.0 * std::cos(3.0 * std::numbers::pi / 8.0));

  AudioBuffer out;
  out.sample_rate = target_rate;
  const std::size_t out_len = audio.size() / factor;
  for (int c = 0; c < 2; ++c) {
    Biquad s1 = butterworth_section(k, q1);
    Biquad s2 = butterworth_section(k, q2);
    auto& dst = out.channels[c];
    dst.reserve(out_len);
    const auto& src = audio.channels[c];
    for (std::size_t i = 0; i < out_len * factor; ++i) {
      const double y = s2.step(s1.step(src[i]));
      if (i % factor == 0) dst.push_back(std::clamp(y, -1.0, 1.0));
    }
  }
  return out;
}

double rms(const std::vector<double>& samples, std::size_t begin, std::size_t end) {
  end = std::min(end, samples.size());
  if (begin >= end) return 0.0;
  double acc = 0.0;
  for (std::size_t i = begin; i < end; ++i) acc += samples[i] * samples[i];
  return std::sqrt(acc / static_cast<double>(end - begin));
}

}  // namespace foley
