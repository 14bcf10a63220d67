#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <vector>

namespace foley {

// Two-channel amplitude sequence in [-1, 1].
struct AudioBuffer {
  std::array<std::vector<double>, 2> channels;
  int sample_rate = 0;

  std::size_t size() const { return channels[0].size(); }
  bool empty() const { return channels[0].empty(); }

  static AudioBuffer silence(std::size_t length, int sample_rate);
};

// Throws ContractError if the channels differ in length or the rate is not
// positive, RangeError for an amplitude outside [-1, 1].
void validate(const AudioBuffer& audio);

// RIFF/WAVE reader for 16-bit PCM and 32-bit IEEE float, mono or stereo.
// Mono input is duplicated to both channels; PCM is scaled by 1/32768.
AudioBuffer load_wav(const std::filesystem::path& path);
AudioBuffer parse_wav(const std::vector<unsigned char>& bytes);

// 16-bit PCM stereo. Amplitudes are encoded as round(s * 32768) clamped to
// the int16 range, which keeps the write/read error within 1/32768.
void write_wav(const AudioBuffer& audio, const std::filesystem::path& path);
std::vector<unsigned char> encode_wav(const AudioBuffer& audio);

// Integer-factor decimation behind a 4th-order Butterworth low-pass at
// 0.45 * target_rate. Same-rate input is returned unchanged.
AudioBuffer downsample_audio(const AudioBuffer& audio, int target_rate);

// Signal helpers shared by tools and tests.
double rms(const std::vector<double>& samples, std::size_t begin, std::size_t end);

}  // namespace foley
