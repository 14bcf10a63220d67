#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "foley/audio.hpp"
#include "foley/models.hpp"

namespace foley {

// Reads an "index,left,right" CSV. FormatError naming the line on malformed
// rows, non-sequential indices or an empty waveform.
AudioBuffer read_waveform_csv(const std::filesystem::path& path, int sample_rate);

struct PlotOptions {
  std::size_t spf = 294;
  int sample_rate = 8820;
  std::size_t width = 1200;
  std::size_t height = 420;
};

// SVG with one polyline per channel and an orange vertical marker at the
// start of every frame (sample k * spf). Axis ticks show samples and seconds.
std::string render_waveform_svg(const AudioBuffer& audio, const PlotOptions& options);
void plot_waveform(const std::filesystem::path& csv_path, const PlotOptions& options,
                   const std::filesystem::path& out_svg);

struct LossRow {
  std::string video;
  ModelKind model = ModelKind::transformer;
  double loss = 0.0;
};

// Five decimals ("-0.22000"); magnitudes below 1e-4 switch to five-digit
// scientific notation ("1.65133e-05") so they do not collapse to zero.
std::string format_loss(double value);

// One line per video under the header
// "Test Video | Deep Fusion | Wavenet-based | Aud & Vid Transformer";
// absent cells print "-". ParameterError on no rows or a repeated (video, model).
std::string loss_table(const std::vector<LossRow>& rows);

// Accumulated rows file: "video,model,loss" lines with the model spelled as
// in --model.
std::vector<LossRow> read_loss_rows(const std::filesystem::path& path);
void append_loss_row(const LossRow& row, const std::filesystem::path& path);

}  // namespace foley
