#include "foley/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "foley/errors.hpp"

namespace foley {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) parts.push_back(trim(cur));
  if (!line.empty() && line.back() == sep) parts.emplace_back();
  return parts;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

}  // namespace

AudioBuffer read_waveform_csv(const std::filesystem::path& path, int sample_rate) {
  std::ifstream in(path);
  if (!in) throw IoError("waveform csv: cannot open " + path.string());
  const std::string where = "waveform csv " + path.string();
  AudioBuffer audio;
  audio.sample_rate = sample_rate;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cols = split(line, ',');
    if (!header_seen) {
      header_seen = true;
      if (cols.size() != 3 || cols[0] != "index" || cols[1] != "left" || cols[2] != "right") {
        throw FormatError(where + ": line 1 must be the header 'index,left,right'");
      }
      continue;
    }
    const std::string at = where + ": line " + std::to_string(line_no);
    if (cols.size() != 3) throw FormatError(at + " has " + std::to_string(cols.size()) + " fields, expected 3");
    double index = 0, left = 0, right = 0;
    if (!parse_double(cols[0], index) || index != static_cast<double>(audio.size())) {
      throw FormatError(at + ": field 'index' must be " + std::to_string(audio.size()));
    }
    if (!parse_double(cols[1], left) || left < -1.0 || left > 1.0) {
      throw FormatError(at + ": field 'left' is not an amplitude in [-1, 1]");
    }
    if (!parse_double(cols[2], right) || right < -1.0 || right > 1.0) {
      throw FormatError(at + ": field 'right' is not an amplitude in [-1, 1]");
    }
    audio.channels[0].push_back(left);
    audio.channels[1].push_back(right);
  }
  if (!header_seen) throw FormatError(where + ": empty file");
  if (audio.empty()) throw FormatError(where + ": waveform has no samples");
  return audio;
}

std::string render_waveform_svg(const AudioBuffer& audio, const PlotOptions& o) {
  if (audio.empty()) throw FormatError("plot: waveform has no samples");
  if (o.spf == 0) throw ParameterError("plot: spf must be >= 1");
  if (o.sample_rate <= 0) throw ParameterError("plot: sample rate must be positive");
  if (o.width < 200 || o.height < 150) throw ParameterError("plot: canvas too small");

  const double left = 70, right = 20, top = 30, bottom = 70;
  const double pw = static_cast<double>(o.width) - left - right;
  const double ph = static_cast<double>(o.height) - top - bottom;
  const std::size_t n = audio.size();
  const double span = n > 1 ? static_cast<double>(n - 1) : 1.0;
  auto x_of = [&](double i) { return left + (n > 1 ? i / span * pw : pw / 2); };
  auto y_of = [&](double a) { return top + (1.0 - (a + 1.0) / 2.0) * ph; };

  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << o.width << "\" height=\"" << o.height
    << "\" viewBox=\"0 0 " << o.width << ' ' << o.height << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
    << "<rect x=\"0\" y=\"0\" width=\"" << o.width << "\" height=\"" << o.height << "\" fill=\"white\"/>\n";

  // Axes frame and zero line.
  s << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n"
    << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph << "\"/>\n"
    << "<line x1=\"" << left << "\" y1=\"" << y_of(0) << "\" x2=\"" << left + pw << "\" y2=\"" << y_of(0)
    << "\" stroke=\"#bbbbbb\"/>\n</g>\n";

  s << "<g class=\"ticks\" fill=\"black\">\n";
  for (int k = 0; k <= 5; ++k) {
    const auto idx = static_cast<std::size_t>(std::llround(span * k / 5.0));
    const double x = x_of(static_cast<double>(idx));
    s << "<line x1=\"" << x << "\" y1=\"" << top + ph << "\" x2=\"" << x << "\" y2=\"" << top + ph + 5
      << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << x << "\" y=\"" << top + ph + 17 << "\" text-anchor=\"middle\">" << idx << "</text>\n"
      << "<text x=\"" << x << "\" y=\"" << top + ph + 30 << "\" text-anchor=\"middle\">"
      << fmt("%.3f", static_cast<double>(idx) / o.sample_rate) << " s</text>\n";
  }
  for (double a : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    s << "<text x=\"" << left - 6 << "\" y=\"" << y_of(a) + 4 << "\" text-anchor=\"end\">" << fmt("%.1f", a)
      << "</text>\n";
  }
  s << "<text class=\"x-label\" x=\"" << left + pw / 2 << "\" y=\"" << o.height - 12
    << "\" text-anchor=\"middle\">time (samples / seconds at " << o.sample_rate << " Hz)</text>\n"
    << "<text class=\"y-label\" x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << top + ph / 2 << ")\">amplitude</text>\n</g>\n";

  // Frame-start markers.
  s << "<g class=\"frame-markers\" stroke=\"#ff8c00\" stroke-width=\"1\">\n";
  for (std::size_t k = 0; k * o.spf < n; ++k) {
    const double x = x_of(static_cast<double>(k * o.spf));
    s << "<line class=\"frame-marker\" x1=\"" << x << "\" y1=\"" << top << "\" x2=\"" << x << "\" y2=\"" << top + ph
      << "\"/>\n";
  }
  s << "</g>\n";

  // Long waveforms are drawn as a per-column min/max envelope.
  const auto columns = static_cast<std::size_t>(pw);
  const char* names[2] = {"left", "right"};
  const char* colors[2] = {"#1f77b4", "#2ca02c"};
  for (std::size_t ch = 0; ch < 2; ++ch) {
    const auto& x = audio.channels[ch];
    s << "<polyline class=\"channel-" << names[ch] << "\" fill=\"none\" stroke=\"" << colors[ch]
      << "\" stroke-width=\"1\" points=\"";
    auto point = [&](std::size_t i) { s << fmt("%.2f", x_of(static_cast<double>(i))) << ',' << fmt("%.2f", y_of(x[i])) << ' '; };
    if (n <= 2 * columns) {
      for (std::size_t i = 0; i < n; ++i) point(i);
    } else {
      for (std::size_t c = 0; c < columns; ++c) {
        const std::size_t b = c * n / columns, e = (c + 1) * n / columns;
        const auto [lo, hi] = std::minmax_element(x.begin() + b, x.begin() + e);
        const auto i_lo = static_cast<std::size_t>(lo - x.begin()), i_hi = static_cast<std::size_t>(hi - x.begin());
        point(std::min(i_lo, i_hi));
        point(std::max(i_lo, i_hi));
      }
    }
    s << "\"/>\n";
  }
  s << "<text x=\"" << left + 4 << "\" y=\"" << top - 10 << "\" fill=\"" << colors[0] << "\">left</text>\n"
    << "<text x=\"" << left + 40 << "\" y=\"" << top - 10 << "\" fill=\"" << colors[1] << "\">right</text>\n"
    << "<text x=\"" << left + 84 << "\" y=\"" << top - 10 << "\" fill=\"#ff8c00\">frame start</text>\n"
    << "</svg>\n";
  return s.str();
}

void plot_waveform(const std::filesystem::path& csv_path, const PlotOptions& options,
                   const std::filesystem::path& out_svg) {
  const AudioBuffer audio = read_waveform_csv(csv_path, options.sample_rate);
  const std::string svg = render_waveform_svg(audio, options);
  std::ofstream out(out_svg, std::ios::trunc);
  if (!out) throw IoError("plot: cannot write " + out_svg.string());
  out << svg;
  if (!out) throw IoError("plot: write failed for " + out_svg.string());
}

std::string format_loss(double value) {
  if (!std::isfinite(value)) return value != value ? "nan" : (value > 0 ? "inf" : "-inf");
  if (value == 0.0 || std::abs(value) >= 1e-4) return fmt("%.5f", value);
  return fmt("%.5e", value);
}

std::string loss_table(const std::vector<LossRow>& rows) {
  if (rows.empty()) throw ParameterError("loss_table: no rows");
  const ModelKind order[3] = {ModelKind::deep_fusion, ModelKind::wavenet, ModelKind::transformer};
  std::vector<std::string> videos;
  std::map<std::pair<std::string, ModelKind>, double> cells;
  for (const auto& r : rows) {
    if (std::find(videos.begin(), videos.end(), r.video) == videos.end()) videos.push_back(r.video);
    if (!cells.emplace(std::make_pair(r.video, r.model), r.loss).second) {
      throw ParameterError("loss_table: repeated row for (" + r.video + ", " + report_label(r.model) + ")");
    }
  }
  std::ostringstream s;
  s << "| Test Video";
  for (auto k : order) s << " | " << report_label(k);
  s << " |\n|---|---|---|---|\n";
  for (const auto& v : videos) {
    s << "| " << v;
    for (auto k : order) {
      const auto it = cells.find({v, k});
      s << " | " << (it == cells.end() ? std::string("-") : format_loss(it->second));
    }
    s << " |\n";
  }
  return s.str();
}

std::vector<LossRow> read_loss_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("loss rows: cannot open " + path.string());
  std::vector<LossRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string at = "loss rows " + path.string() + ": line " + std::to_string(line_no);
    // The video id may itself contain commas; model and loss are the last two fields.
    const auto last = line.rfind(',');
    const auto mid = last == std::string::npos || last == 0 ? std::string::npos : line.rfind(',', last - 1);
    if (mid == std::string::npos) throw FormatError(at + " must be 'video,model,loss'");
    LossRow r;
    r.video = trim(line.substr(0, mid));
    try {
      r.model = parse_model_kind(trim(line.substr(mid + 1, last - mid - 1)));
    } catch (const ParameterError&) {
      throw FormatError(at + ": field 'model' is not a known model kind");
    }
    if (!parse_double(trim(line.substr(last + 1)), r.loss)) throw FormatError(at + ": field 'loss' is not a number");
    rows.push_back(std::move(r));
  }
  return rows;
}

void append_loss_row(const LossRow& row, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("loss rows: cannot write " + path.string());
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", row.loss);
  out << row.video << ',' << to_string(row.model) << ',' << buf << '\n';
}

}  // namespace foley
