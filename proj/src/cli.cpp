#include "foley/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>

#include "CLI11.hpp"
#include "foley/checkpoint.hpp"
#include "foley/config.hpp"
#include "foley/dataset.hpp"
#include "foley/errors.hpp"
#include "foley/generate.hpp"
#include "foley/manifest.hpp"
#include "foley/report.hpp"
#include "foley/selftest.hpp"
#include "foley/train.hpp"

namespace foley {

namespace fs = std::filesystem;

namespace {

constexpr const char* kOutDirEnv = "FOLEY_OUT_DIR";

fs::path output_path(const std::string& given, const std::string& fallback_name) {
  if (!given.empty()) return given;
  const char* dir = std::getenv(kOutDirEnv);
  return fs::path(dir && *dir ? dir : ".") / fallback_name;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::string joined(int argc, const char* const* argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

struct Options {
  // shared
  std::string config, out, model, ctx_mode, loss;
  std::optional<std::uint64_t> seed;
  bool quantized = false;
  // ingest
  std::string manifest;
  int audio_rate = 8820;
  std::size_t height = 36, width = 64;
  // train / eval / generate
  std::string dataset, checkpoint, clip, curve, csv, rows;
  std::optional<std::size_t> steps;
  double seconds = 0.0;
  std::size_t frames = 0;
  // plot
  std::size_t spf = 294;
  int rate = 8820;
  // selftest
  std::size_t cases = 1000;
};

std::optional<ModelKind> model_flag(const std::string& s) {
  return s.empty() ? std::nullopt : std::optional(parse_model_kind(s));
}
std::optional<ContextMode> mode_flag(const std::string& s) {
  return s.empty() ? std::nullopt : std::optional(parse_context_mode(s));
}
std::optional<LossKind> loss_flag(const std::string& s) {
  return s.empty() ? std::nullopt : std::optional(parse_loss_kind(s));
}
std::optional<fs::path> config_flag(const std::string& s) {
  return s.empty() ? std::nullopt : std::optional<fs::path>(s);
}

RunManifest base_manifest(const std::string& command, const Options& o) {
  RunManifest m;
  m.command = command;
  if (!o.config.empty()) {
    m.config_paths.push_back(o.config);
    m.add_input(o.config);
  }
  m.seed = o.seed.value_or(0);
  return m;
}

int cmd_ingest(const Options& o, const std::string& command, std::ostream& out) {
  const PairedManifest pm = read_paired_manifest(o.manifest);
  IngestOptions opt;
  opt.audio_rate = o.audio_rate;
  opt.height = o.height;
  opt.width = o.width;
  const Dataset d = ingest(pm, opt);
  const fs::path dst = output_path(o.out, "dataset.fds");
  ensure_parent(dst);
  save_dataset(d, dst);
  RunManifest m = base_manifest(command, o);
  m.add_input(o.manifest);
  m.add_input(pm.clip_manifest);
  m.add_input(pm.wav_path);
  m.outputs = {dst.string()};
  write_run_manifest(m, dst);
  out << "ingested '" << d.name << "': " << d.av.frames() << " frames, spf " << d.av.spf << ", "
      << d.train_frames() << " train / " << d.validation_frames() << " validation -> " << dst.string() << '\n';
  return 0;
}

int cmd_train(const Options& o, const std::string& command, std::ostream& out) {
  const Dataset d = load_dataset(o.dataset);
  const ModelConfig mc = resolve_model_config(config_flag(o.config), d.av.spf, d.av.video.height, d.av.video.width,
                                              {model_flag(o.model), mode_flag(o.ctx_mode), o.quantized});
  TrainConfig tc = resolve_train_config(config_flag(o.config), o.seed, loss_flag(o.loss));
  if (o.steps) {
    tc.steps = *o.steps;
    validate(tc);
  }
  const fs::path ckpt = output_path(o.out, "model.ckpt");
  const fs::path curve = o.curve.empty() ? fs::path(ckpt.string() + ".loss.csv") : fs::path(o.curve);
  ensure_parent(ckpt);
  ensure_parent(curve);

  auto model = make_model(mc, tc.seed);
  out << "training " << to_string(mc.kind) << " (" << model->parameters().scalar_count() << " parameters) for "
      << tc.steps << " steps with " << to_string(tc.loss) << " loss\n";
  const TrainReport report =
      train(*model, d, tc, [&](std::size_t, const Model& m) { save_checkpoint(m, ckpt); });
  write_loss_csv(report, curve);

  RunManifest m = base_manifest(command, o);
  m.seed = tc.seed;
  m.add_input(o.dataset);
  m.outputs = {ckpt.string(), curve.string()};
  write_run_manifest(m, ckpt);
  write_run_manifest(m, curve);
  out << "final train loss " << format_loss(report.final_train_loss) << " -> " << ckpt.string() << '\n';
  return 0;
}

int cmd_generate(const Options& o, const std::string& command, std::ostream& out) {
  if (o.clip.empty() == o.dataset.empty()) throw ParameterError("generate: pass exactly one of --clip or --dataset");
  const auto model = load_checkpoint(o.checkpoint);
  const auto& c = model->config();
  VideoClip video;
  if (!o.clip.empty()) {
    video = load_clip(o.clip);
    if (video.height != c.frame_height || video.width != c.frame_width)
      video = resize_frames(video, c.frame_height, c.frame_width);
  } else {
    video = load_dataset(o.dataset).av.video;
  }
  std::size_t frames = o.frames;
  if (o.seconds > 0.0) frames = static_cast<std::size_t>(std::ceil(o.seconds * video.frame_rate - 1e-9));
  if (frames > video.frame_count) {
    throw ParameterError("generate: " + std::to_string(frames) + " frames requested, clip has " +
                         std::to_string(video.frame_count));
  }
  GenerationStats stats;
  const AudioBuffer audio = generate(*model, video, frames, &stats);

  const fs::path wav = output_path(o.out, "generated.wav");
  ensure_parent(wav);
  write_wav(audio, wav);
  RunManifest m = base_manifest(command, o);
  m.add_input(o.checkpoint);
  m.add_input(o.clip.empty() ? o.dataset : o.clip);
  m.outputs = {wav.string()};
  if (!o.csv.empty()) {
    ensure_parent(o.csv);
    write_waveform_csv(audio, o.csv);
    m.outputs.push_back(o.csv);
    write_run_manifest(m, o.csv);
  }
  write_run_manifest(m, wav);
  out << "generated " << audio.size() << " samples (" << audio.size() / c.spf << " frames, spf " << c.spf << ", "
      << audio.sample_rate << " Hz) -> " << wav.string() << '\n';
  if (audio.size() / c.spf >= 2) {
    out << "frame-boundary discontinuity " << format_loss(frame_boundary_discontinuity(audio, c.spf)) << '\n';
  }
  return 0;
}

int cmd_eval(const Options& o, const std::string& command, std::ostream& out) {
  const auto model = load_checkpoint(o.checkpoint);
  const Dataset d = load_dataset(o.dataset);
  LossKind kind = model->quantized() ? LossKind::xent_categorical : LossKind::xent_bernoulli;
  if (const auto l = loss_flag(o.loss)) kind = *l;
  const LossRow row{d.name, model->config().kind, evaluate(*model, d, kind)};
  std::vector<LossRow> rows;
  if (!o.rows.empty()) {
    ensure_parent(o.rows);
    if (fs::exists(o.rows)) rows = read_loss_rows(o.rows);
    append_loss_row(row, o.rows);
    RunManifest m = base_manifest(command, o);
    m.add_input(o.checkpoint);
    m.add_input(o.dataset);
    m.outputs = {o.rows};
    write_run_manifest(m, o.rows);
  }
  // A re-evaluated pair replaces its earlier entry in the printed table.
  std::erase_if(rows, [&](const LossRow& r) { return r.video == row.video && r.model == row.model; });
  rows.push_back(row);
  out << loss_table(rows);
  return 0;
}

int cmd_plot(const Options& o, const std::string& command, std::ostream& out) {
  PlotOptions p;
  p.spf = o.spf;
  p.sample_rate = o.rate;
  const fs::path svg = output_path(o.out, "waveform.svg");
  ensure_parent(svg);
  plot_waveform(o.csv, p, svg);
  RunManifest m = base_manifest(command, o);
  m.add_input(o.csv);
  m.outputs = {svg.string()};
  write_run_manifest(m, svg);
  out << "wrote " << svg.string() << '\n';
  return 0;
}

int cmd_selftest(const Options& o, std::ostream& out) {
  SelftestOptions opt;
  opt.seed = o.seed.value_or(opt.seed);
  opt.alignment_cases = o.cases;
  const auto results = run_selftest(out, opt);
  const bool ok = all_passed(results);
  out << (ok ? "selftest passed" : "selftest FAILED") << " (" << results.size() << " checks)\n";
  return ok ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Video-conditioned two-channel audio generation", "foley"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Run config JSON with optional model/train sections")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Seed for initialisation and sampling");
    sub->add_option("--out", o.out, std::string("Output path (default: $") + kOutDirEnv + " or the working directory)");
  };
  const auto loss_check = CLI::IsMember({"mse", "mae", "xent", "xent-literal", "xent-cat"});

  auto* ingest_cmd = app.add_subcommand("ingest", "Paired-clip manifest -> aligned dataset file");
  add_common(ingest_cmd);
  ingest_cmd->add_option("--manifest", o.manifest, "Paired-clip manifest JSON")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--audio-rate", o.audio_rate, "Target audio rate (must divide the WAV rate)");
  ingest_cmd->add_option("--height", o.height, "Frame height after resize");
  ingest_cmd->add_option("--width", o.width, "Frame width after resize");

  auto* train_cmd = app.add_subcommand("train", "Dataset + config -> checkpoint and loss CSV");
  add_common(train_cmd);
  train_cmd->add_option("--dataset", o.dataset, "Dataset file from ingest")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--model", o.model, "Architecture")->check(CLI::IsMember({"deep-fusion", "wavenet", "transformer"}));
  train_cmd->add_option("--ctx-mode", o.ctx_mode, "Transformer audio context mode")->check(CLI::IsMember({"strided", "raw"}));
  train_cmd->add_flag("--quantized", o.quantized, "Transformer with 256-bin output");
  train_cmd->add_option("--loss", o.loss, "Loss")->check(loss_check);
  train_cmd->add_option("--steps", o.steps, "Override the configured step count");
  train_cmd->add_option("--curve", o.curve, "Loss curve CSV (default: <out>.loss.csv)");

  auto* gen_cmd = app.add_subcommand("generate", "Checkpoint + clip -> WAV (and optional CSV)");
  add_common(gen_cmd);
  gen_cmd->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--clip", o.clip, "Clip manifest JSON")->check(CLI::ExistingFile);
  gen_cmd->add_option("--dataset", o.dataset, "Dataset file (its video is used)")->check(CLI::ExistingFile);
  gen_cmd->add_option("--seconds", o.seconds, "Duration to generate, rounded up to whole frames");
  gen_cmd->add_option("--frames", o.frames, "Frames to generate (default: all)");
  gen_cmd->add_option("--csv", o.csv, "Also write the waveform as index,left,right CSV");

  auto* eval_cmd = app.add_subcommand("eval", "Checkpoint + dataset -> validation loss table row");
  add_common(eval_cmd);
  eval_cmd->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--dataset", o.dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--loss", o.loss, "Loss (default: xent, or xent-cat for quantized models)")->check(loss_check);
  eval_cmd->add_option("--rows", o.rows, "Append the row to this video,model,loss file and print all rows");

  auto* plot_cmd = app.add_subcommand("plot", "Waveform CSV -> SVG with frame markers");
  add_common(plot_cmd);
  plot_cmd->add_option("--csv", o.csv, "Waveform CSV")->required()->check(CLI::ExistingFile);
  plot_cmd->add_option("--spf", o.spf, "Samples per frame")->check(CLI::PositiveNumber);
  plot_cmd->add_option("--rate", o.rate, "Sample rate for the seconds axis")->check(CLI::PositiveNumber);

  auto* self_cmd = app.add_subcommand("selftest", "Gradient, causality and alignment checks");
  self_cmd->add_option("--seed", o.seed, "Seed for the random probes");
  self_cmd->add_option("--cases", o.cases, "Randomised alignment cases")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "foley: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  const std::string command = joined(argc, argv);
  try {
    if (ingest_cmd->parsed()) return cmd_ingest(o, command, out);
    if (train_cmd->parsed()) return cmd_train(o, command, out);
    if (gen_cmd->parsed()) return cmd_generate(o, command, out);
    if (eval_cmd->parsed()) return cmd_eval(o, command, out);
    if (plot_cmd->parsed()) return cmd_plot(o, command, out);
    if (self_cmd->parsed()) return cmd_selftest(o, out);
  } catch (const DivergenceError& e) {
    err << "foley: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    err << "foley: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "foley: internal error: " << e.what() << '\n';
    return 1;
  }
  err << "foley: no subcommand\n";
  return 2;
}

}  // namespace foley
