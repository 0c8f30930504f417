#pragma once

// Command-line front end. Each subcommand is a thin orchestration of the
// library; run_cli is callable in-process so tests can drive it.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

// Eigen must precede httplib: <resolv.h> defines a `_res` macro that breaks Eigen.
#include "vitreoforge/averaging.hpp"
#include "vitreoforge/config.hpp"
#include "vitreoforge/denoiser.hpp"
#include "vitreoforge/evalstats.hpp"
#include "vitreoforge/image_io.hpp"
#include "vitreoforge/metrics.hpp"
#include "vitreoforge/phantom.hpp"
#include "vitreoforge/training.hpp"
#include "vitreoforge/turing/http.hpp"
#include "vitreoforge/turing/manifest.hpp"
#include "vitreoforge/turing/results.hpp"
#include "vitreoforge/turing/service.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

namespace vitreoforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum class Verbosity { Quiet, Info, Debug };

// VITREOFORGE_LOG=quiet|info|debug; anything else means info.
inline Verbosity verbosity_from_env() {
  const char* v = std::getenv("VITREOFORGE_LOG");
  if (!v) return Verbosity::Info;
  const std::string s = v;
  if (s == "quiet" || s == "0" || s == "off") return Verbosity::Quiet;
  if (s == "debug" || s == "2") return Verbosity::Debug;
  return Verbosity::Info;
}

class Log {
 public:
  Log(std::ostream& err, Verbosity level) : err_(err), level_(level) {}
  void info(const std::string& msg) const {
    if (level_ >= Verbosity::Info) err_ << msg << '\n';
  }
  void debug(const std::string& msg) const {
    if (level_ >= Verbosity::Debug) err_ << msg << '\n';
  }

 private:
  std::ostream& err_;
  Verbosity level_;
};

// Orders "frame_2" before "frame_10".
inline bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (std::isdigit(static_cast<unsigned char>(a[i])) && std::isdigit(static_cast<unsigned char>(b[j]))) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      const auto na = std::stoull(a.substr(i, ie - i)), nb = std::stoull(b.substr(j, je - j));
      if (na != nb) return na < nb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  return a.size() - i < b.size() - j;
}

inline bool is_image_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) return false;
  const auto ext = p.extension().string();
  return ext == ".octf" || ext == ".png" || ext == ".PNG";
}

// Image files directly inside dir, optionally restricted to a stem prefix, in natural order.
inline std::vector<fs::path> list_images(const fs::path& dir, const std::string& prefix = "") {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (is_image_file(e.path()) && e.path().stem().string().rfind(prefix, 0) == 0) out.push_back(e.path());
  std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
    return natural_less(a.filename().string(), b.filename().string());
  });
  return out;
}

inline std::vector<fs::path> list_locations(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && e.path().filename().string().rfind("location_", 0) == 0) out.push_back(e.path());
  std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
    return natural_less(a.filename().string(), b.filename().string());
  });
  if (out.empty()) throw InvalidInput("no location_* directories in " + dir.string());
  return out;
}

// Finds <dir>/<stem>.octf or <dir>/<stem>.png.
inline std::optional<fs::path> find_image(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".octf", ".png"}) {
    const fs::path p = dir / (stem + ext);
    if (fs::is_regular_file(p)) return p;
  }
  return std::nullopt;
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.flush();
  if (!out) throw IoError("cannot write " + path.string());
}

inline std::vector<ImageTensor> load_frames(const std::vector<fs::path>& paths) {
  std::vector<ImageTensor> frames;
  for (const auto& p : paths) frames.push_back(load_image(p));
  return frames;
}

// ---- phantom ---------------------------------------------------------------

// location_i/frame_j.octf and location_i/clean.octf for every location, plus
// manifest.json. Output bytes depend only on the config.
inline json cmd_phantom(const RunConfig& cfg, const fs::path& out_dir, const Log& log) {
  ensure_dir(out_dir);
  json locations = json::array();
  for (std::size_t i = 0; i < cfg.locations; ++i) {
    const PhantomSpec spec = cfg.location_spec(i);
    const std::string name = "location_" + std::to_string(i);
    const fs::path dir = out_dir / name;
    ensure_dir(dir);
    const ArtSeries series = generate_art_series(spec, cfg.frames);
    save_image(series.clean, dir / "clean.octf");
    json frames = json::array();
    for (std::size_t j = 0; j < series.frames.size(); ++j) {
      const std::string f = "frame_" + std::to_string(j) + ".octf";
      save_image(series.frames[j], dir / f);
      frames.push_back(name + "/" + f);
    }
    json entry{{"name", name}, {"seed", spec.seed}, {"clean", name + "/clean.octf"}, {"frames", frames}};
    if (cfg.write_art1) {
      PhantomSpec one = spec;
      one.frames_per_average = 1;
      one.artifact_strips.clear();
      save_image(generate_frame(one, series.clean, 0), dir / "art1.octf");
      entry["art1"] = name + "/art1.octf";
    }
    locations.push_back(entry);
    log.debug("wrote " + dir.string());
  }
  json manifest{{"seed", cfg.seed},
                {"height", cfg.phantom.height},
                {"width", cfg.phantom.width},
                {"frames_per_location", cfg.frames},
                {"locations", locations},
                {"config", to_ini(cfg)}};
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  log.info("phantom: " + std::to_string(cfg.locations) + " locations x " + std::to_string(cfg.frames) + " frames -> " +
           out_dir.string());
  return manifest;
}

// ---- average ---------------------------------------------------------------

struct AverageOutputs {
  fs::path image;
  std::vector<fs::path> masks;
  std::vector<fs::path> overlays;
};

inline ImageTensor average_frames(const std::vector<ImageTensor>& frames, AveragingMode mode, const RunConfig& cfg) {
  return mode == AveragingMode::Weighted ? pseudo_art100(frames, cfg.averaging) : arithmetic_average(frames);
}

inline AverageOutputs cmd_average(const RunConfig& cfg, const fs::path& in_dir, const fs::path& out_path,
                                  AveragingMode mode, bool export_masks, bool export_overlays, const Log& log) {
  auto paths = list_images(in_dir, "frame_");
  if (paths.empty()) throw InvalidInput("no frame_* images in " + in_dir.string());
  const auto frames = load_frames(paths);
  for (std::size_t i = 1; i < frames.size(); ++i)
    if (!frames[i].same_shape(frames[0]))
      throw InvalidInput("average: " + paths[i].filename().string() + " has shape " + std::to_string(frames[i].height()) +
                         "x" + std::to_string(frames[i].width()) + ", expected " + std::to_string(frames[0].height()) +
                         "x" + std::to_string(frames[0].width()));
  AverageOutputs out;
  out.image = out_path;
  if (out_path.has_parent_path()) ensure_dir(out_path.parent_path());
  save_image(average_frames(frames, mode, cfg), out_path);
  if (export_masks || export_overlays) {
    const fs::path base = out_path.parent_path() / out_path.stem();
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const ArtifactMask mask = detect_artifact(frames[i], cfg.averaging.detect);
      if (export_masks) {
        out.masks.push_back(base.string() + "_mask_" + std::to_string(i) + ".octf");
        save_image(mask.to_image(), out.masks.back());
      }
      if (export_overlays) {
        out.overlays.push_back(base.string() + "_overlay_" + std::to_string(i) + ".png");
        save_image(contour_overlay(frames[i], mask), out.overlays.back());
      }
    }
  }
  log.info("average: " + to_string(mode) + " of " + std::to_string(frames.size()) + " frames -> " + out_path.string());
  return out;
}

// ---- train -----------------------------------------------------------------

// One (ART10-like input, averaged target) pair per location: frame_0 against the
// configured average of all frames.
inline std::vector<TrainPair> load_training_pairs(const RunConfig& cfg, const fs::path& data_dir) {
  std::vector<TrainPair> pairs;
  for (const auto& loc : list_locations(data_dir)) {
    const auto frames = load_frames(list_images(loc, "frame_"));
    if (frames.empty()) throw InvalidInput("no frame_* images in " + loc.string());
    pairs.push_back({frames.front(), average_frames(frames, cfg.averaging_mode, cfg)});
  }
  return pairs;
}

inline TrainResult cmd_train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_params, const Log& log) {
  const auto pairs = load_training_pairs(cfg, data_dir);
  const TrainConfig tc = cfg.train_config();
  const std::size_t every = std::max<std::size_t>(1, tc.steps / 20);
  const ProgressFn progress = [&](const TrainProgress& p) {
    if (p.step % every == 0 || p.step == tc.steps)
      log.info("train: step " + std::to_string(p.step) + "/" + std::to_string(tc.steps) +
               " loss=" + format_metric(p.loss, 6) + " grad_norm=" + format_metric(p.grad_norm, 4));
  };
  log.info("train: " + to_string(cfg.model) + " on " + std::to_string(pairs.size()) + " pairs from " + data_dir.string());
  TrainResult r;
  switch (cfg.model) {
    case ModelKind::Cddpm: r = train_cddpm(pairs, cfg.architecture, cfg.process(), tc, progress); break;
    case ModelKind::Regression: r = train_regression_baseline(pairs, cfg.architecture, tc, progress); break;
    case ModelKind::Bbdm: r = train_bbdm(pairs, cfg.architecture, cfg.process(), tc, IdentityCodec{}, progress); break;
  }
  if (out_params.has_parent_path()) ensure_dir(out_params.parent_path());
  save_params(r.ema, out_params);
  log.info("train: wrote EMA weights to " + out_params.string());
  return r;
}

// ---- sample ----------------------------------------------------------------

// A file maps to one output file; a directory maps every image in it to
// out/<stem>.octf. Image k samples with its own derived seed.
inline std::vector<fs::path> cmd_sample(const RunConfig& cfg, const fs::path& params_path, const fs::path& input,
                                        const fs::path& out, std::optional<std::size_t> steps, const Log& log) {
  DenoiserParams params = load_params(params_path);
  if (steps) {
    if (params.kind != ModelKind::Bbdm) log.info("sample: --steps only affects bridge models; ignored");
    if (*steps < 1 || *steps > params.process.timesteps)
      throw InvalidInput("sample: --steps must lie in [1, " + std::to_string(params.process.timesteps) + "]");
    params.process.sampling_steps = *steps;
  }
  const Denoiser model(std::move(params));
  std::vector<std::pair<fs::path, fs::path>> jobs;
  if (fs::is_directory(input)) {
    ensure_dir(out);
    for (const auto& p : list_images(input)) jobs.emplace_back(p, out / (p.stem().string() + ".octf"));
    if (jobs.empty()) throw InvalidInput("sample: no images in " + input.string());
  } else {
    if (out.has_parent_path()) ensure_dir(out.parent_path());
    jobs.emplace_back(input, out);
  }
  std::vector<fs::path> written;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const ImageTensor y = load_image(jobs[k].first);
    save_image(model.enhance(y, derive_seed(cfg.seed, 0x5A3B1EULL, k)), jobs[k].second);
    written.push_back(jobs[k].second);
    log.info("sample: " + jobs[k].first.string() + " -> " + jobs[k].second.string());
  }
  return written;
}

// ---- eval ------------------------------------------------------------------

struct EvalOutputs {
  MetricReport report;
  std::vector<std::string> names;
};

inline EvalOutputs cmd_eval(const RunConfig& cfg, const fs::path& gen_dir, const fs::path& gt_dir,
                            const std::optional<fs::path>& input_dir, const std::optional<fs::path>& roi_dir,
                            const fs::path& out_dir, std::ostream& out, const Log& log) {
  const auto gt_paths = list_images(gt_dir);
  if (gt_paths.empty()) throw InvalidInput("eval: no images in " + gt_dir.string());
  std::vector<EvalPair> pairs;
  EvalOutputs res;
  for (const auto& gt : gt_paths) {
    const std::string stem = gt.stem().string();
    auto need = [&](const fs::path& dir, const char* what) {
      const auto p = find_image(dir, stem);
      if (!p) throw InvalidInput(std::string("eval: no ") + what + " image for '" + stem + "' in " + dir.string());
      return *p;
    };
    EvalPair pair{load_image(need(gen_dir, "generated")), load_image(gt), std::nullopt, std::nullopt};
    if (input_dir) pair.input = load_image(need(*input_dir, "input"));
    if (roi_dir) pair.roi = RoiMask::from_image(load_image(need(*roi_dir, "ROI")));
    pairs.push_back(std::move(pair));
    res.names.push_back(stem);
  }
  res.report = metric_report(pairs, cfg.metrics);
  const MetricReport& rep = res.report;

  ensure_dir(out_dir);
  write_text(out_dir / "report.tsv", report_table(rep));
  std::string per = "image";
  for (const auto& m : rep.metrics) per += "\t" + m;
  per += "\n";
  for (std::size_t i = 0; i < rep.per_image.size(); ++i) {
    per += res.names[i];
    for (double v : rep.per_image[i]) per += "\t" + format_metric(v, 6);
    per += "\n";
  }
  write_text(out_dir / "per_image.tsv", per);

  const fs::path diff_dir = out_dir / "difference_maps";
  ensure_dir(diff_dir);
  for (std::size_t i = 0; i < pairs.size(); ++i)
    save_image(difference_map(pairs[i].generated, pairs[i].ground_truth).to_display(),
               diff_dir / (res.names[i] + ".png"));

  if (roi_dir) {
    const std::size_t col = rep.metrics.size() - 1;
    std::string t = "image\troi_psnr\tpsnr\troi_pixels\n";
    std::vector<double> roi_values;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      roi_values.push_back(rep.per_image[i][col]);
      t += res.names[i] + "\t" + format_metric(rep.per_image[i][col], 6) + "\t" + format_metric(rep.per_image[i][1], 6) +
           "\t" + std::to_string(pairs[i].roi->count()) + "\n";
    }
    t += "mean\t" + summarize("roi_psnr", roi_values).mean_std() + "\t\t\n";
    write_text(out_dir / "roi_psnr.tsv", t);
  }

  // Correlation between per-image metrics; columns with non-finite values or
  // fewer than three images are reported as undefined.
  std::vector<stats::NamedSeries> series;
  std::vector<std::string> skipped;
  for (std::size_t m = 0; m < rep.metrics.size(); ++m) {
    stats::NamedSeries s{rep.metrics[m], {}};
    bool finite = true;
    for (const auto& row : rep.per_image) {
      s.values.push_back(row[m]);
      finite = finite && std::isfinite(row[m]);
    }
    if (finite) {
      series.push_back(std::move(s));
    } else {
      skipped.push_back(rep.metrics[m]);
    }
  }
  std::string corr;
  if (rep.per_image.size() >= 3 && !series.empty()) {
    const auto cm = stats::correlation_matrix(series, cfg.correlation);
    for (const auto& n : cm.names) corr += "\t" + n;
    corr += "\n";
    for (std::size_t i = 0; i < cm.names.size(); ++i) {
      corr += cm.names[i];
      for (std::size_t j = 0; j < cm.names.size(); ++j) corr += "\t" + format_metric(cm.r[i][j], 4);
      corr += "\n";
    }
    for (const auto& u : cm.undefined) skipped.push_back(u);
  } else {
    corr = "# fewer than 3 images; correlation undefined\n";
  }
  for (const auto& s : skipped) corr += "# undefined: " + s + "\n";
  write_text(out_dir / "correlation.tsv", corr);

  out << render_report(rep);
  log.info("eval: " + std::to_string(pairs.size()) + " pairs -> " + out_dir.string());
  return res;
}

// ---- stats -----------------------------------------------------------------

// Results for every test kind present in the log, keyed by kind.
inline json cmd_stats(const RunConfig& cfg, const fs::path& log_path) {
  if (!fs::exists(log_path)) throw IoError("no response log at " + log_path.string());
  const auto records = turing::read_log(log_path);
  if (records.empty()) throw NoData("response log " + log_path.string() + " is empty");
  json doc = json::object();
  for (turing::TestKind k : {turing::TestKind::Rank6, turing::TestKind::Spot, turing::TestKind::Anatomy})
    if (!turing::filter_kind(records, k).empty())
      doc[turing::to_string(k)] = turing::results_document(k, records, cfg.results_config());
  return doc;
}

// ---- manifest --------------------------------------------------------------

// Each location_* directory holds art10.*, target.* and one image per model label.
inline std::vector<turing::LocationImages> scan_location_images(const fs::path& dir) {
  std::vector<turing::LocationImages> out;
  for (const auto& loc : list_locations(dir)) {
    turing::LocationImages li;
    li.location = loc.filename().string();
    auto need = [&](const std::string& stem) {
      const auto p = find_image(loc, stem);
      if (!p) throw InvalidInput("manifest: missing " + stem + " image in " + loc.string());
      return fs::absolute(*p).string();
    };
    li.art10 = need("art10");
    li.target = need("target");
    for (const auto& label : stats::kModelLabels)
      if (auto p = find_image(loc, label)) li.outputs[label] = fs::absolute(*p).string();
    out.push_back(std::move(li));
  }
  return out;
}

inline turing::QuestionManifest cmd_manifest(const RunConfig& cfg, const fs::path& images_dir, turing::TestKind kind,
                                             std::size_t questions, const std::string& generated_model,
                                             const fs::path& out_path, const Log& log) {
  const auto locs = scan_location_images(images_dir);
  const auto m = turing::create_manifest(
      locs, {kind, questions, derive_seed(cfg.seed, 0x3A11FULL, static_cast<std::uint64_t>(kind)), generated_model});
  if (out_path.has_parent_path()) ensure_dir(out_path.parent_path());
  turing::save_manifest(m, out_path);
  log.info("manifest: " + std::to_string(m.questions.size()) + " " + turing::to_string(kind) + " questions -> " +
           out_path.string());
  return m;
}

// ---- serve -----------------------------------------------------------------

inline std::vector<turing::QuestionManifest> load_manifests(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> files;
  for (const auto& p : inputs) {
    if (fs::is_directory(p)) {
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    } else {
      files.push_back(p);
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InvalidInput("serve: no manifests given");
  std::vector<turing::QuestionManifest> out;
  for (const auto& f : files) out.push_back(turing::load_manifest(f));
  return out;
}

inline void cmd_serve(const RunConfig& cfg, const std::vector<fs::path>& manifests, const fs::path& log_path,
                      const std::string& host, int port, const Log& log) {
  // Session ids are identifiers, not experimental randomness; they come from the
  // OS so a restarted server never reissues an id already in the log.
  turing::Service svc(load_manifests(manifests), log_path, cfg.results_config(), std::random_device{}());
  httplib::Server server;
  turing::mount(server, svc);
  log.info("serve: " + std::to_string(svc.session_count()) + " session(s) restored from " + log_path.string());
  log.info("serve: listening on http://" + host + ":" + std::to_string(port) + "/v1");
  if (!server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

// ---- entry point -----------------------------------------------------------

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"vitreoforge: OCT vitreous enhancement toolkit", "vitreoforge"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "Run configuration (INI)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override the config seed");

  std::string out_path;
  auto* phantom = app.add_subcommand("phantom", "Generate synthetic locations, frames and clean images");
  phantom->add_option("--out", out_path, "Output directory")->required();

  std::string in_dir, mode_name;
  bool export_masks = false, export_overlays = false;
  auto* average = app.add_subcommand("average", "Average a directory of frame_* images");
  average->add_option("in_dir", in_dir, "Directory of frames")->required()->check(CLI::ExistingDirectory);
  average->add_option("--out", out_path, "Output image path")->required();
  average->add_option("--mode", mode_name, "weighted|arithmetic (default from config)")
      ->check(CLI::IsMember({"weighted", "arithmetic"}));
  average->add_flag("--export-masks", export_masks, "Write detected artifact masks next to the output");
  average->add_flag("--export-overlays", export_overlays, "Write contour overlays next to the output");

  std::string data_dir;
  auto* train = app.add_subcommand("train", "Train the configured model on phantom locations");
  train->add_option("data_dir", data_dir, "Directory of location_* folders (default paths.data_dir)");
  train->add_option("--out", out_path, "Parameter file (default paths.params)");

  std::string params_path, input_path;
  std::optional<std::size_t> steps;
  auto* sample = app.add_subcommand("sample", "Enhance an image or a directory of images");
  sample->add_option("params", params_path, "Parameter file")->required()->check(CLI::ExistingFile);
  sample->add_option("input", input_path, "Input image or directory")->required()->check(CLI::ExistingPath);
  sample->add_option("--out", out_path, "Output image or directory")->required();
  sample->add_option("--steps", steps, "Bridge sampler subgrid size");

  std::string gen_dir, gt_dir, roi_dir, input_dir;
  auto* eval = app.add_subcommand("eval", "Score generated images against ground truth");
  eval->add_option("gen_dir", gen_dir, "Generated images")->required()->check(CLI::ExistingDirectory);
  eval->add_option("gt_dir", gt_dir, "Ground-truth images")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--roi-dir", roi_dir, "ROI masks (same file stems)")->check(CLI::ExistingDirectory);
  eval->add_option("--input-dir", input_dir, "Inputs for a baseline row")->check(CLI::ExistingDirectory);
  eval->add_option("--out", out_path, "Report directory (default paths.out_dir)");

  std::string log_path;
  auto* stats_cmd = app.add_subcommand("stats", "Reader-study statistics from a response log");
  stats_cmd->add_option("log", log_path, "Response log (default paths.log)");
  stats_cmd->add_option("--out", out_path, "Write JSON here instead of stdout");

  std::vector<std::string> manifest_inputs;
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve the reader study over HTTP");
  serve->add_option("manifests", manifest_inputs, "Manifest files or directories (default paths.manifests)");
  serve->add_option("--port", port, "TCP port")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--log", log_path, "Response log (default paths.log)");

  std::string images_dir, kind_name = "rank6", generated_model = "cDDPM";
  std::size_t questions = 10;
  auto* manifest = app.add_subcommand("manifest", "Build a question manifest from location images");
  manifest->add_option("images_dir", images_dir, "Directory of location_* folders")->required()->check(
      CLI::ExistingDirectory);
  manifest->add_option("--kind", kind_name, "rank6|spot|anatomy")->check(CLI::IsMember({"rank6", "spot", "anatomy"}));
  manifest->add_option("--questions", questions, "Question count");
  manifest->add_option("--generated", generated_model, "Model shown in spot and anatomy questions");
  manifest->add_option("--out", out_path, "Manifest file")->required();

  auto* config = app.add_subcommand("config", "Print the effective configuration");

  std::vector<std::string> argv_store{"vitreoforge"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  const Log log(err, verbosity_from_env());
  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (seed) cfg.seed = *seed;

    if (*phantom) {
      cmd_phantom(cfg, out_path, log);
    } else if (*average) {
      const AveragingMode mode = mode_name.empty() ? cfg.averaging_mode : averaging_mode_from_string(mode_name);
      cmd_average(cfg, in_dir, out_path, mode, export_masks, export_overlays, log);
    } else if (*train) {
      cmd_train(cfg, data_dir.empty() ? cfg.paths.data_dir : data_dir, out_path.empty() ? cfg.paths.params : out_path,
                log);
    } else if (*sample) {
      cmd_sample(cfg, params_path, input_path, out_path, steps, log);
    } else if (*eval) {
      cmd_eval(cfg, gen_dir, gt_dir, input_dir.empty() ? std::nullopt : std::optional<fs::path>(input_dir),
               roi_dir.empty() ? std::nullopt : std::optional<fs::path>(roi_dir),
               out_path.empty() ? cfg.paths.out_dir : out_path, out, log);
    } else if (*stats_cmd) {
      const json doc = cmd_stats(cfg, log_path.empty() ? cfg.paths.log : log_path);
      if (out_path.empty()) {
        out << doc.dump(2) << '\n';
      } else {
        write_text(out_path, doc.dump(2) + "\n");
      }
    } else if (*serve) {
      std::vector<fs::path> inputs(manifest_inputs.begin(), manifest_inputs.end());
      if (inputs.empty()) inputs.push_back(cfg.paths.manifests);
      cmd_serve(cfg, inputs, log_path.empty() ? cfg.paths.log : log_path, host, port, log);
    } else if (*manifest) {
      cmd_manifest(cfg, images_dir, turing::test_kind_from_string(kind_name), questions, generated_model, out_path, log);
    } else if (*config) {
      out << to_ini(cfg);
    }
  } catch (const std::exception& e) {
    err << "vitreoforge: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace vitreoforge::cli
