#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "vitreoforge/averaging.hpp"
#include "vitreoforge/denoiser.hpp"
#include "vitreoforge/error.hpp"
#include "vitreoforge/metrics.hpp"
#include "vitreoforge/phantom.hpp"
#include "vitreoforge/training.hpp"
#include "vitreoforge/turing/results.hpp"

namespace vitreoforge {

enum class AveragingMode { Weighted, Arithmetic };

inline std::string to_string(AveragingMode m) { return m == AveragingMode::Weighted ? "weighted" : "arithmetic"; }

inline AveragingMode averaging_mode_from_string(const std::string& s) {
  if (s == "weighted") return AveragingMode::Weighted;
  if (s == "arithmetic") return AveragingMode::Arithmetic;
  throw InvalidInput("unknown averaging mode '" + s + "' (expected weighted|arithmetic)");
}

struct PathConfig {
  std::string data_dir = "data";
  std::string out_dir = "out";
  std::string params = "model.octw";
  std::string log = "responses.jsonl";
  std::string manifests = "manifests";
};

// Everything a run needs. Randomness flows from `seed`; per-location and
// per-image streams are derived from it.
struct RunConfig {
  std::uint64_t seed = 0;

  PhantomSpec phantom = [] {
    PhantomSpec s;
    s.frames_per_average = 10;
    return s;
  }();
  std::size_t locations = 4;
  std::size_t frames = 10;
  bool write_art1 = false;

  AveragingConfig averaging;
  AveragingMode averaging_mode = AveragingMode::Weighted;

  ModelKind model = ModelKind::Cddpm;
  nn::Architecture architecture = default_architecture(ModelKind::Cddpm);
  ProcessConfig schedule;
  TrainConfig training = default_train_config(ModelKind::Cddpm);

  MetricOptions metrics;
  stats::CorrelationKind correlation = stats::CorrelationKind::Pearson;
  turing::ResultsConfig results;

  PathConfig paths;

  // Phantom spec for location i; every location draws its own stream.
  PhantomSpec location_spec(std::size_t i) const {
    PhantomSpec s = phantom;
    s.seed = derive_seed(seed, 0x10CA'7100ULL, i);
    return s;
  }

  TrainConfig train_config() const {
    TrainConfig t = training;
    t.seed = derive_seed(seed, 0x7A1AULL);
    return t;
  }

  ProcessConfig process() const {
    ProcessConfig p = schedule;
    p.prediction = training.prediction;
    return p;
  }

  turing::ResultsConfig results_config() const {
    turing::ResultsConfig r = results;
    r.bootstrap.seed = derive_seed(seed, 0xB0075ULL);
    return r;
  }

  void validate() const;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

template <typename T>
T parse_integer(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
    throw InvalidInput("config key '" + key + "': expected an integer, got '" + raw + "'");
  return v;
}

inline double parse_real(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || !std::isfinite(v))
    throw InvalidInput("config key '" + key + "': expected a number, got '" + raw + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw InvalidInput("config key '" + key + "': expected a boolean, got '" + raw + "'");
}

// Wraps enum parsers so errors name the key.
template <typename F>
auto parse_enum(const std::string& key, const std::string& raw, F&& from_string) {
  try {
    return from_string(trim(raw));
  } catch (const InvalidInput& e) {
    throw InvalidInput("config key '" + key + "': " + e.what());
  }
}

// "row_start:row_end:frame" triplets, comma separated.
inline std::vector<ArtifactStrip> parse_strips(const std::string& key, const std::string& raw) {
  std::vector<ArtifactStrip> out;
  for (const auto& item : split_list(raw)) {
    const auto parts = split_list(item, ':');
    if (parts.size() != 3)
      throw InvalidInput("config key '" + key + "': strip '" + item + "' is not row_start:row_end:frame");
    out.push_back({{parse_integer<std::size_t>(key, parts[0]), parse_integer<std::size_t>(key, parts[1])},
                   parse_integer<std::size_t>(key, parts[2])});
  }
  return out;
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& key, const std::string& raw, F&& one) {
  std::vector<T> out;
  for (const auto& item : split_list(raw)) out.push_back(one(key, item));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& fmt) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s;
}

inline std::string real_str(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Field {
  Setter set;
  Getter get;
};

// Section -> key -> accessor. Order here is the order of to_ini output.
inline const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>>& config_fields() {
  using S = std::string;
  auto sz = [](auto member) {
    return Field{[member](RunConfig& c, const S& k, const S& v) { c.*member = parse_integer<std::size_t>(k, v); },
                 [member](const RunConfig& c) { return std::to_string(c.*member); }};
  };
  static const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>> fields = {
      {"phantom",
       {
           {"locations", sz(&RunConfig::locations)},
           {"frames", sz(&RunConfig::frames)},
           {"write_art1", {[](RunConfig& c, const S& k, const S& v) { c.write_art1 = parse_bool(k, v); },
                           [](const RunConfig& c) { return S(c.write_art1 ? "true" : "false"); }}},
           {"height", {[](RunConfig& c, const S& k, const S& v) { c.phantom.height = parse_integer<std::size_t>(k, v); },
                       [](const RunConfig& c) { return std::to_string(c.phantom.height); }}},
           {"width", {[](RunConfig& c, const S& k, const S& v) { c.phantom.width = parse_integer<std::size_t>(k, v); },
                      [](const RunConfig& c) { return std::to_string(c.phantom.width); }}},
           {"layer_boundaries",
            {[](RunConfig& c, const S& k, const S& v) {
               c.phantom.layer_boundaries = parse_list<std::size_t>(k, v, parse_integer<std::size_t>);
             },
             [](const RunConfig& c) {
               return join<std::size_t>(c.phantom.layer_boundaries, [](const std::size_t& x) { return std::to_string(x); });
             }}},
           {"layer_reflectivities",
            {[](RunConfig& c, const S& k, const S& v) { c.phantom.layer_reflectivities = parse_list<double>(k, v, parse_real); },
             [](const RunConfig& c) { return join<double>(c.phantom.layer_reflectivities, real_str); }}},
           {"boundary_jitter", {[](RunConfig& c, const S& k, const S& v) { c.phantom.boundary_jitter = parse_real(k, v); },
                                [](const RunConfig& c) { return real_str(c.phantom.boundary_jitter); }}},
           {"speckle_looks", {[](RunConfig& c, const S& k, const S& v) { c.phantom.speckle_looks = parse_real(k, v); },
                              [](const RunConfig& c) { return real_str(c.phantom.speckle_looks); }}},
           {"frames_per_average",
            {[](RunConfig& c, const S& k, const S& v) { c.phantom.frames_per_average = parse_integer<std::size_t>(k, v); },
             [](const RunConfig& c) { return std::to_string(c.phantom.frames_per_average); }}},
           {"artifact_strips",
            {[](RunConfig& c, const S& k, const S& v) { c.phantom.artifact_strips = parse_strips(k, v); },
             [](const RunConfig& c) {
               return join<ArtifactStrip>(c.phantom.artifact_strips, [](const ArtifactStrip& s) {
                 return std::to_string(s.rows.begin) + ":" + std::to_string(s.rows.end) + ":" +
                        std::to_string(s.frame_index);
               });
             }}},
       }},
      {"averaging",
       {
           {"mode", {[](RunConfig& c, const S& k, const S& v) { c.averaging_mode = parse_enum(k, v, averaging_mode_from_string); },
                     [](const RunConfig& c) { return to_string(c.averaging_mode); }}},
           {"threshold", {[](RunConfig& c, const S& k, const S& v) { c.averaging.detect.threshold = parse_real(k, v); },
                          [](const RunConfig& c) { return real_str(c.averaging.detect.threshold); }}},
           {"kernel_half",
            {[](RunConfig& c, const S& k, const S& v) { c.averaging.detect.kernel_half = parse_integer<std::size_t>(k, v); },
             [](const RunConfig& c) { return std::to_string(c.averaging.detect.kernel_half); }}},
           {"min_width_fraction",
            {[](RunConfig& c, const S& k, const S& v) { c.averaging.detect.min_width_fraction = parse_real(k, v); },
             [](const RunConfig& c) { return real_str(c.averaging.detect.min_width_fraction); }}},
           {"expected_frames",
            {[](RunConfig& c, const S& k, const S& v) { c.averaging.expected_frames = parse_integer<std::size_t>(k, v); },
             [](const RunConfig& c) { return std::to_string(c.averaging.expected_frames); }}},
       }},
      {"schedule",
       {
           {"T", {[](RunConfig& c, const S& k, const S& v) { c.schedule.timesteps = parse_integer<std::size_t>(k, v); },
                  [](const RunConfig& c) { return std::to_string(c.schedule.timesteps); }}},
           {"beta_start", {[](RunConfig& c, const S& k, const S& v) { c.schedule.beta_start = parse_real(k, v); },
                           [](const RunConfig& c) { return real_str(c.schedule.beta_start); }}},
           {"beta_end", {[](RunConfig& c, const S& k, const S& v) { c.schedule.beta_end = parse_real(k, v); },
                         [](const RunConfig& c) { return real_str(c.schedule.beta_end); }}},
           {"sigma", {[](RunConfig& c, const S& k, const S& v) { c.schedule.sigma = parse_enum(k, v, sigma_mode_from_string); },
                      [](const RunConfig& c) { return to_string(c.schedule.sigma); }}},
           {"sampling_steps",
            {[](RunConfig& c, const S& k, const S& v) { c.schedule.sampling_steps = parse_integer<std::size_t>(k, v); },
             [](const RunConfig& c) { return std::to_string(c.schedule.sampling_steps); }}},
       }},
      {"model",
       {
           // Handled before everything else; see parse_run_config.
           {"kind", {[](RunConfig&, const S&, const S&) {}, [](const RunConfig& c) { return to_string(c.model); }}},
           {"in_channels",
            {[](RunConfig& c, const S& k, const S& v) { c.architecture.in_channels = parse_integer<std::size_t>(k, v); },
             [](const RunConfig& c) { return std::to_string(c.architecture.in_channels); }}},
           {"out_channels",
            {[](RunConfig& c, const S& k, const S& v) { c.architecture.out_channels = parse_integer<std::size_t>(k, v); },
             [](const RunConfig& c) { return std::to_string(c.architecture.out_channels); }}},
           {"base_channels",
            {[](RunConfig& c, const S& k, const S& v) { c.architecture.base_channels = parse_integer<std::size_t>(k, v); },
             [](const RunConfig& c) { return std::to_string(c.architecture.base_channels); }}},
           {"channel_mult",
            {[](RunConfig& c, const S& k, const S& v) { c.architecture.channel_mult = parse_list<double>(k, v, parse_real); },
             [](const RunConfig& c) { return join<double>(c.architecture.channel_mult, real_str); }}},
           {"res_blocks",
            {[](RunConfig& c, const S& k, const S& v) { c.architecture.res_blocks = parse_integer<std::size_t>(k, v); },
             [](const RunConfig& c) { return std::to_string(c.architecture.res_blocks); }}},
           {"attention",
            {[](RunConfig& c, const S& k, const S& v) {
               const auto flags = parse_list<bool>(k, v, parse_bool);
               c.architecture.attention.assign(flags.begin(), flags.end());
             },
             [](const RunConfig& c) {
               const std::vector<bool>& a = c.architecture.attention;
               std::string s;
               for (std::size_t i = 0; i < a.size(); ++i) s += std::string(i ? ", " : "") + (a[i] ? "true" : "false");
               return s;
             }}},
           {"attention_heads",
            {[](RunConfig& c, const S& k, const S& v) { c.architecture.attention_heads = parse_integer<std::size_t>(k, v); },
             [](const RunConfig& c) { return std::to_string(c.architecture.attention_heads); }}},
           {"norm_groups",
            {[](RunConfig& c, const S& k, const S& v) { c.architecture.norm_groups = parse_integer<std::size_t>(k, v); },
             [](const RunConfig& c) { return std::to_string(c.architecture.norm_groups); }}},
       }},
      {"training",
       {
           {"learning_rate", {[](RunConfig& c, const S& k, const S& v) { c.training.learning_rate = parse_real(k, v); },
                              [](const RunConfig& c) { return real_str(c.training.learning_rate); }}},
           {"weight_decay", {[](RunConfig& c, const S& k, const S& v) { c.training.weight_decay = parse_real(k, v); },
                             [](const RunConfig& c) { return real_str(c.training.weight_decay); }}},
           {"dropout", {[](RunConfig& c, const S& k, const S& v) { c.training.dropout = parse_real(k, v); },
                        [](const RunConfig& c) { return real_str(c.training.dropout); }}},
           {"ema_decay", {[](RunConfig& c, const S& k, const S& v) { c.training.ema_decay = parse_real(k, v); },
                          [](const RunConfig& c) { return real_str(c.training.ema_decay); }}},
           {"steps", {[](RunConfig& c, const S& k, const S& v) { c.training.steps = parse_integer<std::size_t>(k, v); },
                      [](const RunConfig& c) { return std::to_string(c.training.steps); }}},
           {"batch_size",
            {[](RunConfig& c, const S& k, const S& v) { c.training.batch_size = parse_integer<std::size_t>(k, v); },
             [](const RunConfig& c) { return std::to_string(c.training.batch_size); }}},
           {"patch_size",
            {[](RunConfig& c, const S& k, const S& v) { c.training.patch_size = parse_integer<std::size_t>(k, v); },
             [](const RunConfig& c) { return std::to_string(c.training.patch_size); }}},
           {"loss", {[](RunConfig& c, const S& k, const S& v) { c.training.loss = parse_enum(k, v, loss_type_from_string); },
                     [](const RunConfig& c) { return to_string(c.training.loss); }}},
           {"prediction",
            {[](RunConfig& c, const S& k, const S& v) {
               c.training.prediction = parse_enum(k, v, prediction_mode_from_string);
             },
             [](const RunConfig& c) { return to_string(c.training.prediction); }}},
           {"optimizer",
            {[](RunConfig& c, const S& k, const S& v) { c.training.optimizer = parse_enum(k, v, optimizer_from_string); },
             [](const RunConfig& c) { return to_string(c.training.optimizer); }}},
           {"grad_clip", {[](RunConfig& c, const S& k, const S& v) { c.training.grad_clip = parse_real(k, v); },
                          [](const RunConfig& c) { return real_str(c.training.grad_clip); }}},
       }},
      {"metrics",
       {
           {"max_val", {[](RunConfig& c, const S& k, const S& v) { c.metrics.max_val = c.metrics.ssim.max_val = parse_real(k, v); },
                        [](const RunConfig& c) { return real_str(c.metrics.max_val); }}},
           {"ssim_window",
            {[](RunConfig& c, const S& k, const S& v) { c.metrics.ssim.window = parse_integer<std::size_t>(k, v); },
             [](const RunConfig& c) { return std::to_string(c.metrics.ssim.window); }}},
           {"ssim_sigma", {[](RunConfig& c, const S& k, const S& v) { c.metrics.ssim.sigma = parse_real(k, v); },
                           [](const RunConfig& c) { return real_str(c.metrics.ssim.sigma); }}},
           {"ssim_k1", {[](RunConfig& c, const S& k, const S& v) { c.metrics.ssim.k1 = parse_real(k, v); },
                        [](const RunConfig& c) { return real_str(c.metrics.ssim.k1); }}},
           {"ssim_k2", {[](RunConfig& c, const S& k, const S& v) { c.metrics.ssim.k2 = parse_real(k, v); },
                        [](const RunConfig& c) { return real_str(c.metrics.ssim.k2); }}},
           {"perceptual", {[](RunConfig& c, const S&, const S& v) { c.metrics.perceptual_backend = trim(v); },
                           [](const RunConfig& c) { return c.metrics.perceptual_backend; }}},
           {"correlation",
            {[](RunConfig& c, const S& k, const S& v) { c.correlation = parse_enum(k, v, stats::correlation_kind_from_string); },
             [](const RunConfig& c) { return S(c.correlation == stats::CorrelationKind::Pearson ? "pearson" : "spearman"); }}},
           {"paired_test",
            {[](RunConfig& c, const S& k, const S& v) { c.results.test = parse_enum(k, v, stats::paired_test_from_string); },
             [](const RunConfig& c) { return stats::to_string(c.results.test); }}},
           {"reference", {[](RunConfig& c, const S&, const S& v) { c.results.reference_label = trim(v); },
                          [](const RunConfig& c) { return c.results.reference_label; }}},
           {"alpha", {[](RunConfig& c, const S& k, const S& v) { c.results.alpha = parse_real(k, v); },
                      [](const RunConfig& c) { return real_str(c.results.alpha); }}},
           {"bootstrap_resamples",
            {[](RunConfig& c, const S& k, const S& v) { c.results.bootstrap.resamples = parse_integer<std::size_t>(k, v); },
             [](const RunConfig& c) { return std::to_string(c.results.bootstrap.resamples); }}},
           {"confidence_level", {[](RunConfig& c, const S& k, const S& v) { c.results.bootstrap.level = parse_real(k, v); },
                                 [](const RunConfig& c) { return real_str(c.results.bootstrap.level); }}},
           {"threshold_years",
            {[](RunConfig& c, const S& k, const S& v) { c.results.threshold_years = parse_integer<int>(k, v); },
             [](const RunConfig& c) { return std::to_string(c.results.threshold_years); }}},
       }},
      {"paths",
       {
           {"data_dir", {[](RunConfig& c, const S&, const S& v) { c.paths.data_dir = trim(v); },
                         [](const RunConfig& c) { return c.paths.data_dir; }}},
           {"out_dir", {[](RunConfig& c, const S&, const S& v) { c.paths.out_dir = trim(v); },
                        [](const RunConfig& c) { return c.paths.out_dir; }}},
           {"params", {[](RunConfig& c, const S&, const S& v) { c.paths.params = trim(v); },
                       [](const RunConfig& c) { return c.paths.params; }}},
           {"log", {[](RunConfig& c, const S&, const S& v) { c.paths.log = trim(v); },
                    [](const RunConfig& c) { return c.paths.log; }}},
           {"manifests", {[](RunConfig& c, const S&, const S& v) { c.paths.manifests = trim(v); },
                          [](const RunConfig& c) { return c.paths.manifests; }}},
       }},
  };
  return fields;
}

inline const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& [sec, keys] : config_fields()) {
    if (sec != section) continue;
    for (const auto& [k, f] : keys)
      if (k == key) return &f;
  }
  return nullptr;
}

}  // namespace detail

inline void RunConfig::validate() const {
  using detail::require;
  vitreoforge::validate(phantom);
  require(locations >= 1, "config: phantom.locations must be >= 1");
  require(frames >= 1, "config: phantom.frames must be >= 1");
  for (const auto& s : phantom.artifact_strips)
    require(s.frame_index < frames, "config: phantom.artifact_strips references frame " + std::to_string(s.frame_index) +
                                        " but phantom.frames is " + std::to_string(frames));
  require(averaging.detect.min_width_fraction >= 0.0 && averaging.detect.min_width_fraction <= 1.0,
          "config: averaging.min_width_fraction must lie in [0, 1]");
  require(averaging.expected_frames >= 1, "config: averaging.expected_frames must be >= 1");
  require(schedule.timesteps >= 1, "config: schedule.T must be >= 1");
  require(schedule.beta_start > 0.0 && schedule.beta_end < 1.0 && schedule.beta_start <= schedule.beta_end,
          "config: need 0 < schedule.beta_start <= schedule.beta_end < 1");
  require(schedule.sampling_steps >= 1 && schedule.sampling_steps <= schedule.timesteps,
          "config: schedule.sampling_steps must lie in [1, T]");
  check_architecture(model, architecture);
  training.validate();
  require(metrics.max_val > 0.0, "config: metrics.max_val must be > 0");
  require(metrics.ssim.window % 2 == 1, "config: metrics.ssim_window must be odd");
  require(results.bootstrap.resamples >= 1, "config: metrics.bootstrap_resamples must be >= 1");
  require(results.bootstrap.level > 0.0 && results.bootstrap.level < 1.0,
          "config: metrics.confidence_level must lie in (0, 1)");
  require(results.alpha > 0.0 && results.alpha < 1.0, "config: metrics.alpha must lie in (0, 1)");
  try {
    stats::model_index(results.reference_label);
  } catch (const InvalidInput&) {
    throw InvalidInput("config key 'metrics.reference': '" + results.reference_label + "' is not a model label");
  }
}

// Defaults for a model kind: the kind's training column and channel layout.
inline RunConfig default_run_config(ModelKind kind = ModelKind::Cddpm) {
  RunConfig c;
  c.model = kind;
  c.architecture = default_architecture(kind);
  c.training = default_train_config(kind);
  return c;
}

// INI dialect: optional top-level `seed`, then [section] blocks of key = value;
// `;` or `#` start comment lines. Unknown sections or keys are rejected.
inline RunConfig parse_run_config(const std::string& text, const std::string& source = "config") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw MalformedInput(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }

  ModelKind kind = ModelKind::Cddpm;
  if (auto model = tree.get_child_optional("model"))
    if (auto k = model->get_optional<std::string>("kind"))
      kind = detail::parse_enum("model.kind", *k, model_kind_from_string);
  RunConfig c = default_run_config(kind);

  auto is_section = [](const std::string& n) {
    for (const auto& [sec, keys] : detail::config_fields())
      if (sec == n) return true;
    return false;
  };
  for (const auto& [name, node] : tree) {
    if (!is_section(name)) {
      if (name != "seed" || !node.empty())
        throw InvalidInput(source + ": unknown config " + (node.empty() ? "key '" : "section '") + name + "'");
      c.seed = detail::parse_integer<std::uint64_t>("seed", node.data());
      continue;
    }
    for (const auto& [key, value] : node) {
      const std::string full = name + "." + key;
      const detail::Field* f = detail::find_field(name, key);
      if (!f) throw InvalidInput(source + ": unknown config key '" + full + "'");
      if (!value.empty()) throw InvalidInput(source + ": config key '" + full + "' is nested");
      f->set(c, full, value.data());
    }
  }
  // A shortened chain caps the default bridge subgrid unless it was set explicitly.
  const auto sched = tree.get_child_optional("schedule");
  if (!sched || !sched->get_child_optional("sampling_steps"))
    c.schedule.sampling_steps = std::min(c.schedule.sampling_steps, c.schedule.timesteps);
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.string());
}

// Full effective configuration; parse_run_config(to_ini(c)) reproduces c.
inline std::string to_ini(const RunConfig& c) {
  std::ostringstream os;
  os << "seed = " << c.seed << "\n";
  for (const auto& [sec, keys] : detail::config_fields()) {
    os << "\n[" << sec << "]\n";
    for (const auto& [k, f] : keys) os << k << " = " << f.get(c) << "\n";
  }
  return os.str();
}

}  // namespace vitreoforge
