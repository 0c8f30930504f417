#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vitreoforge/error.hpp"
#include "vitreoforge/image.hpp"

namespace vitreoforge {

// Returned by psnr when the two images are identical.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

inline bool is_sentinel(double v) noexcept { return std::isinf(v) && v > 0.0; }

// Fixed 3-decimal rendering; +inf prints as "inf", NaN as "nan".
inline std::string format_metric(double v, int decimals = 3) {
  if (is_sentinel(v)) return "inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

namespace detail {

inline void require_same(const ImageTensor& a, const ImageTensor& b, const char* who) {
  if (!a.same_shape(b))
    throw InvalidInput(std::string(who) + ": shape mismatch " + std::to_string(a.height()) + "x" +
                       std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                       std::to_string(b.width()));
}

// Sum of squared differences over the selected pixels, visited in raster order.
template <typename Keep>
std::pair<double, std::size_t> squared_error(const ImageTensor& a, const ImageTensor& b, Keep keep) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!keep(i)) continue;
    const double d = a[i] - b[i];
    s += d * d;
    ++n;
  }
  return {s, n};
}

inline double psnr_from_mse(double mse, double max_val) {
  if (mse == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(max_val * max_val / mse);
}

}  // namespace detail

inline double mse(const ImageTensor& a, const ImageTensor& b) {
  detail::require_same(a, b, "mse");
  if (a.empty()) throw InvalidInput("mse: empty image");
  const auto [s, n] = detail::squared_error(a, b, [](std::size_t) { return true; });
  return s / static_cast<double>(n);
}

inline double psnr(const ImageTensor& a, const ImageTensor& b, double max_val = 1.0) {
  if (!(max_val > 0.0)) throw InvalidInput("psnr: max_val must be positive");
  return detail::psnr_from_mse(mse(a, b), max_val);
}

inline double masked_psnr(const ImageTensor& a, const ImageTensor& b, const RoiMask& roi, double max_val = 1.0) {
  detail::require_same(a, b, "masked_psnr");
  if (!roi.same_shape(a)) throw InvalidInput("masked_psnr: ROI shape does not match images");
  if (!(max_val > 0.0)) throw InvalidInput("masked_psnr: max_val must be positive");
  const auto [s, n] = detail::squared_error(a, b, [&](std::size_t i) { return roi[i]; });
  if (n == 0) throw InvalidInput("masked_psnr: ROI is empty");
  return detail::psnr_from_mse(s / static_cast<double>(n), max_val);
}

struct SsimConfig {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double max_val = 1.0;
};

// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
inline std::vector<double> gaussian_taps(std::size_t size, double sigma) {
  if (size == 0 || size % 2 == 0) throw InvalidInput("ssim: window size must be odd");
  if (!(sigma > 0.0)) throw InvalidInput("ssim: sigma must be positive");
  std::vector<double> g(size);
  const double c = static_cast<double>(size / 2);
  double sum = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double x = static_cast<double>(i) - c;
    g[i] = std::exp(-x * x / (2.0 * sigma * sigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

namespace detail {

// Separable "valid" correlation of src with taps (no padding).
inline ImageTensor filter_valid(const ImageTensor& src, const std::vector<double>& g) {
  const std::size_t k = g.size();
  const std::size_t oh = src.height() - k + 1, ow = src.width() - k + 1;
  ImageTensor rows(src.height(), ow);
  for (std::size_t r = 0; r < src.height(); ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += g[j] * src(r, c + j);
      rows(r, c) = s;
    }
  ImageTensor out(oh, ow);
  for (std::size_t r = 0; r < oh; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i) s += g[i] * rows(r + i, c);
      out(r, c) = s;
    }
  return out;
}

inline ImageTensor product(const ImageTensor& a, const ImageTensor& b) {
  ImageTensor out(a.height(), a.width());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

}  // namespace detail

// Local SSIM map over every fully-contained window position.
inline ImageTensor ssim_map(const ImageTensor& a, const ImageTensor& b, const SsimConfig& cfg = {}) {
  detail::require_same(a, b, "ssim");
  if (a.height() < cfg.window || a.width() < cfg.window)
    throw InvalidInput("ssim: image " + std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                       " is smaller than the " + std::to_string(cfg.window) + "x" + std::to_string(cfg.window) +
                       " window");
  const auto g = gaussian_taps(cfg.window, cfg.sigma);
  const ImageTensor mu_a = detail::filter_valid(a, g);
  const ImageTensor mu_b = detail::filter_valid(b, g);
  const ImageTensor aa = detail::filter_valid(detail::product(a, a), g);
  const ImageTensor bb = detail::filter_valid(detail::product(b, b), g);
  const ImageTensor ab = detail::filter_valid(detail::product(a, b), g);
  const double c1 = (cfg.k1 * cfg.max_val) * (cfg.k1 * cfg.max_val);
  const double c2 = (cfg.k2 * cfg.max_val) * (cfg.k2 * cfg.max_val);
  ImageTensor out(mu_a.height(), mu_a.width());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = aa[i] - ma * ma, vb = bb[i] - mb * mb, cov = ab[i] - ma * mb;
    out[i] = ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return out;
}

inline double ssim(const ImageTensor& a, const ImageTensor& b, const SsimConfig& cfg = {}) {
  const ImageTensor m = ssim_map(a, b, cfg);
  double s = 0.0;
  for (double v : m.values()) s += v;
  return s / static_cast<double>(m.size());
}

// Pluggable perceptual distance. Implementations must be symmetric, non-negative
// and zero on identical inputs.
class PerceptualBackend {
 public:
  virtual ~PerceptualBackend() = default;
  virtual std::string name() const = 0;
  // Shown wherever the value is reported.
  virtual std::string label() const = 0;
  virtual double distance(const ImageTensor& a, const ImageTensor& b) const = 0;
};

// Forward-difference gradient magnitude, zero derivative past the last row/column.
inline ImageTensor gradient_magnitude(const ImageTensor& img) {
  ImageTensor out(img.height(), img.width());
  for (std::size_t r = 0; r < img.height(); ++r)
    for (std::size_t c = 0; c < img.width(); ++c) {
      const double gx = c + 1 < img.width() ? img(r, c + 1) - img(r, c) : 0.0;
      const double gy = r + 1 < img.height() ? img(r + 1, c) - img(r, c) : 0.0;
      out(r, c) = std::sqrt(gx * gx + gy * gy);
    }
  return out;
}

// Stand-in: MSE between gradient-magnitude maps. Not LPIPS.
class GradientMseBackend final : public PerceptualBackend {
 public:
  std::string name() const override { return "gradient-mse"; }
  std::string label() const override { return "gradient-mse (non-LPIPS stand-in)"; }
  double distance(const ImageTensor& a, const ImageTensor& b) const override {
    detail::require_same(a, b, "perceptual_distance");
    return mse(gradient_magnitude(a), gradient_magnitude(b));
  }
};

class PerceptualRegistry {
 public:
  PerceptualRegistry() { add(std::make_shared<GradientMseBackend>()); }

  void add(std::shared_ptr<const PerceptualBackend> backend) {
    if (!backend) throw InvalidInput("perceptual registry: null backend");
    backends_[backend->name()] = std::move(backend);
  }

  const PerceptualBackend& get(const std::string& name) const {
    const auto it = backends_.find(name);
    if (it == backends_.end()) {
      std::string known;
      for (const auto& [k, v] : backends_) known += (known.empty() ? "" : ", ") + k;
      throw InvalidInput("unknown perceptual backend '" + name + "' (registered: " + known + ")");
    }
    return *it->second;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : backends_) out.push_back(k);
    return out;
  }

 private:
  std::map<std::string, std::shared_ptr<const PerceptualBackend>> backends_;
};

inline PerceptualRegistry& default_perceptual_registry() {
  static PerceptualRegistry registry;
  return registry;
}

inline double perceptual_distance(const ImageTensor& a, const ImageTensor& b, const std::string& backend,
                                  const PerceptualRegistry& registry = default_perceptual_registry()) {
  return registry.get(backend).distance(a, b);
}

// Mean and sample std over finite values; +inf sentinels are counted and skipped.
struct MetricSummary {
  std::string metric;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
  std::size_t n_excluded = 0;

  // "30.230 ± 2.089"
  std::string mean_std() const { return format_metric(mean) + " ± " + format_metric(std); }
};

inline MetricSummary summarize(const std::string& metric, const std::vector<double>& values) {
  MetricSummary s;
  s.metric = metric;
  double sum = 0.0;
  for (double v : values) {
    if (is_sentinel(v)) {
      ++s.n_excluded;
      continue;
    }
    if (!std::isfinite(v)) throw InvalidInput("summarize: non-finite value for " + metric);
    sum += v;
    ++s.n;
  }
  if (s.n == 0) return s;
  s.mean = sum / static_cast<double>(s.n);
  double ss = 0.0;
  for (double v : values)
    if (!is_sentinel(v)) ss += (v - s.mean) * (v - s.mean);
  s.std = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
  return s;
}

struct EvalPair {
  ImageTensor generated;
  ImageTensor ground_truth;
  std::optional<ImageTensor> input;  // enables the input-vs-target baseline row
  std::optional<RoiMask> roi;
};

struct MetricOptions {
  double max_val = 1.0;
  SsimConfig ssim;
  std::string perceptual_backend = "gradient-mse";
};

struct MetricReport {
  std::vector<std::string> metrics;              // column names
  std::vector<std::vector<double>> per_image;    // [image][metric]
  std::vector<MetricSummary> summary;            // one per metric
  std::vector<MetricSummary> baseline;           // input vs target; empty when no inputs
  std::string perceptual_label;
};

namespace detail {

inline std::vector<double> image_metrics(const ImageTensor& gen, const ImageTensor& gt, const std::optional<RoiMask>& roi,
                                         bool with_roi, const MetricOptions& opt, const PerceptualBackend& backend) {
  std::vector<double> row{mse(gen, gt), psnr(gen, gt, opt.max_val), ssim(gen, gt, opt.ssim), backend.distance(gen, gt)};
  if (with_roi) row.push_back(masked_psnr(gen, gt, *roi, opt.max_val));
  return row;
}

inline std::vector<MetricSummary> summarize_columns(const std::vector<std::string>& names,
                                                    const std::vector<std::vector<double>>& rows) {
  std::vector<MetricSummary> out;
  for (std::size_t m = 0; m < names.size(); ++m) {
    std::vector<double> col;
    col.reserve(rows.size());
    for (const auto& r : rows) col.push_back(r[m]);
    out.push_back(summarize(names[m], col));
  }
  return out;
}

}  // namespace detail

inline MetricReport metric_report(const std::vector<EvalPair>& pairs, const MetricOptions& opt = {},
                                  const PerceptualRegistry& registry = default_perceptual_registry()) {
  if (pairs.empty()) throw InvalidInput("metric_report: no image pairs");
  const PerceptualBackend& backend = registry.get(opt.perceptual_backend);
  const bool with_roi = pairs.front().roi.has_value();
  const bool with_input = pairs.front().input.has_value();
  for (const auto& p : pairs) {
    if (p.roi.has_value() != with_roi) throw InvalidInput("metric_report: ROI must be given for all pairs or none");
    if (p.input.has_value() != with_input)
      throw InvalidInput("metric_report: input must be given for all pairs or none");
  }
  MetricReport rep;
  rep.perceptual_label = backend.label();
  rep.metrics = {"mse", "psnr", "ssim", "perceptual:" + backend.name()};
  if (with_roi) rep.metrics.push_back("roi_psnr");
  std::vector<std::vector<double>> base;
  for (const auto& p : pairs) {
    rep.per_image.push_back(detail::image_metrics(p.generated, p.ground_truth, p.roi, with_roi, opt, backend));
    if (with_input) base.push_back(detail::image_metrics(*p.input, p.ground_truth, p.roi, with_roi, opt, backend));
  }
  rep.summary = detail::summarize_columns(rep.metrics, rep.per_image);
  if (with_input) rep.baseline = detail::summarize_columns(rep.metrics, base);
  return rep;
}

// Delimited table: metric, mean, std, n, n_excluded. Baseline rows are prefixed "baseline:".
inline std::string report_table(const MetricReport& rep, char delim = '\t') {
  std::ostringstream os;
  os << "metric" << delim << "mean" << delim << "std" << delim << "n" << delim << "n_excluded\n";
  auto emit = [&](const MetricSummary& s, const std::string& prefix) {
    os << prefix << s.metric << delim << format_metric(s.mean, 6) << delim << format_metric(s.std, 6) << delim << s.n
       << delim << s.n_excluded << '\n';
  };
  for (const auto& s : rep.summary) emit(s, "");
  for (const auto& s : rep.baseline) emit(s, "baseline:");
  return os.str();
}

// Human-readable "mean ± std" rendering at 3 decimals.
inline std::string render_report(const MetricReport& rep) {
  std::ostringstream os;
  auto line = [&](const MetricSummary& s) {
    os << "  " << s.metric << ": " << s.mean_std() << " (n=" << s.n;
    if (s.n_excluded) os << ", " << s.n_excluded << " excluded as inf";
    os << ")\n";
  };
  os << "generated vs target\n";
  for (const auto& s : rep.summary) line(s);
  if (!rep.baseline.empty()) {
    os << "baseline (input vs target)\n";
    for (const auto& s : rep.baseline) line(s);
  }
  os << "perceptual backend: " << rep.perceptual_label << '\n';
  return os.str();
}

}  // namespace vitreoforge
