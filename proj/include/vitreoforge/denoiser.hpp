#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vitreoforge/codec.hpp"
#include "vitreoforge/diffusion.hpp"
#include "vitreoforge/image_io.hpp"
#include "vitreoforge/nn/unet.hpp"

namespace vitreoforge {

// Which enhancement model a parameter set belongs to.
enum class ModelKind { Cddpm, Regression, Bbdm };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Cddpm: return "cddpm";
    case ModelKind::Regression: return "regression";
    case ModelKind::Bbdm: return "bbdm";
  }
  return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "cddpm") return ModelKind::Cddpm;
  if (s == "regression" || s == "unet") return ModelKind::Regression;
  if (s == "bbdm") return ModelKind::Bbdm;
  throw InvalidInput("unknown model kind '" + s + "' (expected cddpm|regression|bbdm)");
}

// Stochastic-process settings stored alongside the weights.
struct ProcessConfig {
  std::size_t timesteps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  SigmaMode sigma = SigmaMode::Beta;
  PredictionMode prediction = PredictionMode::Velocity;
  // Bridge sampler subgrid size.
  std::size_t sampling_steps = 200;

  NoiseSchedule noise_schedule() const { return linear_beta_schedule(timesteps, beta_start, beta_end, sigma); }
  BridgeSchedule bridge_schedule() const { return BridgeSchedule(timesteps); }

  bool operator==(const ProcessConfig&) const = default;
};

// Desk-scale network shape for each model kind.
inline nn::Architecture default_architecture(ModelKind kind) {
  nn::Architecture a;
  a.in_channels = kind == ModelKind::Cddpm ? 2 : 1;
  a.time_embedding = kind != ModelKind::Regression;
  return a;
}

// Bridge models map a latent to a latent of the same channel count.
inline void check_architecture(ModelKind kind, const nn::Architecture& a) {
  a.validate();
  if (kind == ModelKind::Bbdm) {
    if (a.in_channels != a.out_channels) throw InvalidInput("bbdm model needs equal input and output channels");
  } else {
    const std::size_t in = kind == ModelKind::Cddpm ? 2 : 1;
    if (a.in_channels != in || a.out_channels != 1)
      throw InvalidInput(to_string(kind) + " model needs " + std::to_string(in) + " input channel(s) and 1 output");
  }
  if (a.time_embedding != (kind != ModelKind::Regression))
    throw InvalidInput(to_string(kind) + (kind == ModelKind::Regression ? " model takes no timestep"
                                                                         : " model needs a timestep embedding"));
}

struct DenoiserParams {
  ModelKind kind = ModelKind::Cddpm;
  nn::Architecture arch = default_architecture(ModelKind::Cddpm);
  ProcessConfig process;
  nn::ParamStore<float> weights;

  std::size_t parameter_count() const noexcept { return weights.size(); }
};

inline DenoiserParams init_params(ModelKind kind, const nn::Architecture& arch, const ProcessConfig& process,
                                  std::uint64_t seed) {
  check_architecture(kind, arch);
  const nn::UNet net(arch);
  DenoiserParams p{kind, arch, process, nn::ParamStore<float>(net.parameter_count())};
  p.weights.initialize(net.layout(), seed);
  return p;
}

// A parameter set bound to its network graph.
class Denoiser {
 public:
  explicit Denoiser(DenoiserParams params) : params_(std::move(params)) {
    check_architecture(params_.kind, params_.arch);
    net_ = nn::UNet(params_.arch);
    if (net_.parameter_count() != params_.weights.size())
      throw Mismatch("denoiser: " + std::to_string(params_.weights.size()) + " weights for an architecture needing " +
                     std::to_string(net_.parameter_count()));
    for (float w : params_.weights.weights())
      if (!std::isfinite(w)) throw InvalidInput("denoiser: non-finite weight");
  }

  const DenoiserParams& params() const noexcept { return params_; }
  const nn::UNet& net() const noexcept { return net_; }

  // Inference-mode forward pass (dropout off).
  Tensor<float> forward(const Tensor<float>& x, std::optional<double> t) const {
    return net_.forward(params_.weights, x, t, nn::RunContext{});
  }

  Image<float> predict(const Tensor<float>& x, std::optional<double> t) const { return to_image(forward(x, t)); }

  // Maps a low-quality image to its enhanced estimate using the stored process.
  // Bridge models run in the codec's latent space (identity when none is given).
  ImageTensor enhance(const ImageTensor& y, std::uint64_t seed, const LatentCodec* codec = nullptr) const {
    const Image<float> yf = y.cast<float>();
    switch (params_.kind) {
      case ModelKind::Regression:
        return clamp_unit(predict(to_tensor(yf), std::nullopt)).cast<double>();
      case ModelKind::Cddpm: {
        const auto sched = params_.process.noise_schedule();
        auto net = [this](const Tensor<float>& x, std::size_t t) { return predict(x, static_cast<double>(t)); };
        return cddpm_sample(net, yf, sched, seed, params_.process.prediction).cast<double>();
      }
      case ModelKind::Bbdm: {
        const IdentityCodec identity;
        const LatentCodec& cod = codec ? *codec : identity;
        auto net = [this](const Tensor<float>& x, std::size_t t) { return forward(x, static_cast<double>(t)); };
        const Tensor<float> lx0 =
            bbdm_sample(net, cod.encode(y), params_.process.bridge_schedule(), params_.process.sampling_steps);
        return clamp_unit(cod.decode(lx0));
      }
    }
    throw InvalidInput("denoiser: bad model kind");
  }

 private:
  DenoiserParams params_;
  nn::UNet net_;
};

// Parameter file: "OCTW", u32 version, u32 descriptor length, JSON descriptor,
// u64 parameter count, then little-endian float32 weights in declaration order.
inline constexpr std::array<char, 4> kParamMagic = {'O', 'C', 'T', 'W'};
inline constexpr std::uint32_t kParamVersion = 1;

namespace detail {

inline nlohmann::json describe(const DenoiserParams& p) {
  const auto& a = p.arch;
  const auto& q = p.process;
  return {{"model", to_string(p.kind)},
          {"architecture",
           {{"in_channels", a.in_channels},
            {"out_channels", a.out_channels},
            {"base_channels", a.base_channels},
            {"channel_mult", a.channel_mult},
            {"res_blocks", a.res_blocks},
            {"attention", a.attention},
            {"attention_heads", a.attention_heads},
            {"norm_groups", a.norm_groups},
            {"time_embedding", a.time_embedding}}},
          {"process",
           {{"timesteps", q.timesteps},
            {"beta_start", q.beta_start},
            {"beta_end", q.beta_end},
            {"sigma", to_string(q.sigma)},
            {"prediction", to_string(q.prediction)},
            {"sampling_steps", q.sampling_steps}}}};
}

inline void read_descriptor(const nlohmann::json& j, DenoiserParams& p) {
  p.kind = model_kind_from_string(j.at("model").get<std::string>());
  const auto& a = j.at("architecture");
  p.arch.in_channels = a.at("in_channels").get<std::size_t>();
  p.arch.out_channels = a.at("out_channels").get<std::size_t>();
  p.arch.base_channels = a.at("base_channels").get<std::size_t>();
  p.arch.channel_mult = a.at("channel_mult").get<std::vector<double>>();
  p.arch.res_blocks = a.at("res_blocks").get<std::size_t>();
  p.arch.attention = a.at("attention").get<std::vector<bool>>();
  p.arch.attention_heads = a.at("attention_heads").get<std::size_t>();
  p.arch.norm_groups = a.at("norm_groups").get<std::size_t>();
  p.arch.time_embedding = a.at("time_embedding").get<bool>();
  const auto& q = j.at("process");
  p.process.timesteps = q.at("timesteps").get<std::size_t>();
  p.process.beta_start = q.at("beta_start").get<double>();
  p.process.beta_end = q.at("beta_end").get<double>();
  p.process.sigma = sigma_mode_from_string(q.at("sigma").get<std::string>());
  p.process.prediction = prediction_mode_from_string(q.at("prediction").get<std::string>());
  p.process.sampling_steps = q.at("sampling_steps").get<std::size_t>();
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_params(const DenoiserParams& p) {
  const std::string desc = detail::describe(p).dump();
  std::vector<std::uint8_t> out(kParamMagic.begin(), kParamMagic.end());
  detail::put_u32(out, kParamVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(desc.size()));
  out.insert(out.end(), desc.begin(), desc.end());
  const std::uint64_t n = p.weights.size();
  detail::put_u32(out, static_cast<std::uint32_t>(n));
  detail::put_u32(out, static_cast<std::uint32_t>(n >> 32));
  out.reserve(out.size() + 4 * n);
  for (float w : p.weights.weights()) detail::put_u32(out, std::bit_cast<std::uint32_t>(w));
  return out;
}

inline DenoiserParams decode_params(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12) throw MalformedInput("parameter file: truncated header");
  if (std::memcmp(bytes.data(), kParamMagic.data(), 4) != 0) throw MalformedInput("parameter file: bad magic");
  const std::uint32_t version = detail::get_u32(bytes.data() + 4);
  if (version != kParamVersion)
    throw Mismatch("parameter file: version " + std::to_string(version) + ", expected " +
                   std::to_string(kParamVersion));
  const std::size_t dlen = detail::get_u32(bytes.data() + 8);
  if (bytes.size() < 12 + dlen + 8) throw MalformedInput("parameter file: truncated descriptor");
  DenoiserParams p;
  try {
    detail::read_descriptor(nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + static_cast<std::ptrdiff_t>(dlen)), p);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedInput(std::string("parameter file: bad descriptor: ") + e.what());
  }
  const std::uint8_t* q = bytes.data() + 12 + dlen;
  const std::uint64_t n = detail::get_u32(q) | (static_cast<std::uint64_t>(detail::get_u32(q + 4)) << 32);
  const std::size_t payload = bytes.size() - (12 + dlen + 8);
  if (payload != 4 * n)
    throw MalformedInput("parameter file: header declares " + std::to_string(n) + " weights but payload holds " +
                         std::to_string(payload) + " bytes");
  AlignedVector<float> w(n);
  q += 8;
  for (std::size_t i = 0; i < n; ++i, q += 4) w[i] = std::bit_cast<float>(detail::get_u32(q));
  p.weights = nn::ParamStore<float>(std::move(w));
  check_architecture(p.kind, p.arch);
  if (nn::UNet(p.arch).parameter_count() != n)
    throw Mismatch("parameter file: weight count does not match its architecture");
  return p;
}

inline void save_params(const DenoiserParams& p, const std::filesystem::path& path) {
  detail::write_file(path, encode_params(p));
}

inline DenoiserParams load_params(const std::filesystem::path& path) { return decode_params(detail::read_file(path)); }

// Loads and checks the stored model against what the caller expects.
inline DenoiserParams load_params(const std::filesystem::path& path, ModelKind kind, const nn::Architecture& arch) {
  DenoiserParams p = load_params(path);
  if (p.kind != kind) throw Mismatch("parameter file holds a " + to_string(p.kind) + " model, expected " + to_string(kind));
  if (!(p.arch == arch)) throw Mismatch("parameter file architecture differs from the configured one");
  return p;
}

}  // namespace vitreoforge
