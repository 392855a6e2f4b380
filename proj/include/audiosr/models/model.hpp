#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "audiosr/diffgraph.hpp"
#include "audiosr/models/config.hpp"
#include "audiosr/rng.hpp"

namespace audiosr::models {

using dg::Parameter;
using dg::ParameterList;
using dg::Tensor;

/// A network: its configuration plus named parameters in build order.
/// The forward graph is fixed by the configuration kind.
class Model {
 public:
  Model(ModelConfig config, ParameterList params, std::uint64_t init_seed)
      : config_(std::move(config)), params_(std::move(params)), init_seed_(init_seed) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      require(index_.emplace(params_[i].name, i).second, "duplicate parameter name '" + params_[i].name + "'");
    }
  }

  ModelKind kind() const { return kind_of(config_); }
  const ModelConfig& config() const { return config_; }
  template <typename C>
  const C& config_as() const {
    return std::get<C>(config_);
  }

  ParameterList& parameters() { return params_; }
  const ParameterList& parameters() const { return params_; }
  std::uint64_t init_seed() const { return init_seed_; }

  const Tensor& param(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "no parameter named '" + name + "'");
    return params_[it->second].tensor;
  }

  /// Runs the network. `rng` drives dropout and phase shuffle; both are
  /// inactive when `training` is false.
  Tensor forward(const Tensor& x, bool training, Rng& rng) const;

  Tensor forward(const Tensor& x) const {
    Rng unused(0);
    return forward(x, false, unused);
  }

  /// Output length for an input of `length` samples.
  std::size_t output_length(std::size_t length) const;

  /// Deep copy of parameters, e.g. for snapshotting.
  Model clone() const {
    ParameterList copy;
    for (const auto& p : params_) copy.push_back({p.name, p.tensor.detach().set_requires_grad(true)});
    return Model(config_, std::move(copy), init_seed_);
  }

 private:
  Tensor forward_edsr(const Tensor& x) const;
  Tensor forward_unet(const Tensor& x, bool training, Rng& rng) const;
  Tensor forward_critic(const Tensor& x, bool training, Rng& rng) const;

  ModelConfig config_;
  ParameterList params_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t init_seed_;
};

/// Sum of element counts over all parameters.
inline std::size_t count_parameters(const Model& m) {
  std::size_t n = 0;
  for (const auto& p : m.parameters()) n += p.tensor.numel();
  return n;
}

namespace detail {

/// Appends a conv weight (c_out, c_in, k) and bias (c_out) drawn from
/// fan-in scaled uniform ranges: weights in +-sqrt(6 / fan_in), biases in
/// +-1 / sqrt(fan_in).
inline void add_conv(ParameterList& ps, Rng& rng, const std::string& name, std::size_t c_in, std::size_t c_out,
                     std::size_t k) {
  const double fan_in = static_cast<double>(c_in * k);
  const double wb = std::sqrt(6.0 / fan_in);
  const double bb = 1.0 / std::sqrt(fan_in);
  std::vector<double> w(c_out * c_in * k), b(c_out);
  for (double& v : w) v = rng.uniform(-wb, wb);
  for (double& v : b) v = rng.uniform(-bb, bb);
  ps.push_back({name + ".weight", Tensor({c_out, c_in, k}, std::move(w), true)});
  ps.push_back({name + ".bias", Tensor({c_out}, std::move(b), true)});
}

}  // namespace detail

/// stem -> n residual blocks -> post conv + global skip -> q x (conv to 2f,
/// shuffle 2) -> conv to one channel.
inline Model build_edsr(const EdsrConfig& cfg, std::uint64_t seed = 0) {
  cfg.validate();
  Rng rng(seed);
  ParameterList ps;
  const auto f = static_cast<std::size_t>(cfg.filters);
  const auto ks = static_cast<std::size_t>(cfg.stem_kernel);
  const auto kb = static_cast<std::size_t>(cfg.block_kernel);
  detail::add_conv(ps, rng, "stem", 1, f, ks);
  for (int i = 0; i < cfg.blocks; ++i) {
    const std::string b = "block" + std::to_string(i);
    detail::add_conv(ps, rng, b + ".conv1", f, f, kb);
    detail::add_conv(ps, rng, b + ".conv2", f, f, kb);
  }
  detail::add_conv(ps, rng, "post", f, f, ks);
  for (int q = 0; q < cfg.upsample_stages; ++q) detail::add_conv(ps, rng, "up" + std::to_string(q), f, 2 * f, ks);
  detail::add_conv(ps, rng, "final", f, 1, ks);
  return Model(cfg, std::move(ps), seed);
}

/// Stride-2 downsampling blocks, a stride-2 bottleneck, mirrored subpixel
/// upsampling blocks stacked with their downsampling partner, and a final
/// subpixel layer whose output is added to the network input.
inline Model build_unet(const UnetConfig& cfg, std::uint64_t seed = 0) {
  cfg.validate();
  Rng rng(seed);
  ParameterList ps;
  const std::size_t depth = cfg.down_filters.size();
  auto f = [&](std::size_t i) { return static_cast<std::size_t>(cfg.down_filters[i]); };
  auto k = [&](std::size_t i) { return static_cast<std::size_t>(cfg.down_kernels[i]); };
  std::size_t c_prev = 1;
  for (std::size_t i = 0; i < depth; ++i) {
    detail::add_conv(ps, rng, "down" + std::to_string(i), c_prev, f(i), k(i));
    c_prev = f(i);
  }
  detail::add_conv(ps, rng, "bottleneck", c_prev, static_cast<std::size_t>(cfg.bottleneck_filters),
                   static_cast<std::size_t>(cfg.bottleneck_kernel));
  c_prev = static_cast<std::size_t>(cfg.bottleneck_filters);
  for (std::size_t i = depth; i-- > 0;) {
    detail::add_conv(ps, rng, "up" + std::to_string(i), c_prev, 2 * f(i), k(i));
    c_prev = 2 * f(i);  // f(i) after the shuffle, doubled by the stack connection
  }
  detail::add_conv(ps, rng, "final", c_prev, 2, static_cast<std::size_t>(cfg.final_kernel));
  return Model(cfg, std::move(ps), seed);
}

/// Stride-2 conv stack with channel doubling, leaky relu after each layer,
/// global average pooling and a dense layer to one score per item.
inline Model build_critic(const CriticConfig& cfg, std::uint64_t seed = 0) {
  cfg.validate();
  Rng rng(seed);
  ParameterList ps;
  std::size_t c_prev = 1;
  for (int i = 0; i < cfg.layers; ++i) {
    const std::size_t c = static_cast<std::size_t>(cfg.base_filters) << i;
    detail::add_conv(ps, rng, "conv" + std::to_string(i), c_prev, c, static_cast<std::size_t>(cfg.kernel));
    c_prev = c;
  }
  // dense layer stored as a width-1 convolution over the pooled features
  detail::add_conv(ps, rng, "dense", c_prev, 1, 1);
  return Model(cfg, std::move(ps), seed);
}

inline Model build_model(const ModelConfig& cfg, std::uint64_t seed = 0) {
  return std::visit(
      [&](const auto& c) -> Model {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, EdsrConfig>) return build_edsr(c, seed);
        else if constexpr (std::is_same_v<C, UnetConfig>) return build_unet(c, seed);
        else return build_critic(c, seed);
      },
      cfg);
}

inline Tensor Model::forward(const Tensor& x, bool training, Rng& rng) const {
  require(x.defined() && x.rank() == 3 && x.dim(1) == 1,
          to_string(kind()) + ": expected input of shape (batch, 1, length), got " +
              (x.defined() ? dg::to_string(x.shape()) : std::string("undefined")));
  switch (kind()) {
    case ModelKind::edsr: return forward_edsr(x);
    case ModelKind::unet: return forward_unet(x, training, rng);
    case ModelKind::critic: return forward_critic(x, training, rng);
  }
  throw InvalidArgument("unknown model kind");
}

inline std::size_t Model::output_length(std::size_t length) const {
  switch (kind()) {
    case ModelKind::edsr: return length * static_cast<std::size_t>(config_as<EdsrConfig>().scale());
    case ModelKind::unet: return length;
    case ModelKind::critic: return 1;
  }
  return 0;
}

inline Tensor Model::forward_edsr(const Tensor& x) const {
  const auto& cfg = config_as<EdsrConfig>();
  auto conv = [&](const Tensor& in, const std::string& name) {
    return dg::conv1d(in, param(name + ".weight"), param(name + ".bias"));
  };
  const Tensor stem = conv(x, "stem");
  Tensor h = stem;
  for (int i = 0; i < cfg.blocks; ++i) {
    const std::string b = "block" + std::to_string(i);
    const Tensor branch = conv(dg::relu(conv(h, b + ".conv1")), b + ".conv2");
    h = dg::add(h, dg::scale(branch, cfg.residual_scaling));
  }
  h = dg::add(conv(h, "post"), stem);
  for (int q = 0; q < cfg.upsample_stages; ++q) h = dg::subpixel_shuffle1d(conv(h, "up" + std::to_string(q)), 2);
  return conv(h, "final");
}

inline Tensor Model::forward_unet(const Tensor& x, bool training, Rng& rng) const {
  const auto& cfg = config_as<UnetConfig>();
  const std::size_t divisor = cfg.length_divisor();
  require(x.dim(2) % divisor == 0, "unet: input length " + std::to_string(x.dim(2)) +
                                       " must be divisible by " + std::to_string(divisor));
  auto conv = [&](const Tensor& in, const std::string& name, std::size_t stride) {
    return dg::conv1d(in, param(name + ".weight"), param(name + ".bias"), stride);
  };
  const std::size_t depth = cfg.down_filters.size();
  std::vector<Tensor> skips;
  Tensor h = x;
  for (std::size_t i = 0; i < depth; ++i) {
    h = dg::leaky_relu(conv(h, "down" + std::to_string(i), 2), cfg.leaky_slope);
    skips.push_back(h);
  }
  h = dg::leaky_relu(dg::dropout(conv(h, "bottleneck", 2), cfg.dropout_rate, rng, training), cfg.leaky_slope);
  for (std::size_t i = depth; i-- > 0;) {
    h = conv(h, "up" + std::to_string(i), 1);
    h = dg::relu(dg::dropout(h, cfg.dropout_rate, rng, training));
    h = dg::subpixel_shuffle1d(h, 2);
    // the bottleneck rounds odd lengths up; crop back to the partner length
    h = dg::slice_time(h, 0, skips[i].dim(2));
    h = dg::concat_channels(h, skips[i]);
  }
  h = dg::subpixel_shuffle1d(conv(h, "final", 1), 2);
  h = dg::slice_time(h, 0, x.dim(2));
  return dg::add(h, x);
}

inline Tensor Model::forward_critic(const Tensor& x, bool training, Rng& rng) const {
  const auto& cfg = config_as<CriticConfig>();
  Tensor h = x;
  for (int i = 0; i < cfg.layers; ++i) {
    const std::string name = "conv" + std::to_string(i);
    h = dg::leaky_relu(dg::conv1d(h, param(name + ".weight"), param(name + ".bias"), 2), cfg.leaky_slope);
    if (training && cfg.phase_shuffle_n > 0 && i + 1 < cfg.layers) {
      require(h.dim(2) > static_cast<std::size_t>(cfg.phase_shuffle_n),
              "critic: input too short for phase shuffle at layer " + std::to_string(i));
      h = dg::phase_shuffle(h, cfg.phase_shuffle_n, rng);
    }
  }
  return dg::conv1d(dg::mean_time(h), param("dense.weight"), param("dense.bias"));
}

}  // namespace audiosr::models
