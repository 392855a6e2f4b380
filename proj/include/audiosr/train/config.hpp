#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include "audiosr/models/config.hpp"
#include "audiosr/train/pairs.hpp"

namespace audiosr::train {

enum class LossKind { l1, l2 };

inline std::string to_string(LossKind k) { return k == LossKind::l1 ? "l1" : "l2"; }

inline LossKind parse_loss(const std::string& s) {
  if (s == "l1") return LossKind::l1;
  if (s == "l2") return LossKind::l2;
  throw InvalidArgument("unknown loss '" + s + "' (expected l1 or l2)");
}

/// Squared error for EDSR, absolute error for the pre-upsampling network.
inline LossKind default_loss(models::ModelKind k) {
  return k == models::ModelKind::unet ? LossKind::l1 : LossKind::l2;
}

struct TrainConfig {
  long steps = 1000;
  int batch_size = 16;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::optional<LossKind> loss;  // unset: default for the model kind
  int scale = 2;
  std::optional<Mode> mode;      // unset: implied by the model kind
  std::uint64_t seed = 0;
  std::size_t patch_length = 8192;
  std::size_t patch_stride = 0;  // 0: equal to patch_length (non-overlapping)
  long checkpoint_every = 0;     // 0: never
  long log_every = 0;            // progress lines; 0: silent

  std::size_t stride() const { return patch_stride ? patch_stride : patch_length; }

  void validate() const {
    require(steps >= 0, "train: steps must be >= 0");
    require(batch_size >= 1, "train: batch_size must be >= 1");
    require(lr > 0.0, "train: lr must be positive");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "train: betas must lie in [0, 1)");
    require(eps > 0.0, "train: eps must be positive");
    require(scale >= 2, "train: scale must be >= 2");
    require(patch_length >= 1, "train: patch_length must be >= 1");
    require(checkpoint_every >= 0 && log_every >= 0, "train: intervals must be >= 0");
  }

  models::KeyValues to_kv() const {
    using models::kv::fmt;
    return {{"steps", std::to_string(steps)},
            {"batch_size", std::to_string(batch_size)},
            {"lr", fmt(lr)},
            {"beta1", fmt(beta1)},
            {"beta2", fmt(beta2)},
            {"eps", fmt(eps)},
            {"loss", loss ? to_string(*loss) : "default"},
            {"scale", std::to_string(scale)},
            {"mode", mode ? to_string(*mode) : "default"},
            {"seed", std::to_string(seed)},
            {"patch_length", std::to_string(patch_length)},
            {"patch_stride", std::to_string(patch_stride)},
            {"checkpoint_every", std::to_string(checkpoint_every)},
            {"log_every", std::to_string(log_every)}};
  }

  static TrainConfig from_kv(const models::KeyValues& values, const std::string& section = "train") {
    using namespace models::kv;
    TrainConfig c;
    auto count = [](const std::string& key, const std::string& v) {
      const long n = to_int(key, v);
      require(n >= 0, key + " must be >= 0");
      return static_cast<std::size_t>(n);
    };
    const std::map<std::string, std::function<void(const std::string&)>> setters{
        {"steps", [&](const std::string& v) { c.steps = to_int("steps", v); }},
        {"batch_size", [&](const std::string& v) { c.batch_size = to_int("batch_size", v); }},
        {"lr", [&](const std::string& v) { c.lr = to_double("lr", v); }},
        {"beta1", [&](const std::string& v) { c.beta1 = to_double("beta1", v); }},
        {"beta2", [&](const std::string& v) { c.beta2 = to_double("beta2", v); }},
        {"eps", [&](const std::string& v) { c.eps = to_double("eps", v); }},
        {"loss", [&](const std::string& v) { c.loss = v == "default" ? std::nullopt : std::optional(parse_loss(v)); }},
        {"scale", [&](const std::string& v) { c.scale = to_int("scale", v); }},
        {"mode", [&](const std::string& v) { c.mode = v == "default" ? std::nullopt : std::optional(parse_mode(v)); }},
        {"seed", [&](const std::string& v) { c.seed = count("seed", v); }},
        {"patch_length", [&](const std::string& v) { c.patch_length = count("patch_length", v); }},
        {"patch_stride", [&](const std::string& v) { c.patch_stride = count("patch_stride", v); }},
        {"checkpoint_every", [&](const std::string& v) { c.checkpoint_every = to_int("checkpoint_every", v); }},
        {"log_every", [&](const std::string& v) { c.log_every = to_int("log_every", v); }},
    };
    apply(values, setters, section);
    c.validate();
    return c;
  }
};

struct GanConfig {
  TrainConfig base;       // steps counts outer iterations
  double lambda = 10.0;
  int n_critic = 5;
  double content_weight = 0.0;
  std::string warm_start;  // generator checkpoint path; empty: none

  GanConfig() { base.loss = LossKind::l1; }

  void validate() const {
    base.validate();
    require(lambda >= 0.0, "gan: lambda must be >= 0");
    require(n_critic >= 1, "gan: n_critic must be >= 1");
    require(content_weight >= 0.0, "gan: content_weight must be >= 0");
  }

  models::KeyValues to_kv() const {
    return {{"lambda", models::kv::fmt(lambda)},
            {"n_critic", std::to_string(n_critic)},
            {"content_weight", models::kv::fmt(content_weight)},
            {"warm_start", warm_start}};
  }

  /// Reads the adversarial keys; `base` is filled separately.
  void apply_kv(const models::KeyValues& values, const std::string& section = "gan") {
    using namespace models::kv;
    const std::map<std::string, std::function<void(const std::string&)>> setters{
        {"lambda", [&](const std::string& v) { lambda = to_double("lambda", v); }},
        {"n_critic", [&](const std::string& v) { n_critic = to_int("n_critic", v); }},
        {"content_weight", [&](const std::string& v) { content_weight = to_double("content_weight", v); }},
        {"warm_start", [&](const std::string& v) { warm_start = v; }},
    };
    apply(values, setters, section);
    validate();
  }
};

}  // namespace audiosr::train
