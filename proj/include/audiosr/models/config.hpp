#pragma once

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "audiosr/error.hpp"

namespace audiosr::models {

enum class ModelKind { edsr, unet, critic };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::edsr: return "edsr";
    case ModelKind::unet: return "unet";
    case ModelKind::critic: return "critic";
  }
  return "?";
}

inline ModelKind parse_kind(const std::string& s) {
  if (s == "edsr") return ModelKind::edsr;
  if (s == "unet") return ModelKind::unet;
  if (s == "critic") return ModelKind::critic;
  throw InvalidArgument("unknown model kind '" + s + "'");
}

/// Ordered key/value pairs; the canonical text form is one `key = value` per line.
using KeyValues = std::map<std::string, std::string>;

namespace kv {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

inline int to_int(const std::string& key, const std::string& s) {
  int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw InvalidArgument(key + ": expected an integer, got '" + s + "'");
  return v;
}

inline double to_double(const std::string& key, const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw InvalidArgument(key + ": expected a number, got '" + s + "'");
  return v;
}

inline std::vector<int> to_int_list(const std::string& key, const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    out.push_back(to_int(key, b == std::string::npos ? "" : item.substr(b, e - b + 1)));
  }
  return out;
}

/// Applies `setters[key]` to every entry; unknown keys are rejected.
template <typename Setters>
void apply(const KeyValues& values, const Setters& setters, const std::string& section) {
  for (const auto& [k, v] : values) {
    auto it = setters.find(k);
    if (it == setters.end()) throw InvalidArgument("unknown key '" + k + "' in [" + section + "]");
    it->second(v);
  }
}

inline std::string to_text(const KeyValues& values) {
  std::string s;
  for (const auto& [k, v] : values) s += k + " = " + v + "\n";
  return s;
}

inline KeyValues from_text(const std::string& text) {
  KeyValues out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw InvalidArgument("malformed config line '" + line + "'");
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

}  // namespace kv

/// Post-upsampling residual network. Output length is 2^upsample_stages times
/// the input length.
struct EdsrConfig {
  int filters = 128;
  int blocks = 32;
  int block_kernel = 9;
  int stem_kernel = 3;
  int upsample_stages = 1;
  double residual_scaling = 0.1;

  int scale() const { return 1 << upsample_stages; }

  void validate() const {
    require(filters >= 1 && blocks >= 0, "edsr: filters must be >= 1 and blocks >= 0");
    require(block_kernel >= 1 && block_kernel % 2 == 1, "edsr: block_kernel must be odd");
    require(stem_kernel >= 1 && stem_kernel % 2 == 1, "edsr: stem_kernel must be odd");
    require(upsample_stages >= 1, "edsr: upsample_stages must be >= 1");
    require(residual_scaling > 0.0 && residual_scaling <= 1.0, "edsr: residual_scaling must lie in (0, 1]");
  }

  KeyValues to_kv() const {
    return {{"filters", std::to_string(filters)},
            {"blocks", std::to_string(blocks)},
            {"block_kernel", std::to_string(block_kernel)},
            {"stem_kernel", std::to_string(stem_kernel)},
            {"upsample_stages", std::to_string(upsample_stages)},
            {"residual_scaling", kv::fmt(residual_scaling)}};
  }

  static EdsrConfig from_kv(const KeyValues& values) {
    EdsrConfig c;
    const std::map<std::string, std::function<void(const std::string&)>> setters{
        {"filters", [&](const std::string& v) { c.filters = kv::to_int("filters", v); }},
        {"blocks", [&](const std::string& v) { c.blocks = kv::to_int("blocks", v); }},
        {"block_kernel", [&](const std::string& v) { c.block_kernel = kv::to_int("block_kernel", v); }},
        {"stem_kernel", [&](const std::string& v) { c.stem_kernel = kv::to_int("stem_kernel", v); }},
        {"upsample_stages", [&](const std::string& v) { c.upsample_stages = kv::to_int("upsample_stages", v); }},
        {"residual_scaling", [&](const std::string& v) { c.residual_scaling = kv::to_double("residual_scaling", v); }},
    };
    kv::apply(values, setters, "model");
    c.validate();
    return c;
  }
};

/// Pre-upsampling U-shaped network operating at the target rate.
struct UnetConfig {
  std::vector<int> down_filters{128, 256, 512, 512};
  std::vector<int> down_kernels{65, 33, 17, 9};
  int bottleneck_filters = 512;
  int bottleneck_kernel = 9;
  int final_kernel = 9;
  double dropout_rate = 0.5;
  double leaky_slope = 0.2;
  int scale = 2;  // upsampling ratio of the task; the network itself is length-preserving

  int depth() const { return static_cast<int>(down_filters.size()); }
  std::size_t length_divisor() const { return std::size_t{1} << depth(); }

  void validate() const {
    require(!down_filters.empty(), "unet: depth must be >= 1");
    require(down_filters.size() == down_kernels.size(), "unet: down_filters and down_kernels differ in length");
    for (int f : down_filters) require(f >= 1, "unet: filter counts must be >= 1");
    for (int k : down_kernels) require(k >= 1 && k % 2 == 1, "unet: kernels must be odd");
    require(bottleneck_filters >= 1, "unet: bottleneck_filters must be >= 1");
    require(bottleneck_kernel % 2 == 1 && final_kernel % 2 == 1, "unet: kernels must be odd");
    require(dropout_rate >= 0.0 && dropout_rate < 1.0, "unet: dropout_rate must lie in [0, 1)");
    require(scale >= 2, "unet: scale must be >= 2");
  }

  KeyValues to_kv() const {
    return {{"down_filters", kv::fmt(down_filters)},
            {"down_kernels", kv::fmt(down_kernels)},
            {"bottleneck_filters", std::to_string(bottleneck_filters)},
            {"bottleneck_kernel", std::to_string(bottleneck_kernel)},
            {"final_kernel", std::to_string(final_kernel)},
            {"dropout_rate", kv::fmt(dropout_rate)},
            {"leaky_slope", kv::fmt(leaky_slope)},
            {"scale", std::to_string(scale)}};
  }

  static UnetConfig from_kv(const KeyValues& values) {
    UnetConfig c;
    const std::map<std::string, std::function<void(const std::string&)>> setters{
        {"down_filters", [&](const std::string& v) { c.down_filters = kv::to_int_list("down_filters", v); }},
        {"down_kernels", [&](const std::string& v) { c.down_kernels = kv::to_int_list("down_kernels", v); }},
        {"bottleneck_filters", [&](const std::string& v) { c.bottleneck_filters = kv::to_int("bottleneck_filters", v); }},
        {"bottleneck_kernel", [&](const std::string& v) { c.bottleneck_kernel = kv::to_int("bottleneck_kernel", v); }},
        {"final_kernel", [&](const std::string& v) { c.final_kernel = kv::to_int("final_kernel", v); }},
        {"dropout_rate", [&](const std::string& v) { c.dropout_rate = kv::to_double("dropout_rate", v); }},
        {"leaky_slope", [&](const std::string& v) { c.leaky_slope = kv::to_double("leaky_slope", v); }},
        {"scale", [&](const std::string& v) { c.scale = kv::to_int("scale", v); }},
    };
    kv::apply(values, setters, "model");
    c.validate();
    return c;
  }
};

/// Scoring network: one real number per input signal.
struct CriticConfig {
  int layers = 6;
  int base_filters = 16;
  int kernel = 25;
  double leaky_slope = 0.2;
  int phase_shuffle_n = 2;

  void validate() const {
    require(layers >= 1, "critic: layers must be >= 1");
    require(base_filters >= 1, "critic: base_filters must be >= 1");
    require(kernel >= 1 && kernel % 2 == 1, "critic: kernel must be odd");
    require(phase_shuffle_n >= 0, "critic: phase_shuffle_n must be >= 0");
    require(layers < 24, "critic: too many layers");
  }

  KeyValues to_kv() const {
    return {{"layers", std::to_string(layers)},
            {"base_filters", std::to_string(base_filters)},
            {"kernel", std::to_string(kernel)},
            {"leaky_slope", kv::fmt(leaky_slope)},
            {"phase_shuffle_n", std::to_string(phase_shuffle_n)}};
  }

  static CriticConfig from_kv(const KeyValues& values) {
    CriticConfig c;
    const std::map<std::string, std::function<void(const std::string&)>> setters{
        {"layers", [&](const std::string& v) { c.layers = kv::to_int("layers", v); }},
        {"base_filters", [&](const std::string& v) { c.base_filters = kv::to_int("base_filters", v); }},
        {"kernel", [&](const std::string& v) { c.kernel = kv::to_int("kernel", v); }},
        {"leaky_slope", [&](const std::string& v) { c.leaky_slope = kv::to_double("leaky_slope", v); }},
        {"phase_shuffle_n", [&](const std::string& v) { c.phase_shuffle_n = kv::to_int("phase_shuffle_n", v); }},
    };
    kv::apply(values, setters, "model");
    c.validate();
    return c;
  }
};

using ModelConfig = std::variant<EdsrConfig, UnetConfig, CriticConfig>;

inline ModelKind kind_of(const ModelConfig& c) { return static_cast<ModelKind>(c.index()); }

inline KeyValues config_to_kv(const ModelConfig& c) {
  return std::visit([](const auto& cfg) { return cfg.to_kv(); }, c);
}

inline ModelConfig config_from_kv(ModelKind kind, const KeyValues& values) {
  switch (kind) {
    case ModelKind::edsr: return EdsrConfig::from_kv(values);
    case ModelKind::unet: return UnetConfig::from_kv(values);
    case ModelKind::critic: return CriticConfig::from_kv(values);
  }
  throw InvalidArgument("unknown model kind");
}

}  // namespace audiosr::models
