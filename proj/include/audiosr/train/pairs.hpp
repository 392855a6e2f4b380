#pragma once

#include <string>

#include "audiosr/dsp/resample.hpp"
#include "audiosr/models/config.hpp"

namespace audiosr::train {

/// pre: the network sees a spline-upsampled input at the target rate.
/// post: the network sees the low-rate signal and upsamples internally.
enum class Mode { pre, post };

inline std::string to_string(Mode m) { return m == Mode::pre ? "pre" : "post"; }

inline Mode parse_mode(const std::string& s) {
  if (s == "pre") return Mode::pre;
  if (s == "post") return Mode::post;
  throw InvalidArgument("unknown mode '" + s + "' (expected pre or post)");
}

/// The mode a generator kind trains in.
inline Mode mode_for(models::ModelKind k) {
  switch (k) {
    case models::ModelKind::edsr: return Mode::post;
    case models::ModelKind::unet: return Mode::pre;
    case models::ModelKind::critic: break;
  }
  throw InvalidArgument("a critic has no training mode");
}

/// Scales each generator family supports: powers of two for EDSR, any
/// integer >= 2 for the pre-upsampling network.
inline void validate_scale(models::ModelKind k, int scale) {
  require(scale >= 2, "scale must be >= 2, got " + std::to_string(scale));
  if (k == models::ModelKind::edsr) {
    require((scale & (scale - 1)) == 0,
            "edsr supports power-of-two scales only, got " + std::to_string(scale));
  }
}

struct Pair {
  dsp::Signal input;
  dsp::Signal target;
};

inline Pair make_pair(const dsp::Signal& x, int scale, Mode mode) {
  require(scale >= 2, "make_pair: scale must be >= 2");
  require(x.size() % static_cast<std::size_t>(scale) == 0,
          "make_pair: length " + std::to_string(x.size()) + " not divisible by scale " + std::to_string(scale));
  dsp::Signal low = dsp::downsample(x, scale);
  if (mode == Mode::pre) return {dsp::spline_upsample(low, scale), x};
  return {std::move(low), x};
}

}  // namespace audiosr::train
