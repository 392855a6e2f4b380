#pragma once

#include "audiosr/dsp/resample.hpp"
#include "audiosr/dsp/signal.hpp"
#include "audiosr/models/model.hpp"

namespace audiosr::models {

/// Upsampling ratio a generator was built for.
inline int model_scale(const Model& m) {
  switch (m.kind()) {
    case ModelKind::edsr: return m.config_as<EdsrConfig>().scale();
    case ModelKind::unet: return m.config_as<UnetConfig>().scale;
    case ModelKind::critic: break;
  }
  throw InvalidArgument("a critic is not a generator");
}

/// Reconstructs a high-rate signal from `low` with a trained generator.
/// EDSR consumes the low-rate samples directly; UNet refines a spline
/// estimate, zero-padded to its length divisor and cropped afterwards.
inline dsp::Signal reconstruct(const Model& m, const dsp::Signal& low, int scale) {
  dsp::validate(low, "reconstruct input");
  require(scale == model_scale(m), "reconstruct: model was built for scale " + std::to_string(model_scale(m)) +
                                       ", asked for " + std::to_string(scale));
  dg::NoGradGuard no_grad;
  dsp::Signal out;
  out.sample_rate = low.sample_rate * scale;
  if (m.kind() == ModelKind::edsr) {
    const dg::Tensor x({1, 1, low.size()}, low.samples);
    out.samples = m.forward(x).values();
    return out;
  }
  const dsp::Signal coarse = dsp::spline_upsample(low, scale);
  const std::size_t div = m.config_as<UnetConfig>().length_divisor();
  const std::size_t padded = (coarse.size() + div - 1) / div * div;
  std::vector<double> buf(coarse.samples);
  buf.resize(padded, 0.0);
  const dg::Tensor y = m.forward(dg::Tensor({1, 1, padded}, std::move(buf)));
  out.samples.assign(y.values().begin(), y.values().begin() + static_cast<std::ptrdiff_t>(coarse.size()));
  return out;
}

}  // namespace audiosr::models
