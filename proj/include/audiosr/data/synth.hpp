#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "audiosr/dsp/signal.hpp"
#include "audiosr/error.hpp"
#include "audiosr/rng.hpp"

namespace audiosr::data {

enum class SynthKind { sine, chirp, noise_mix };

inline std::string to_string(SynthKind k) {
  switch (k) {
    case SynthKind::sine: return "sine";
    case SynthKind::chirp: return "chirp";
    case SynthKind::noise_mix: return "noise-mix";
  }
  return "?";
}

inline SynthKind parse_synth_kind(const std::string& s) {
  if (s == "sine") return SynthKind::sine;
  if (s == "chirp") return SynthKind::chirp;
  if (s == "noise-mix") return SynthKind::noise_mix;
  throw InvalidArgument("unknown synth kind '" + s + "'");
}

/// Description of a seeded synthetic corpus. Items cycle through `kinds`.
struct SynthSpec {
  std::size_t count = 200;
  std::size_t length = 8192;
  int sample_rate = 12000;
  int min_components = 1;
  int max_components = 4;
  double min_freq = 50.0;
  double max_freq = 2800.0;
  double min_amplitude = 0.2;
  double max_amplitude = 0.8;
  double noise_level = 0.01;  // peak of the uniform noise in noise-mix items, relative to the item peak
  double noise_floor = 0.0;   // same, added to every item whatever its kind
  std::vector<SynthKind> kinds{SynthKind::sine, SynthKind::chirp};

  void validate() const {
    require(count >= 1 && length >= 2, "synth: count and length must be positive");
    require(sample_rate > 0, "synth: sample_rate must be positive");
    require(min_components >= 1 && min_components <= max_components, "synth: bad component range");
    require(min_freq > 0.0 && min_freq <= max_freq, "synth: bad frequency range");
    require(max_freq < sample_rate / 2.0, "synth: max_freq " + std::to_string(max_freq) +
                                              " Hz is not below Nyquist (" + std::to_string(sample_rate / 2.0) +
                                              " Hz)");
    require(min_amplitude > 0.0 && min_amplitude <= max_amplitude && max_amplitude <= 1.0,
            "synth: amplitudes must satisfy 0 < min <= max <= 1");
    require(noise_level >= 0.0 && noise_level < 1.0, "synth: noise_level must lie in [0, 1)");
    require(noise_floor >= 0.0 && noise_floor < 1.0, "synth: noise_floor must lie in [0, 1)");
    require(!kinds.empty(), "synth: no kinds");
  }
};

/// Sums of sinusoids (fixed or linearly swept frequency) with random
/// weights and phases, rescaled so the item peak equals a drawn amplitude.
inline std::vector<dsp::Signal> synth_signals(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const double rate = spec.sample_rate;
  const double dur = static_cast<double>(spec.length) / rate;
  std::vector<dsp::Signal> out;
  out.reserve(spec.count);
  for (std::size_t item = 0; item < spec.count; ++item) {
    const SynthKind kind = spec.kinds[item % spec.kinds.size()];
    const int comps = static_cast<int>(rng.uniform_int(spec.min_components, spec.max_components));
    std::vector<double> x(spec.length, 0.0);
    for (int c = 0; c < comps; ++c) {
      const double f0 = rng.uniform(spec.min_freq, spec.max_freq);
      const double f1 = kind == SynthKind::chirp ? rng.uniform(spec.min_freq, spec.max_freq) : f0;
      const double w = rng.uniform(0.3, 1.0);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double sweep = (f1 - f0) / (2.0 * dur);
      for (std::size_t i = 0; i < spec.length; ++i) {
        const double t = static_cast<double>(i) / rate;
        x[i] += w * std::sin(2.0 * std::numbers::pi * (f0 * t + sweep * t * t) + phase);
      }
    }
    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    const double noise = (kind == SynthKind::noise_mix ? spec.noise_level : 0.0) + spec.noise_floor;
    if (noise > 0.0) {
      for (double& v : x) v += noise * peak * rng.uniform(-1.0, 1.0);
      peak = 0.0;
      for (double v : x) peak = std::max(peak, std::abs(v));
    }
    const double amp = rng.uniform(spec.min_amplitude, spec.max_amplitude);
    if (peak > 0.0)
      for (double& v : x) v *= amp / peak;
    out.emplace_back(std::move(x), spec.sample_rate);
  }
  return out;
}

}  // namespace audiosr::data
