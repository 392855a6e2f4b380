#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "audiosr/error.hpp"

namespace audiosr::dsp {

/// Mono amplitude sequence sampled at an integer rate in Hz.
struct Signal {
  std::vector<double> samples;
  int sample_rate = 0;

  Signal() = default;
  Signal(std::vector<double> s, int rate) : samples(std::move(s)), sample_rate(rate) {}

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
  double operator[](std::size_t i) const { return samples[i]; }
};

/// Throws InvalidArgument unless the rate is positive and every sample is finite.
inline void validate(const Signal& s, const std::string& what = "signal") {
  require(s.sample_rate > 0, what + ": sample_rate must be positive");
  for (double v : s.samples) {
    if (!std::isfinite(v)) throw InvalidArgument(what + ": non-finite sample");
  }
}

}  // namespace audiosr::dsp
