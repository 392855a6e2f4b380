#pragma once

#include <vector>

#include "audiosr/dsp/signal.hpp"
#include "audiosr/error.hpp"

namespace audiosr::data {

/// Windows of `length` samples at offsets 0, stride, 2*stride, ...; a
/// trailing partial window is dropped. Returns nothing when the signal is
/// shorter than one window.
inline std::vector<dsp::Signal> extract_patches(const dsp::Signal& s, std::size_t length, std::size_t stride) {
  require(length >= 1, "extract_patches: length must be >= 1");
  require(stride >= 1, "extract_patches: stride must be >= 1");
  std::vector<dsp::Signal> out;
  if (s.size() < length) return out;
  const std::size_t count = 1 + (s.size() - length) / stride;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto first = s.samples.begin() + static_cast<std::ptrdiff_t>(i * stride);
    out.emplace_back(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(length)), s.sample_rate);
  }
  return out;
}

}  // namespace audiosr::data
