#pragma once

#include <vector>

#include "audiosr/dsp/butterworth.hpp"
#include "audiosr/dsp/signal.hpp"

namespace audiosr::dsp {

/// Order of the anti-alias filter applied before decimation.
inline constexpr int kAntiAliasOrder = 8;

/// Simulates recording at a lower rate: order-8 Butterworth low-pass with the
/// cutoff at the target Nyquist, then keep every `factor`-th sample starting
/// at index 0.
inline Signal downsample(const Signal& s, int factor) {
  require(factor >= 2, "downsample: factor must be >= 2");
  require(s.size() >= static_cast<std::size_t>(factor), "downsample: signal shorter than factor");
  require(s.sample_rate % factor == 0, "downsample: sample_rate " + std::to_string(s.sample_rate) +
                                           " not divisible by factor " + std::to_string(factor));
  const auto filtered = apply_filter(design_butterworth_lowpass(kAntiAliasOrder, 1.0 / factor), s);
  Signal out;
  out.sample_rate = s.sample_rate / factor;
  const std::size_t n = s.size() / factor;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = filtered.samples[i * factor];
  return out;
}

/// Natural cubic spline through (k, s[k]) sampled at t = j / factor.
/// Points past the last knot extend the final segment's cubic.
inline Signal spline_upsample(const Signal& s, int factor) {
  require(factor >= 2, "spline_upsample: factor must be >= 2");
  require(s.size() >= 4, "spline_upsample: need at least 4 samples");
  const std::size_t n = s.size();
  const auto& y = s.samples;

  // Second derivatives with M[0] = M[n-1] = 0; Thomas algorithm on the
  // unit-spacing system M[i-1] + 4 M[i] + M[i+1] = 6 (y[i+1] - 2 y[i] + y[i-1]).
  std::vector<double> m(n, 0.0);
  const std::size_t inner = n - 2;
  std::vector<double> c(inner), d(inner);
  for (std::size_t i = 0; i < inner; ++i) {
    const double rhs = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]);
    if (i == 0) {
      c[i] = 1.0 / 4.0;
      d[i] = rhs / 4.0;
    } else {
      const double denom = 4.0 - c[i - 1];
      c[i] = 1.0 / denom;
      d[i] = (rhs - d[i - 1]) / denom;
    }
  }
  for (std::size_t i = inner; i-- > 0;) {
    m[i + 1] = d[i] - (i + 1 < inner ? c[i] * m[i + 2] : 0.0);
  }

  Signal out;
  out.sample_rate = s.sample_rate * factor;
  out.samples.resize(n * factor);
  for (std::size_t j = 0; j < out.samples.size(); ++j) {
    if (j % factor == 0) {
      out.samples[j] = y[j / factor];
      continue;
    }
    const double t = static_cast<double>(j) / factor;
    const std::size_t seg = std::min(j / factor, n - 2);
    const double u = t - static_cast<double>(seg);  // may exceed 1 past the last knot
    const double v = 1.0 - u;
    out.samples[j] = m[seg] * v * v * v / 6.0 + m[seg + 1] * u * u * u / 6.0 +
                     (y[seg] - m[seg] / 6.0) * v + (y[seg + 1] - m[seg + 1] / 6.0) * u;
  }
  return out;
}

}  // namespace audiosr::dsp
