#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "audiosr/dsp/signal.hpp"
#include "audiosr/error.hpp"

namespace audiosr::dsp {

/// One second-order section, normalized so that a0 = 1:
///   H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;

  std::complex<double> response(double omega) const {
    const std::complex<double> z1 = std::polar(1.0, -omega);
    const std::complex<double> z2 = z1 * z1;
    return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
  }

  /// Largest pole modulus; the section is stable when this is < 1.
  double pole_radius() const {
    const std::complex<double> disc = std::sqrt(std::complex<double>(a1 * a1 - 4.0 * a2));
    const auto p1 = (-a1 + disc) / 2.0;
    const auto p2 = (-a1 - disc) / 2.0;
    return std::max(std::abs(p1), std::abs(p2));
  }
};

struct BiquadCascade {
  std::vector<Biquad> sections;

  int order() const { return 2 * static_cast<int>(sections.size()); }

  /// Complex response at normalized angular frequency omega in [0, pi].
  std::complex<double> response(double omega) const {
    std::complex<double> h = 1.0;
    for (const auto& s : sections) h *= s.response(omega);
    return h;
  }

  /// |H| at a frequency given as a fraction of Nyquist.
  double magnitude(double nyquist_ratio) const {
    return std::abs(response(std::numbers::pi * nyquist_ratio));
  }

  double gain_db(double nyquist_ratio) const { return 20.0 * std::log10(magnitude(nyquist_ratio)); }
};

/// Digital Butterworth low-pass of even `order`, cutoff given as a fraction
/// of Nyquist. Analog prototype poles are paired into biquads and mapped by
/// the bilinear transform with the cutoff pre-warped, so the -3 dB point
/// lands exactly on `cutoff_ratio`.
inline BiquadCascade design_butterworth_lowpass(int order, double cutoff_ratio) {
  require(order > 0 && order % 2 == 0, "butterworth: order must be a positive even integer");
  require(cutoff_ratio > 0.0 && cutoff_ratio < 1.0, "butterworth: cutoff_ratio must lie in (0, 1)");

  const double k = std::tan(std::numbers::pi * cutoff_ratio / 2.0);
  const double k2 = k * k;
  BiquadCascade cascade;
  const int pairs = order / 2;
  for (int i = 0; i < pairs; ++i) {
    // left-half-plane pole angle of the normalized analog prototype
    const double theta = std::numbers::pi * (2.0 * i + order + 1) / (2.0 * order);
    const double q = -1.0 / (2.0 * std::cos(theta));
    const double norm = 1.0 / (1.0 + k / q + k2);
    Biquad s;
    s.b0 = k2 * norm;
    s.b1 = 2.0 * s.b0;
    s.b2 = s.b0;
    s.a1 = 2.0 * (k2 - 1.0) * norm;
    s.a2 = (1.0 - k / q + k2) * norm;
    cascade.sections.push_back(s);
  }
  return cascade;
}

/// Causal single-pass filtering, transposed direct form II per section.
inline Signal apply_filter(const BiquadCascade& cascade, const Signal& s) {
  require(!s.empty(), "apply_filter: empty signal");
  Signal out = s;
  for (const auto& sec : cascade.sections) {
    double z1 = 0.0, z2 = 0.0;
    for (double& v : out.samples) {
      const double x = v;
      const double y = sec.b0 * x + z1;
      z1 = sec.b1 * x - sec.a1 * y + z2;
      z2 = sec.b2 * x - sec.a2 * y;
      v = y;
    }
  }
  return out;
}

}  // namespace audiosr::dsp
