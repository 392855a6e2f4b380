#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

#include "audiosr/dsp/butterworth.hpp"
#include "audiosr/dsp/resample.hpp"
#include "audiosr/dsp/stft.hpp"
#include "audiosr/metrics/metrics.hpp"
#include "oracles.hpp"

using namespace audiosr;
using namespace audiosr::dsp;

namespace {

Signal sine(std::size_t n, double nyquist_ratio, int rate = 12000, double amp = 0.5, double phase = 0.3) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(std::numbers::pi * nyquist_ratio * i + phase);
  return {x, rate};
}

double tail_peak(const Signal& s, std::size_t skip) {
  double m = 0.0;
  for (std::size_t i = skip; i < s.size(); ++i) m = std::max(m, std::abs(s[i]));
  return m;
}

std::vector<std::array<double, 5>> rows(const BiquadCascade& c) {
  std::vector<std::array<double, 5>> r;
  for (const auto& s : c.sections) r.push_back({s.b0, s.b1, s.b2, s.a1, s.a2});
  return r;
}

}  // namespace

TEST(Butterworth, SectionCount) {
  EXPECT_EQ(design_butterworth_lowpass(8, 0.5).sections.size(), 4u);
  EXPECT_EQ(design_butterworth_lowpass(8, 0.5).order(), 8);
  EXPECT_EQ(design_butterworth_lowpass(2, 0.3).sections.size(), 1u);
}

TEST(Butterworth, Rejections) {
  EXPECT_THROW(design_butterworth_lowpass(7, 0.5), InvalidArgument);
  EXPECT_THROW(design_butterworth_lowpass(0, 0.5), InvalidArgument);
  EXPECT_THROW(design_butterworth_lowpass(8, 0.0), InvalidArgument);
  EXPECT_THROW(design_butterworth_lowpass(8, 1.0), InvalidArgument);
}

TEST(Butterworth, DcAndCutoffGain) {
  for (double fc : {0.1, 0.25, 0.5, 0.8}) {
    const auto c = design_butterworth_lowpass(8, fc);
    EXPECT_NEAR(20 * std::log10(oracle::cascade_magnitude(rows(c), 0.0)), 0.0, 1e-6);
    EXPECT_NEAR(20 * std::log10(oracle::cascade_magnitude(rows(c), std::numbers::pi * fc)), -3.0103, 0.05);
  }
}

TEST(Butterworth, MatchesAnalogPrototypeMagnitude) {
  // |H|^2 = 1 / (1 + (tan(w/2) / tan(wc/2))^(2N)) under the bilinear map
  const double fc = 0.5;
  const auto c = design_butterworth_lowpass(8, fc);
  for (int i = 1; i < 100; ++i) {
    const double w = std::numbers::pi * i / 100.0;
    const double ratio = std::tan(w / 2) / std::tan(std::numbers::pi * fc / 2);
    const double expect = 1.0 / std::sqrt(1.0 + std::pow(ratio, 16));
    EXPECT_NEAR(oracle::cascade_magnitude(rows(c), w), expect, 1e-9);
  }
}

TEST(Butterworth, StableAcrossOrdersAndCutoffs) {
  for (int order = 2; order <= 8; order += 2) {
    for (double fc = 0.05; fc <= 0.951; fc += 0.05) {
      for (const auto& s : design_butterworth_lowpass(order, fc).sections) EXPECT_LT(s.pole_radius(), 1.0);
    }
  }
}

TEST(Butterworth, MonotoneMagnitude) {
  const auto c = design_butterworth_lowpass(8, 0.5);
  double prev = c.magnitude(0.0);
  for (int i = 1; i < 512; ++i) {
    const double m = c.magnitude(i / 511.0);
    EXPECT_LE(m, prev + 1e-15);
    prev = m;
  }
}

TEST(ApplyFilter, ZeroInZeroOut) {
  const auto c = design_butterworth_lowpass(8, 0.5);
  const Signal out = apply_filter(c, Signal(std::vector<double>(100, 0.0), 8000));
  EXPECT_EQ(out.size(), 100u);
  EXPECT_EQ(out.sample_rate, 8000);
  for (double v : out.samples) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(apply_filter(c, Signal({}, 8000)), InvalidArgument);
}

TEST(ApplyFilter, SteadyStateSines) {
  const double fc = 0.25;
  const auto c = design_butterworth_lowpass(8, fc);
  const std::size_t skip = 2000;
  const Signal pass = apply_filter(c, sine(8000, 0.1 * fc, 12000, 1.0));
  EXPECT_GE(tail_peak(pass, skip), 0.999);
  EXPECT_NEAR(tail_peak(pass, skip), oracle::cascade_magnitude(rows(c), std::numbers::pi * 0.1 * fc), 2e-3);
  const Signal stop = apply_filter(c, sine(8000, 2 * fc, 12000, 1.0));
  EXPECT_LE(tail_peak(stop, skip), 0.01);
}

TEST(ApplyFilter, IsCausal) {
  const auto c = design_butterworth_lowpass(8, 0.3);
  std::vector<double> x(64, 0.0);
  x[20] = 1.0;
  const Signal y = apply_filter(c, Signal(x, 100));
  for (int i = 0; i < 20; ++i) EXPECT_EQ(y[i], 0.0);
  EXPECT_NE(y[20], 0.0);
}

TEST(Downsample, Contract) {
  const Signal d = downsample(sine(8192, 0.1), 2);
  EXPECT_EQ(d.size(), 4096u);
  EXPECT_EQ(d.sample_rate, 6000);
  EXPECT_EQ(downsample(sine(8193, 0.1), 4).size(), 2048u);
}

TEST(Downsample, Rejections) {
  EXPECT_THROW(downsample(sine(100, 0.1), 1), InvalidArgument);
  EXPECT_THROW(downsample(sine(100, 0.1, 16001), 2), InvalidArgument);
  EXPECT_THROW(downsample(sine(2, 0.1), 3), InvalidArgument);
}

TEST(Downsample, KeepsIndexZeroOfFiltered) {
  const Signal s = sine(1000, 0.2);
  const Signal f = apply_filter(design_butterworth_lowpass(8, 0.5), s);
  const Signal d = downsample(s, 2);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(d[i], f[2 * i]);
}

TEST(Downsample, PassbandAndStopband) {
  // ratios are with respect to the new Nyquist, i.e. half of the old one
  const Signal pass = downsample(sine(16000, 0.4 * 0.5, 12000, 1.0), 2);
  EXPECT_GE(tail_peak(pass, 1000), 0.98);
  const Signal stop = downsample(sine(16000, 1.5 * 0.5, 12000, 1.0), 2);
  EXPECT_LE(tail_peak(stop, 1000), 0.02);
}

TEST(Downsample, CascadeAgreesInEnvelope) {
  Rng rng(5);
  for (int trial = 0; trial < 3; ++trial) {
    const Signal s(oracle::bandlimited(rng, 32768, 0.2), 16000);
    const Signal twice = downsample(downsample(s, 2), 2);
    const Signal once = downsample(s, 4);
    SpectrogramParams p;
    p.frame_length = 1024;
    p.hop = 256;
    // skip the start-up transient of the filters
    const Signal a({twice.samples.begin() + 512, twice.samples.end()}, twice.sample_rate);
    const Signal b({once.samples.begin() + 512, once.samples.end()}, once.sample_rate);
    EXPECT_LE(metrics::lsd(a, b, p), 0.3);
  }
}

TEST(Spline, ReproducesConstantsAndRamps) {
  const Signal c = spline_upsample(Signal(std::vector<double>(10, 0.7), 100), 3);
  EXPECT_EQ(c.size(), 30u);
  EXPECT_EQ(c.sample_rate, 300);
  for (double v : c.samples) EXPECT_NEAR(v, 0.7, 1e-12);
  std::vector<double> ramp(12);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 0.1 * i - 0.4;
  const Signal r = spline_upsample(Signal(ramp, 100), 4);
  for (std::size_t j = 0; j < r.size(); ++j) EXPECT_NEAR(r[j], 0.1 * (j / 4.0) - 0.4, 1e-12);
}

TEST(Spline, OnGridValuesExact) {
  Rng rng(2);
  const Signal s(oracle::bandlimited(rng, 50, 0.5), 100);
  const Signal u = spline_upsample(s, 2);
  for (std::size_t k = 0; k < s.size(); ++k) EXPECT_EQ(u[2 * k], s[k]);
}

TEST(Spline, NaturalSplineOracle) {
  // dense solve of the natural-spline system, then direct evaluation of the cubic
  Rng rng(3);
  const std::size_t n = 9;
  std::vector<double> y(n);
  for (double& v : y) v = rng.uniform(-1, 1);
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  a[0][0] = 1;
  a[n - 1][n - 1] = 1;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    a[i][i - 1] = 1;
    a[i][i] = 4;
    a[i][i + 1] = 1;
    a[i][n] = 6 * (y[i + 1] - 2 * y[i] + y[i - 1]);
  }
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> m(n);
  for (std::size_t r = n; r-- > 0;) {
    double acc = a[r][n];
    for (std::size_t k = r + 1; k < n; ++k) acc -= a[r][k] * m[k];
    m[r] = acc / a[r][r];
  }
  const Signal u = spline_upsample(Signal(y, 10), 4);
  for (std::size_t j = 0; j < 4 * (n - 1); ++j) {
    const std::size_t i = j / 4;
    const double t = (j % 4) / 4.0;
    const double expect = (1 - t) * y[i] + t * y[i + 1] +
                          ((std::pow(1 - t, 3) - (1 - t)) * m[i] + (std::pow(t, 3) - t) * m[i + 1]) / 6.0;
    EXPECT_NEAR(u[j], expect, 1e-12);
  }
}

TEST(Spline, Linearity) {
  Rng rng(4);
  const Signal x(oracle::bandlimited(rng, 40, 0.8), 100);
  const Signal y(oracle::bandlimited(rng, 40, 0.8), 100);
  std::vector<double> mix(40);
  for (std::size_t i = 0; i < 40; ++i) mix[i] = 1.7 * x[i] - 0.3 * y[i];
  const Signal ux = spline_upsample(x, 3), uy = spline_upsample(y, 3), um = spline_upsample(Signal(mix, 100), 3);
  for (std::size_t j = 0; j < um.size(); ++j) EXPECT_NEAR(um[j], 1.7 * ux[j] - 0.3 * uy[j], 1e-9);
}

TEST(Spline, Rejections) {
  EXPECT_THROW(spline_upsample(Signal({1, 2, 3}, 10), 2), InvalidArgument);
  EXPECT_THROW(spline_upsample(Signal({1, 2, 3, 4}, 10), 1), InvalidArgument);
}

TEST(Stft, FrameCountAndFloor) {
  SpectrogramParams p;
  const auto spec = stft_power(Signal(std::vector<double>(4096, 0.0), 16000), p);
  EXPECT_EQ(spec.frames, 5u);
  EXPECT_EQ(spec.bins, 1025u);
  for (double v : spec.grid) EXPECT_EQ(v, p.power_floor);
  EXPECT_DOUBLE_EQ(spec.frame_times[0], 1024.0 / 16000);
  EXPECT_DOUBLE_EQ(spec.bin_freqs[1], 16000.0 / 2048);
}

TEST(Stft, Rejections) {
  SpectrogramParams p;
  EXPECT_THROW(stft_power(Signal(std::vector<double>(2047, 0.0), 16000), p), InvalidArgument);
  p.hop = 0;
  EXPECT_THROW(stft_power(Signal(std::vector<double>(4096, 0.0), 16000), p), InvalidArgument);
  p.hop = 4096;
  EXPECT_THROW(p.validate(), InvalidArgument);
  SpectrogramParams q;
  q.power_floor = 0;
  EXPECT_THROW(q.validate(), InvalidArgument);
  EXPECT_THROW(parse_window("hamming"), InvalidArgument);
}

TEST(Stft, MatchesDirectDft) {
  Rng rng(6);
  SpectrogramParams p;
  p.frame_length = 64;
  p.hop = 16;
  for (Window w : {Window::hann, Window::rectangular}) {
    p.window = w;
    const Signal s(oracle::bandlimited(rng, 200, 0.9), 1000);
    const auto spec = stft_power(s, p);
    for (std::size_t f = 0; f < spec.frames; ++f) {
      std::vector<double> frame(s.samples.begin() + f * p.hop, s.samples.begin() + f * p.hop + p.frame_length);
      const auto ref = oracle::dft_power(frame, w == Window::hann);
      for (std::size_t k = 0; k < spec.bins; ++k) {
        EXPECT_NEAR(spec.at(f, k), std::max(ref[k], p.power_floor), 1e-10 * (1 + ref[k]));
      }
    }
  }
}

TEST(Stft, BinSineArgmax) {
  SpectrogramParams p;
  const int rate = 16000;
  for (std::size_t b : {10u, 100u, 517u}) {
    std::vector<double> x(6000);
    const double f = b * static_cast<double>(rate) / p.frame_length;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2 * std::numbers::pi * f * i / rate);
    const auto spec = stft_power(Signal(x, rate), p);
    EXPECT_DOUBLE_EQ(spec.bin_freqs[b], f);
    for (std::size_t w = 0; w < spec.frames; ++w) {
      std::size_t arg = 0;
      for (std::size_t k = 1; k < spec.bins; ++k)
        if (spec.at(w, k) > spec.at(w, arg)) arg = k;
      EXPECT_EQ(arg, b);
    }
  }
}

TEST(Stft, PureFunction) {
  Rng rng(8);
  const Signal s(oracle::bandlimited(rng, 5000, 0.5), 16000);
  EXPECT_EQ(stft_power(s, {}).grid, stft_power(s, {}).grid);
}
