#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "audiosr/dsp/signal.hpp"

namespace audiosr::dsp {

enum class Window { hann, rectangular };

inline std::string to_string(Window w) { return w == Window::hann ? "hann" : "rectangular"; }

inline Window parse_window(const std::string& s) {
  if (s == "hann") return Window::hann;
  if (s == "rectangular") return Window::rectangular;
  throw InvalidArgument("unknown window '" + s + "'");
}

struct SpectrogramParams {
  std::size_t frame_length = 2048;
  std::size_t hop = 512;
  Window window = Window::hann;
  double power_floor = 1e-10;

  std::size_t bins() const { return frame_length / 2 + 1; }

  void validate() const {
    require(frame_length >= 2, "stft: frame_length must be >= 2");
    require(hop > 0 && hop <= frame_length, "stft: need 0 < hop <= frame_length");
    require(power_floor > 0.0, "stft: power_floor must be positive");
  }

  /// Single-line description embedded in metric reports.
  std::string describe() const {
    std::ostringstream os;
    os << "frame_length=" << frame_length << " hop=" << hop << " window=" << to_string(window)
       << " power_floor=" << power_floor;
    return os.str();
  }
};

/// W x K grid of clamped power values, row-major by frame.
struct PowerSpectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> grid;
  std::vector<double> frame_times;  // frame centers, seconds
  std::vector<double> bin_freqs;    // Hz

  double at(std::size_t w, std::size_t k) const { return grid[w * bins + k]; }
  double& at(std::size_t w, std::size_t k) { return grid[w * bins + k]; }
};

inline std::vector<double> make_window(Window kind, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (kind == Window::hann) {
    // periodic Hann
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    }
  }
  return w;
}

inline std::size_t frame_count(std::size_t length, const SpectrogramParams& p) {
  return length < p.frame_length ? 0 : 1 + (length - p.frame_length) / p.hop;
}

inline PowerSpectrogram stft_power(const Signal& s, const SpectrogramParams& p) {
  p.validate();
  require(s.sample_rate > 0, "stft: sample_rate must be positive");
  require(s.size() >= p.frame_length, "stft: signal shorter than one frame (" + std::to_string(s.size()) +
                                          " < " + std::to_string(p.frame_length) + ")");
  const std::size_t n = p.frame_length;
  const auto window = make_window(p.window, n);

  PowerSpectrogram out;
  out.frames = frame_count(s.size(), p);
  out.bins = p.bins();
  out.grid.resize(out.frames * out.bins);
  out.frame_times.resize(out.frames);
  out.bin_freqs.resize(out.bins);
  for (std::size_t k = 0; k < out.bins; ++k) {
    out.bin_freqs[k] = static_cast<double>(k) * s.sample_rate / static_cast<double>(n);
  }

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(n);
  std::vector<std::complex<double>> spectrum;
  for (std::size_t w = 0; w < out.frames; ++w) {
    const std::size_t start = w * p.hop;
    for (std::size_t i = 0; i < n; ++i) frame[i] = s.samples[start + i] * window[i];
    fft.fwd(spectrum, frame);
    for (std::size_t k = 0; k < out.bins; ++k) {
      out.at(w, k) = std::max(std::norm(spectrum[k]), p.power_floor);
    }
    out.frame_times[w] = (static_cast<double>(start) + static_cast<double>(n) / 2.0) / s.sample_rate;
  }
  return out;
}

}  // namespace audiosr::dsp
