#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "audiosr/dsp/stft.hpp"
#include "audiosr/models/inference.hpp"
#include "audiosr/models/model.hpp"

namespace audiosr::probe {

struct Peak {
  double freq_hz = 0.0;
  double power_db = 0.0;       // time-mean power of the bin
  double prominence_db = 0.0;  // excess over the median bin
};

struct ProbeOptions {
  std::size_t length = std::size_t{1} << 14;  // at the output rate
  int sample_rate = 12000;                    // output rate, used for axes only
  dsp::SpectrogramParams stft;
  double threshold_db = 20.0;
  std::size_t edge = 0;        // edge window in samples; 0: length / 8
  std::size_t max_period = 0;  // longest period searched; 0: length / 4

  std::size_t edge_window() const { return edge ? edge : length / 8; }

  void validate() const {
    stft.validate();
    require(length >= stft.frame_length, "probe: length " + std::to_string(length) +
                                             " is shorter than one STFT frame (" + std::to_string(stft.frame_length) +
                                             ")");
    require(sample_rate > 0, "probe: sample_rate must be positive");
    require(2 * edge_window() < length, "probe: edge windows cover the whole signal");
  }
};

struct ArtifactReport {
  std::string model_id;
  std::size_t probe_length = 0;
  int sample_rate = 0;
  dsp::PowerSpectrogram spectrogram;
  double threshold_db = 0.0;
  double median_db = 0.0;
  std::vector<Peak> peaks;              // by descending prominence
  std::optional<std::size_t> period;    // exact period of the interior, if any
  double energy = 0.0;                  // sum of squared output samples
  double head_power = 0.0;              // mean square of the first edge window
  double tail_power = 0.0;              // mean square of the last edge window
  double interior_power = 0.0;          // mean square between them
  std::size_t edge_window = 0;
};

inline double to_db(double power) {
  return power > 0.0 ? 10.0 * std::log10(power) : -std::numeric_limits<double>::infinity();
}

/// Smallest p in [1, max_period] with x[t] == x[t + p] exactly for every t in
/// [margin, len - margin - p). Edges are excluded because zero padding breaks
/// periodicity there.
inline std::optional<std::size_t> exact_period(const std::vector<double>& x, std::size_t margin,
                                               std::size_t max_period) {
  if (x.size() <= 2 * margin) return std::nullopt;
  const std::size_t lo = margin, hi = x.size() - margin;
  for (std::size_t p = 1; p <= max_period && lo + p < hi; ++p) {
    bool ok = true;
    for (std::size_t t = lo; t + p < hi && ok; ++t) ok = x[t] == x[t + p];
    if (ok) return p;
  }
  return std::nullopt;
}

/// Tonal peaks: local maxima of the time-mean power whose level exceeds the
/// median bin by at least `threshold_db`.
inline std::vector<Peak> find_peaks(const dsp::PowerSpectrogram& sp, double threshold_db, double* median_db = nullptr) {
  require(sp.frames > 0 && sp.bins > 0, "find_peaks: empty spectrogram");
  std::vector<double> db(sp.bins);
  for (std::size_t k = 0; k < sp.bins; ++k) {
    double s = 0.0;
    for (std::size_t w = 0; w < sp.frames; ++w) s += sp.at(w, k);
    db[k] = to_db(s / static_cast<double>(sp.frames));
  }
  std::vector<double> sorted = db;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
  const double median = sorted[sorted.size() / 2];
  if (median_db) *median_db = median;
  std::vector<Peak> peaks;
  for (std::size_t k = 0; k < sp.bins; ++k) {
    const bool left = k == 0 || db[k] >= db[k - 1];
    const bool right = k + 1 == sp.bins || db[k] > db[k + 1];
    if (left && right && db[k] - median >= threshold_db) peaks.push_back({sp.bin_freqs[k], db[k], db[k] - median});
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.prominence_db > b.prominence_db; });
  return peaks;
}

/// Analyses an output signal the way zero_input_probe does.
inline ArtifactReport analyse_output(const std::vector<double>& y, const ProbeOptions& opt,
                                     const std::string& model_id = "") {
  opt.validate();
  require(y.size() == opt.length, "probe: output length differs from the probe length");
  ArtifactReport r;
  r.model_id = model_id;
  r.probe_length = opt.length;
  r.sample_rate = opt.sample_rate;
  r.threshold_db = opt.threshold_db;
  r.edge_window = opt.edge_window();
  r.spectrogram = dsp::stft_power(dsp::Signal(y, opt.sample_rate), opt.stft);
  r.peaks = find_peaks(r.spectrogram, opt.threshold_db, &r.median_db);
  r.period = exact_period(y, r.edge_window, opt.max_period ? opt.max_period : opt.length / 4);

  auto mean_square = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t i = a; i < b; ++i) s += y[i] * y[i];
    return s / static_cast<double>(b - a);
  };
  for (double v : y) r.energy += v * v;
  r.head_power = mean_square(0, r.edge_window);
  r.tail_power = mean_square(y.size() - r.edge_window, y.size());
  r.interior_power = mean_square(r.edge_window, y.size() - r.edge_window);
  return r;
}

/// Forwards an all-zero signal through a generator in eval mode and reports
/// what comes out. The input is at the low rate for post-upsampling models.
inline ArtifactReport zero_input_probe(const models::Model& m, const ProbeOptions& opt = {},
                                       const std::string& model_id = "") {
  opt.validate();
  const int scale = models::model_scale(m);
  std::size_t in_len = opt.length;
  if (m.kind() == models::ModelKind::edsr) {
    require(opt.length % static_cast<std::size_t>(scale) == 0,
            "probe: length " + std::to_string(opt.length) + " is not divisible by the model scale " +
                std::to_string(scale));
    in_len = opt.length / static_cast<std::size_t>(scale);
  } else {
    const std::size_t d = m.config_as<models::UnetConfig>().length_divisor();
    require(opt.length % d == 0,
            "probe: length " + std::to_string(opt.length) + " must be divisible by " + std::to_string(d));
  }
  dg::Tensor y;
  {
    dg::NoGradGuard ng;
    y = m.forward(dg::Tensor::zeros({1, 1, in_len}));
  }
  return analyse_output(y.values(), opt, model_id);
}

enum class ImageFormat { csv, pgm };

inline ImageFormat parse_image_format(const std::string& s) {
  if (s == "csv") return ImageFormat::csv;
  if (s == "pgm") return ImageFormat::pgm;
  throw InvalidArgument("unknown spectrogram format '" + s + "' (expected csv or pgm)");
}

/// Header "time_s,<bin freqs>" then one row per frame of dB values.
inline void write_spectrogram_csv(const dsp::PowerSpectrogram& sp, std::ostream& os) {
  os << "time_s";
  for (double f : sp.bin_freqs) os << ',' << f;
  os << '\n' << std::setprecision(10);
  for (std::size_t w = 0; w < sp.frames; ++w) {
    os << sp.frame_times[w];
    for (std::size_t k = 0; k < sp.bins; ++k) os << ',' << to_db(sp.at(w, k));
    os << '\n';
  }
}

/// Binary greymap, time left to right and frequency bottom to top; dB values
/// are mapped linearly from [floor_db, ceiling_db] onto 0..255.
inline void write_spectrogram_pgm(const dsp::PowerSpectrogram& sp, std::ostream& os, double floor_db,
                                  double ceiling_db) {
  require(ceiling_db > floor_db, "spectrogram export: ceiling must lie above floor");
  os << "P5\n" << sp.frames << ' ' << sp.bins << "\n255\n";
  std::vector<char> row(sp.frames);
  for (std::size_t k = sp.bins; k-- > 0;) {
    for (std::size_t w = 0; w < sp.frames; ++w) {
      const double u = std::clamp((to_db(sp.at(w, k)) - floor_db) / (ceiling_db - floor_db), 0.0, 1.0);
      row[w] = static_cast<char>(static_cast<unsigned char>(std::lround(u * 255.0)));
    }
    os.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
}

inline void export_spectrogram(const dsp::PowerSpectrogram& sp, const std::string& path, ImageFormat format,
                               double floor_db = -100.0, double ceiling_db = 60.0) {
  if (format == ImageFormat::pgm) require(ceiling_db > floor_db, "spectrogram export: ceiling must lie above floor");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  if (format == ImageFormat::csv)
    write_spectrogram_csv(sp, f);
  else
    write_spectrogram_pgm(sp, f, floor_db, ceiling_db);
  if (!f) throw DataError("write to '" + path + "' failed");
}

/// key: value lines, then a tab-separated peak table.
inline void write_report(const ArtifactReport& r, std::ostream& os) {
  os << std::setprecision(10);
  os << "model_id: " << (r.model_id.empty() ? "-" : r.model_id) << '\n';
  os << "probe_length: " << r.probe_length << '\n';
  os << "sample_rate: " << r.sample_rate << '\n';
  os << "frames: " << r.spectrogram.frames << '\n';
  os << "bins: " << r.spectrogram.bins << '\n';
  os << "energy: " << r.energy << '\n';
  os << "period: " << (r.period ? std::to_string(*r.period) : "none") << '\n';
  os << "edge_window: " << r.edge_window << '\n';
  os << "head_power_db: " << to_db(r.head_power) << '\n';
  os << "interior_power_db: " << to_db(r.interior_power) << '\n';
  os << "tail_power_db: " << to_db(r.tail_power) << '\n';
  os << "median_db: " << r.median_db << '\n';
  os << "threshold_db: " << r.threshold_db << '\n';
  os << "peaks: " << r.peaks.size() << '\n';
  os << "freq_hz\tpower_db\tprominence_db\n";
  for (const auto& p : r.peaks) os << p.freq_hz << '\t' << p.power_db << '\t' << p.prominence_db << '\n';
}

inline void write_report(const ArtifactReport& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  write_report(r, f);
  if (!f) throw DataError("write to '" + path + "' failed");
}

}  // namespace audiosr::probe
