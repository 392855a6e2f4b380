#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "audiosr/dsp/signal.hpp"
#include "audiosr/dsp/stft.hpp"

namespace audiosr::metrics {

/// Returned by snr() when the reconstruction is exact.
inline constexpr double kSnrInfinite = std::numeric_limits<double>::infinity();

/// 10 log10(|actual|^2 / |generated - actual|^2), in dB.
inline double snr(const dsp::Signal& generated, const dsp::Signal& actual) {
  require(generated.size() == actual.size(), "snr: length mismatch (" + std::to_string(generated.size()) +
                                                  " vs " + std::to_string(actual.size()) + ")");
  require(generated.sample_rate == actual.sample_rate, "snr: sample rate mismatch");
  double signal_energy = 0.0;
  double residual_energy = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double a = actual.samples[i];
    const double r = generated.samples[i] - a;
    signal_energy += a * a;
    residual_energy += r * r;
  }
  require(signal_energy > 0.0, "snr: reference signal is identically zero");
  if (residual_energy == 0.0) return kSnrInfinite;
  return 10.0 * std::log10(signal_energy / residual_energy);
}

/// Log-spectral distance: per frame, RMS over all K bins of log10 of the
/// power ratio; averaged over frames.
inline double lsd(const dsp::Signal& generated, const dsp::Signal& actual,
                  const dsp::SpectrogramParams& params = {}) {
  require(generated.size() == actual.size(), "lsd: length mismatch");
  require(generated.sample_rate == actual.sample_rate, "lsd: sample rate mismatch");
  const auto gen = dsp::stft_power(generated, params);
  const auto ref = dsp::stft_power(actual, params);
  double total = 0.0;
  for (std::size_t w = 0; w < gen.frames; ++w) {
    double acc = 0.0;
    for (std::size_t k = 0; k < gen.bins; ++k) {
      const double d = std::log10(gen.at(w, k) / ref.at(w, k));
      acc += d * d;
    }
    total += std::sqrt(acc / static_cast<double>(gen.bins));
  }
  return total / static_cast<double>(gen.frames);
}

struct ItemMetrics {
  std::string item_id;
  double snr_db = 0.0;
  double lsd_db = 0.0;
};

struct MetricReport {
  std::vector<ItemMetrics> per_item;
  double snr_mean = 0.0, snr_std = 0.0;
  double lsd_mean = 0.0, lsd_std = 0.0;
  dsp::SpectrogramParams stft_params;
  int scale = 0;
  std::string model_id;
  std::string method;  // "model" or "spline"

  /// Fills the mean/std fields (population standard deviation).
  void aggregate() {
    require(!per_item.empty(), "metric report: no items");
    auto stats = [this](auto field, double& mean, double& sd) {
      double sum = 0.0;
      for (const auto& it : per_item) sum += it.*field;
      mean = sum / static_cast<double>(per_item.size());
      if (!std::isfinite(mean)) {
        sd = std::numeric_limits<double>::quiet_NaN();
        return;
      }
      double var = 0.0;
      for (const auto& it : per_item) var += (it.*field - mean) * (it.*field - mean);
      sd = std::sqrt(var / static_cast<double>(per_item.size()));
    };
    stats(&ItemMetrics::snr_db, snr_mean, snr_std);
    stats(&ItemMetrics::lsd_db, lsd_mean, lsd_std);
  }
};

/// Renders infinities as "inf" and keeps full double precision otherwise.
inline std::string format_db(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// CSV layout: '#'-prefixed metadata lines, a header row, one row per item,
/// then `mean` and `std` summary rows.
inline void write_csv(const MetricReport& r, std::ostream& os) {
  os << "# scale=" << r.scale << "\n";
  os << "# stft " << r.stft_params.describe() << "\n";
  os << "# model=" << (r.model_id.empty() ? "none" : r.model_id) << "\n";
  os << "# method=" << r.method << "\n";
  os << "# snr_scope=whole_utterance\n";
  os << "# degradation=butterworth8_causal_decimate\n";
  os << "item_id,snr_db,lsd_db\n";
  for (const auto& it : r.per_item) {
    os << it.item_id << ',' << format_db(it.snr_db) << ',' << format_db(it.lsd_db) << "\n";
  }
  os << "mean," << format_db(r.snr_mean) << ',' << format_db(r.lsd_mean) << "\n";
  os << "std," << format_db(r.snr_std) << ',' << format_db(r.lsd_std) << "\n";
}

inline void write_csv(const MetricReport& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  write_csv(r, f);
  if (!f) throw DataError("write failed for '" + path + "'");
}

}  // namespace audiosr::metrics
