#pragma once

#include <functional>
#include <string>
#include <vector>

#include "audiosr/dsp/resample.hpp"
#include "audiosr/metrics/metrics.hpp"
#include "audiosr/models/inference.hpp"

namespace audiosr::metrics {

struct CorpusItem {
  std::string id;
  dsp::Signal signal;
};

/// Maps a degraded signal back to the original rate.
using Reconstructor = std::function<dsp::Signal(const dsp::Signal& low, int scale)>;

inline Reconstructor spline_reconstructor() {
  return [](const dsp::Signal& low, int scale) { return dsp::spline_upsample(low, scale); };
}

inline Reconstructor model_reconstructor(const models::Model& m) {
  return [&m](const dsp::Signal& low, int scale) { return models::reconstruct(m, low, scale); };
}

/// Degrades every item by `scale`, reconstructs it, truncates both to their
/// common length and scores the pair. Items are processed in order.
inline MetricReport evaluate(const std::vector<CorpusItem>& corpus, int scale, const Reconstructor& rec,
                             const dsp::SpectrogramParams& params = {}, const std::string& method = "spline",
                             const std::string& model_id = "") {
  require(!corpus.empty(), "evaluate: empty corpus");
  params.validate();
  MetricReport report;
  report.stft_params = params;
  report.scale = scale;
  report.method = method;
  report.model_id = model_id;
  for (const auto& item : corpus) {
    const dsp::Signal low = dsp::downsample(item.signal, scale);
    const dsp::Signal high = rec(low, scale);
    require(high.sample_rate == item.signal.sample_rate,
            "evaluate: reconstruction of '" + item.id + "' has the wrong sample rate");
    const std::size_t n = std::min(high.size(), item.signal.size());
    require(n >= params.frame_length, "evaluate: item '" + item.id + "' is shorter than one STFT frame");
    const dsp::Signal gen({high.samples.begin(), high.samples.begin() + static_cast<std::ptrdiff_t>(n)},
                          high.sample_rate);
    const dsp::Signal act({item.signal.samples.begin(), item.signal.samples.begin() + static_cast<std::ptrdiff_t>(n)},
                          item.signal.sample_rate);
    report.per_item.push_back({item.id, snr(gen, act), lsd(gen, act, params)});
  }
  report.aggregate();
  return report;
}

inline MetricReport evaluate_model(const models::Model& m, const std::vector<CorpusItem>& corpus, int scale,
                                   const dsp::SpectrogramParams& params = {}, const std::string& model_id = "") {
  return evaluate(corpus, scale, model_reconstructor(m), params, "model", model_id);
}

}  // namespace audiosr::metrics
