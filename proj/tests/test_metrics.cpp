#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numbers>

#include "audiosr/metrics/evaluate.hpp"
#include "audiosr/metrics/metrics.hpp"
#include "oracles.hpp"

using namespace audiosr;
using namespace audiosr::metrics;
using dsp::Signal;

namespace {

Signal scaled(const Signal& s, double c) {
  Signal out = s;
  for (double& v : out.samples) v *= c;
  return out;
}

dsp::SpectrogramParams small_params() {
  dsp::SpectrogramParams p;
  p.frame_length = 128;
  p.hop = 32;
  return p;
}

}  // namespace

TEST(Snr, Anchors) {
  Rng rng(1);
  const Signal a(oracle::bandlimited(rng, 1000, 0.5), 8000);
  EXPECT_EQ(snr(a, a), kSnrInfinite);
  EXPECT_NEAR(snr(Signal(std::vector<double>(1000, 0.0), 8000), a), 0.0, 1e-12);
  EXPECT_NEAR(snr(scaled(a, 0.9), a), 20.0, 1e-9);
}

TEST(Snr, Rejections) {
  const Signal a({1, 2, 3}, 10);
  EXPECT_THROW(snr(a, Signal({1, 2}, 10)), InvalidArgument);
  EXPECT_THROW(snr(a, Signal({0, 0, 0}, 10)), InvalidArgument);
  EXPECT_THROW(snr(a, Signal({1, 2, 3}, 11)), InvalidArgument);
}

TEST(Snr, MatchesOracle) {
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const Signal a(oracle::bandlimited(rng, 777, 0.7), 8000);
    const Signal g(oracle::bandlimited(rng, 777, 0.7), 8000);
    EXPECT_NEAR(snr(g, a), oracle::snr(g.samples, a.samples), 1e-9);
  }
}

TEST(Snr, ResidualScaleLaw) {
  Rng rng(3);
  const Signal a(oracle::bandlimited(rng, 500, 0.5), 8000);
  const auto e = oracle::bandlimited(rng, 500, 0.9);
  auto with = [&](double c) {
    Signal g = a;
    for (std::size_t i = 0; i < g.size(); ++i) g.samples[i] += c * e[i];
    return snr(g, a);
  };
  for (double c : {0.5, 2.0, 10.0}) EXPECT_NEAR(with(c) - with(1.0), -20.0 * std::log10(c), 1e-9);
}

TEST(Lsd, Anchors) {
  // broadband content keeps every bin above the power floor, so each ratio is exactly 10
  Rng rng(4);
  std::vector<double> x(4096);
  for (double& v : x) v = rng.uniform(-0.5, 0.5);
  const Signal a(x, 16000);
  EXPECT_EQ(lsd(a, a), 0.0);
  EXPECT_NEAR(lsd(scaled(a, std::sqrt(10.0)), a), 1.0, 1e-9);
}

TEST(Lsd, MatchesOracle) {
  Rng rng(5);
  const auto p = small_params();
  for (int i = 0; i < 10; ++i) {
    const Signal a(oracle::bandlimited(rng, 600, 0.8), 8000);
    const Signal g(oracle::bandlimited(rng, 600, 0.8), 8000);
    EXPECT_NEAR(lsd(g, a, p), oracle::lsd(g.samples, a.samples, p.frame_length, p.hop, p.power_floor), 1e-9);
  }
}

TEST(Lsd, Symmetric) {
  Rng rng(6);
  const Signal a(oracle::bandlimited(rng, 3000, 0.8), 8000);
  const Signal b(oracle::bandlimited(rng, 3000, 0.8), 8000);
  EXPECT_NEAR(lsd(a, b), lsd(b, a), 1e-12);
}

TEST(Lsd, ShiftInvariantOnNoise) {
  Rng rng(7);
  std::vector<double> x(20000), y(20000);
  for (double& v : x) v = rng.uniform(-0.5, 0.5);
  for (double& v : y) v = rng.uniform(-0.5, 0.5);
  const std::size_t hop = 512, n = 16384;
  const Signal a0({x.begin(), x.begin() + n}, 8000), b0({y.begin(), y.begin() + n}, 8000);
  const Signal a1({x.begin() + hop, x.begin() + hop + n}, 8000), b1({y.begin() + hop, y.begin() + hop + n}, 8000);
  EXPECT_NEAR(lsd(a0, b0), lsd(a1, b1), 0.1);
}

TEST(Lsd, Rejections) {
  EXPECT_THROW(lsd(Signal(std::vector<double>(100, 1.0), 10), Signal(std::vector<double>(100, 1.0), 10)),
               InvalidArgument);
  EXPECT_THROW(lsd(Signal(std::vector<double>(4096, 1.0), 10), Signal(std::vector<double>(4000, 1.0), 10)),
               InvalidArgument);
}

TEST(Metrics, PureAndBitIdentical) {
  Rng rng(8);
  const Signal a(oracle::bandlimited(rng, 5000, 0.8), 8000);
  const Signal b(oracle::bandlimited(rng, 5000, 0.8), 8000);
  EXPECT_EQ(lsd(a, b), lsd(a, b));
  EXPECT_EQ(snr(a, b), snr(a, b));
}

TEST(Report, PopulationStd) {
  MetricReport r;
  r.per_item = {{"a", 10, 1}, {"b", 20, 3}};
  r.aggregate();
  EXPECT_DOUBLE_EQ(r.snr_mean, 15);
  EXPECT_DOUBLE_EQ(r.snr_std, 5);
  EXPECT_DOUBLE_EQ(r.lsd_std, 1);
  MetricReport one;
  one.per_item = {{"x", 3, 2}};
  one.aggregate();
  EXPECT_EQ(one.snr_std, 0.0);
  MetricReport none;
  EXPECT_THROW(none.aggregate(), InvalidArgument);
}

TEST(Report, InfiniteSnrRendered) {
  MetricReport r;
  r.per_item = {{"a", kSnrInfinite, 0.0}};
  r.scale = 2;
  r.method = "spline";
  r.aggregate();
  std::ostringstream os;
  write_csv(r, os);
  const std::string csv = os.str();
  EXPECT_NE(csv.find("a,inf,0\n"), std::string::npos) << csv;
  EXPECT_NE(csv.find("mean,inf,0\n"), std::string::npos);
  EXPECT_NE(csv.find("# stft frame_length=2048 hop=512 window=hann"), std::string::npos);
  EXPECT_NE(csv.find("# scale=2"), std::string::npos);
}

TEST(Evaluate, SplineBaselineOnToySines) {
  std::vector<CorpusItem> corpus;
  for (int i = 0; i < 3; ++i) {
    std::vector<double> x(8192);
    for (std::size_t t = 0; t < x.size(); ++t) x[t] = 0.3 * std::sin(2 * std::numbers::pi * (300.0 + 200 * i) * t / 12000);
    corpus.push_back({"tone" + std::to_string(i), Signal(x, 12000)});
  }
  const MetricReport r = evaluate(corpus, 2, spline_reconstructor());
  ASSERT_EQ(r.per_item.size(), 3u);
  EXPECT_GT(r.lsd_mean, 0.0);
  EXPECT_TRUE(std::isfinite(r.lsd_mean));
  EXPECT_EQ(r.stft_params.frame_length, 2048u);
  EXPECT_EQ(r.method, "spline");

  const MetricReport single = evaluate({corpus[0]}, 2, spline_reconstructor());
  EXPECT_EQ(single.snr_std, 0.0);
  EXPECT_EQ(single.lsd_std, 0.0);
  EXPECT_THROW(evaluate({}, 2, spline_reconstructor()), InvalidArgument);
}

TEST(Evaluate, IdentityReconstructorAgreesWithDirectMetrics) {
  // a reconstructor that returns the reference itself scores +inf / 0
  Rng rng(9);
  const Signal s(oracle::bandlimited(rng, 4096, 0.5), 12000);
  const MetricReport r = evaluate({{"x", s}}, 2, [&](const Signal&, int) { return s; });
  EXPECT_EQ(r.per_item[0].snr_db, kSnrInfinite);
  EXPECT_EQ(r.per_item[0].lsd_db, 0.0);
}

TEST(Evaluate, ModelPathTruncatesToCommonLength) {
  models::EdsrConfig c;
  c.filters = 4;
  c.blocks = 1;
  const models::Model m = models::build_edsr(c, 1);
  Rng rng(10);
  // odd length: the low-rate signal loses a sample, so the model output is one shorter
  const Signal s(oracle::bandlimited(rng, 4097, 0.4), 12000);
  const MetricReport r = evaluate_model(m, {{"odd", s}}, 2, {}, "edsr-test");
  EXPECT_EQ(r.method, "model");
  EXPECT_EQ(r.model_id, "edsr-test");
  EXPECT_TRUE(std::isfinite(r.per_item[0].snr_db));
  EXPECT_THROW(evaluate_model(m, {{"odd", s}}, 4), InvalidArgument);
}

TEST(Evaluate, CsvFileWritten) {
  const auto path = std::filesystem::temp_directory_path() / "audiosr_metrics_test.csv";
  MetricReport r;
  r.per_item = {{"a", 1, 2}, {"b", 3, 4}};
  r.aggregate();
  write_csv(r, path.string());
  std::ifstream f(path);
  std::string line;
  int rows = 0;
  while (std::getline(f, line))
    if (!line.empty() && line[0] != '#') ++rows;
  EXPECT_EQ(rows, 5);  // header, 2 items, mean, std
  std::filesystem::remove(path);
  EXPECT_THROW(write_csv(r, std::string("/nonexistent_dir/x.csv")), DataError);
}
