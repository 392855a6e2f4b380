#pragma once

#include <CLI11.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "audiosr/cli/config_file.hpp"
#include "audiosr/data/corpus.hpp"
#include "audiosr/data/synth.hpp"
#include "audiosr/data/wav.hpp"
#include "audiosr/metrics/evaluate.hpp"
#include "audiosr/models/checkpoint.hpp"
#include "audiosr/probe/probe.hpp"
#include "audiosr/train/gan.hpp"
#include "audiosr/train/supervised.hpp"

namespace audiosr::cli {

inline constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// corpora

/// Sines and chirps at 12 kHz under a -40 dB uniform noise floor.
inline data::SynthSpec desk_corpus_spec(std::size_t count) {
  data::SynthSpec s;
  s.count = count;
  s.noise_floor = 0.01;
  return s;
}

struct CorpusSource {
  std::string data_dir;     // prepared directory holding manifest.tsv
  std::size_t synth = 0;    // >0: in-memory synthetic corpus of this size
  std::uint64_t synth_seed = 0;

  bool valid() const { return !data_dir.empty() || synth > 0; }

  std::string describe() const {
    return synth > 0 ? "synth:" + std::to_string(synth) + ":seed=" + std::to_string(synth_seed) : data_dir;
  }
};

/// Items of one split. Synthetic corpora split by item index 80/10/10.
inline std::vector<metrics::CorpusItem> load_split(const CorpusSource& src, data::Split split) {
  require(src.valid(), "no corpus given (use --data or --synth)");
  std::vector<metrics::CorpusItem> out;
  if (src.synth > 0) {
    const auto sigs = data::synth_signals(desk_corpus_spec(src.synth), src.synth_seed);
    const auto n = sigs.size();
    const auto n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
    for (std::size_t i = 0; i < n; ++i) {
      const data::Split s = i < n_train ? data::Split::train : (i < n_train + n_val ? data::Split::val : data::Split::test);
      if (s == split) out.push_back({"synth" + std::to_string(i), sigs[i]});
    }
  } else {
    const fs::path dir(src.data_dir);
    const auto idx = data::read_manifest(dir / "manifest.tsv");
    for (const auto& e : idx.in_split(split)) {
      const fs::path p = e.path.is_absolute() ? e.path : dir / e.path;
      out.push_back({e.speaker + "/" + e.utterance, data::wav_read(p)});
    }
  }
  if (out.empty()) throw DataError("corpus " + src.describe() + " has no items in split '" + data::to_string(split) + "'");
  return out;
}

inline std::vector<dsp::Signal> signals_of(const std::vector<metrics::CorpusItem>& items) {
  std::vector<dsp::Signal> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(it.signal);
  return out;
}

/// FNV-1a over sample rates and raw sample bytes, in corpus order.
inline std::string corpus_hash(const std::vector<metrics::CorpusItem>& items) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& it : items) {
    feed(&it.signal.sample_rate, sizeof(int));
    feed(it.signal.samples.data(), it.signal.samples.size() * sizeof(double));
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// ---------------------------------------------------------------------------
// run.meta

struct Meta {
  std::vector<std::pair<std::string, std::string>> lines;
  ConfigFile config;

  void add(const std::string& k, const std::string& v) { lines.emplace_back(k, v); }

  void write(const fs::path& path) const {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
    f << "version = " << kVersion << "\nprecision = f64\nthreads = 1\n";
    for (const auto& [k, v] : lines) f << k << " = " << v << "\n";
    f << config.text();
  }
};

inline void put_model(ConfigFile& c, const std::string& section, const models::ModelConfig& m) {
  auto kv = models::config_to_kv(m);
  kv["kind"] = models::to_string(models::kind_of(m));
  c.sections[section] = kv;
}

inline fs::path ensure_dir(const std::string& out) {
  require(!out.empty(), "--out is required");
  fs::create_directories(out);
  return fs::path(out);
}

// ---------------------------------------------------------------------------
// subcommands

struct PrepareOptions {
  std::string input, out;
  int rate = 12000;
  std::vector<double> ratios{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;
  bool downmix = false;
  bool normalize = false;
  std::size_t synth = 0;
  std::size_t speakers = 10;
};

/// Decimates every utterance to the target rate and writes it, with a
/// manifest, under `out/<speaker>/`. With --synth, writes a synthetic corpus
/// in the same layout instead.
inline int cmd_prepare(const PrepareOptions& o, std::ostream& out) {
  require(o.ratios.size() == 3, "--split needs three ratios");
  require((o.synth > 0) != !o.input.empty(), "prepare needs exactly one of --input or --synth");
  require(o.rate > 0, "--rate must be positive");
  const fs::path dir = ensure_dir(o.out);
  const std::array<double, 3> ratios{o.ratios[0], o.ratios[1], o.ratios[2]};
  data::CorpusIndex idx;
  idx.seed = o.seed;
  auto store = [&](const std::string& spk, const std::string& utt, dsp::Signal s) {
    if (o.normalize) {
      double peak = 0.0;
      for (double v : s.samples) peak = std::max(peak, std::abs(v));
      if (peak > 0.0)
        for (double& v : s.samples) v *= 0.95 / peak;
    }
    fs::create_directories(dir / spk);
    const fs::path rel = fs::path(spk) / (utt + ".wav");
    data::wav_write(s, dir / rel);
    idx.entries.push_back({spk, utt, rel, s.size(), s.sample_rate, data::Split::train});
  };

  std::vector<std::string> speakers;
  if (o.synth > 0) {
    require(o.speakers >= 1, "--speakers must be >= 1");
    data::SynthSpec spec = desk_corpus_spec(o.synth);
    spec.sample_rate = o.rate;
    spec.max_freq = std::min(spec.max_freq, 0.45 * o.rate);
    spec.min_freq = std::min(spec.min_freq, spec.max_freq);
    const auto sigs = data::synth_signals(spec, o.seed);
    for (std::size_t i = 0; i < sigs.size(); ++i) {
      std::ostringstream spk, utt;
      spk << "synth" << std::setw(2) << std::setfill('0') << i % o.speakers;
      utt << spk.str() << '_' << std::setw(4) << std::setfill('0') << i;
      speakers.push_back(spk.str());
      store(spk.str(), utt.str(), sigs[i]);
    }
  } else {
    const auto src = data::scan_corpus(o.input, ratios, o.seed);
    for (const auto& e : src.entries) {
      dsp::Signal s = data::wav_read(e.path, o.downmix);
      if (s.sample_rate != o.rate) {
        if (s.sample_rate % o.rate != 0)
          throw DataError(e.path.string() + ": rate " + std::to_string(s.sample_rate) +
                          " Hz is not a multiple of the target rate " + std::to_string(o.rate) + " Hz");
        s = dsp::downsample(s, s.sample_rate / o.rate);
      }
      if (!o.normalize) {
        for (std::size_t i = 0; i < s.size(); ++i)
          if (std::abs(s.samples[i]) > 1.0)
            throw DataError(e.path.string() + ": decimated signal exceeds full scale at sample " + std::to_string(i) +
                            " (rerun with --normalize)");
      }
      speakers.push_back(e.speaker);
      store(e.speaker, e.utterance, std::move(s));
    }
  }
  std::sort(idx.entries.begin(), idx.entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.speaker, a.utterance) < std::tie(b.speaker, b.utterance);
  });
  idx.speaker_split = data::split_speakers(speakers, ratios, o.seed);
  for (auto& e : idx.entries) e.split = idx.speaker_split.at(e.speaker);
  data::write_manifest(idx, dir / "manifest.tsv");

  Meta meta;
  meta.add("command", "prepare");
  meta.add("source", o.synth > 0 ? "synth:" + std::to_string(o.synth) : o.input);
  meta.add("seed", std::to_string(o.seed));
  meta.add("rate", std::to_string(o.rate));
  meta.add("split", models::kv::fmt(ratios[0]) + "," + models::kv::fmt(ratios[1]) + "," + models::kv::fmt(ratios[2]));
  meta.add("downmix", o.downmix ? "1" : "0");
  meta.add("normalize", o.normalize ? "1" : "0");
  meta.write(dir / "run.meta");
  std::array<std::size_t, 3> counts{};
  for (const auto& [spk, s] : idx.speaker_split) ++counts[static_cast<std::size_t>(s)];
  out << "prepared " << idx.entries.size() << " files from " << idx.speaker_split.size() << " speakers (train "
      << counts[0] << ", val " << counts[1] << ", test " << counts[2] << ")\n";
  return 0;
}

struct TrainOptions {
  std::string config, out;
  CorpusSource corpus;
  std::optional<long> steps;
  std::optional<std::uint64_t> seed;
  std::optional<long> log_every;
  std::string model = "edsr";  // kind when the config has no [model] section
};

inline void apply_overrides(train::TrainConfig& t, const TrainOptions& o) {
  if (o.steps) t.steps = *o.steps;
  if (o.seed) t.seed = *o.seed;
  if (o.log_every) t.log_every = *o.log_every;
  t.validate();
}

inline int cmd_train(const TrainOptions& o, std::ostream& out) {
  const ConfigFile file = o.config.empty() ? ConfigFile{} : load_config(o.config);
  const auto mcfg = model_config(file, "model", models::parse_kind(o.model));
  train::TrainConfig tcfg = train_config(file);
  apply_overrides(tcfg, o);
  const auto items = load_split(o.corpus, data::Split::train);
  const fs::path dir = ensure_dir(o.out);

  auto model = models::build_model(mcfg, tcfg.seed);
  Meta meta;
  meta.add("command", "train");
  meta.add("seed", std::to_string(tcfg.seed));
  meta.add("corpus", o.corpus.describe());
  meta.add("corpus_items", std::to_string(items.size()));
  meta.add("corpus_hash", corpus_hash(items));
  meta.add("parameters", std::to_string(models::count_parameters(model)));
  put_model(meta.config, "model", mcfg);
  meta.config.sections["train"] = tcfg.to_kv();
  meta.write(dir / "run.meta");

  train::Hooks hooks;
  hooks.progress = &out;
  hooks.checkpoint = [&](long step, const models::Model& m, const dg::AdamState& adam) {
    fs::create_directories(dir / "checkpoints");
    models::save_checkpoint(dir / "checkpoints" / ("step_" + std::to_string(step) + ".ckpt"), m,
                            static_cast<std::uint64_t>(step), &adam);
  };
  const auto result = train::train_supervised(model, signals_of(items), tcfg, hooks);
  result.log.write_csv((dir / "log.csv").string());
  models::save_checkpoint(dir / "model.ckpt", model, static_cast<std::uint64_t>(tcfg.steps), &result.adam);
  out << "trained " << tcfg.steps << " steps; final loss "
      << (result.log.empty() ? std::string("n/a") : models::kv::fmt(result.log.values(result.log.size() - 1)[0]))
      << "\n";
  return 0;
}

struct GanOptions : TrainOptions {
  std::string warm_start;
};

inline int cmd_train_gan(const GanOptions& o, std::ostream& out) {
  const ConfigFile file = o.config.empty() ? ConfigFile{} : load_config(o.config);
  const auto gcfg_model = model_config(file, "model", models::ModelKind::unet);
  const auto ccfg = model_config(file, "critic", models::ModelKind::critic);
  require(models::kind_of(ccfg) == models::ModelKind::critic, "[critic] must describe a critic");
  train::GanConfig gcfg = gan_config(file);
  apply_overrides(gcfg.base, o);
  if (!o.warm_start.empty()) gcfg.warm_start = o.warm_start;
  const auto items = load_split(o.corpus, data::Split::train);
  const fs::path dir = ensure_dir(o.out);

  auto gen = models::build_model(gcfg_model, gcfg.base.seed);
  auto critic = models::build_model(ccfg, train::critic_seed(gcfg.base.seed));
  Meta meta;
  meta.add("command", "train-gan");
  meta.add("seed", std::to_string(gcfg.base.seed));
  meta.add("corpus", o.corpus.describe());
  meta.add("corpus_items", std::to_string(items.size()));
  meta.add("corpus_hash", corpus_hash(items));
  put_model(meta.config, "model", gcfg_model);
  put_model(meta.config, "critic", ccfg);
  meta.config.sections["train"] = gcfg.base.to_kv();
  meta.config.sections["gan"] = gcfg.to_kv();
  meta.write(dir / "run.meta");

  train::GanHooks hooks;
  hooks.progress = &out;
  hooks.checkpoint = [&](long step, const models::Model& g, const models::Model& c) {
    fs::create_directories(dir / "checkpoints");
    const std::string s = std::to_string(step);
    models::save_checkpoint(dir / "checkpoints" / ("generator_" + s + ".ckpt"), g, static_cast<std::uint64_t>(step));
    models::save_checkpoint(dir / "checkpoints" / ("critic_" + s + ".ckpt"), c, static_cast<std::uint64_t>(step));
  };
  const auto r = train::train_wgan_gp(gen, critic, signals_of(items), gcfg, hooks);
  r.log.write_csv((dir / "log.csv").string());
  const auto steps = static_cast<std::uint64_t>(gcfg.base.steps);
  models::save_checkpoint(dir / "generator.ckpt", gen, steps, &r.generator_adam);
  models::save_checkpoint(dir / "critic.ckpt", critic, steps, &r.critic_adam);
  out << "adversarial training done: " << r.generator_steps << " generator and " << r.critic_steps
      << " critic updates\n";
  return 0;
}

struct EvalOptions {
  CorpusSource corpus;
  std::string split = "test";
  int scale = 2;
  std::string checkpoint;
  std::string method = "spline";
  std::string out;
  dsp::SpectrogramParams stft;
};

inline int cmd_eval(const EvalOptions& o, std::ostream& out) {
  require(!o.out.empty(), "--out is required");
  const auto items = load_split(o.corpus, data::parse_split(o.split));
  metrics::MetricReport report;
  if (o.method == "model" || !o.checkpoint.empty()) {
    require(!o.checkpoint.empty(), "--method model needs --checkpoint");
    const auto model = models::load_checkpoint(o.checkpoint).to_model();
    require(models::model_scale(model) == o.scale, "checkpoint was trained for scale " +
                                                        std::to_string(models::model_scale(model)) + ", --scale is " +
                                                        std::to_string(o.scale));
    report = metrics::evaluate_model(model, items, o.scale, o.stft, fs::path(o.checkpoint).filename().string());
  } else {
    require(o.method == "spline", "unknown method '" + o.method + "' (expected spline or model)");
    report = metrics::evaluate(items, o.scale, metrics::spline_reconstructor(), o.stft);
  }
  if (const auto parent = fs::path(o.out).parent_path(); !parent.empty()) fs::create_directories(parent);
  metrics::write_csv(report, o.out);
  out << report.method << " x" << o.scale << " on " << items.size() << " items: SNR "
      << metrics::format_db(report.snr_mean) << " +- " << metrics::format_db(report.snr_std) << " dB, LSD "
      << metrics::format_db(report.lsd_mean) << " +- " << metrics::format_db(report.lsd_std) << " dB\n";
  return 0;
}

struct UpsampleOptions {
  int scale = 2;
  std::string method = "spline";
  std::string checkpoint;
  std::string input, output;
  bool downmix = false;
  bool clip = false;
};

inline int cmd_upsample(const UpsampleOptions& o, std::ostream& out) {
  const dsp::Signal low = data::wav_read(o.input, o.downmix);
  dsp::Signal high;
  if (o.method == "spline") {
    high = dsp::spline_upsample(low, o.scale);
  } else {
    require(o.method == "model", "unknown method '" + o.method + "' (expected spline or model)");
    require(!o.checkpoint.empty(), "--method model needs --checkpoint");
    const auto model = models::load_checkpoint(o.checkpoint).to_model();
    high = models::reconstruct(model, low, o.scale);
  }
  if (o.clip)
    for (double& v : high.samples) v = std::clamp(v, -1.0, 1.0);
  data::wav_write(high, o.output);
  out << "wrote " << high.size() << " samples at " << high.sample_rate << " Hz to " << o.output << "\n";
  return 0;
}

struct CompareOptions {
  std::string config, out;
  std::string model = "edsr";
  std::string preset = "toy";
  CorpusSource corpus;
  long steps = 500;
  std::uint64_t seed = 0;
  int scale = 2;
};

/// Small networks that train in minutes on one core.
inline models::ModelConfig preset_model(models::ModelKind kind, const std::string& preset, int scale) {
  require(preset == "toy" || preset == "full", "unknown preset '" + preset + "' (expected toy or full)");
  if (kind == models::ModelKind::edsr) {
    models::EdsrConfig c;
    if (preset == "toy") {
      c.filters = 16;
      c.blocks = 2;
    }
    require(scale >= 2 && (scale & (scale - 1)) == 0, "edsr supports power-of-two scales only");
    c.upsample_stages = static_cast<int>(std::log2(scale));
    return c;
  }
  require(kind == models::ModelKind::unet, "compare-losses trains a generator (edsr or unet)");
  models::UnetConfig c;
  if (preset == "toy") {
    c.down_filters = {8, 16, 16};
    c.down_kernels = {17, 9, 5};
    c.bottleneck_filters = 16;
    c.bottleneck_kernel = 5;
    c.final_kernel = 9;
  }
  c.scale = scale;
  return c;
}

/// Trains the same initial model with l1 and with l2 loss and scores both
/// on the validation split. Rows are metrics, columns losses.
inline int cmd_compare_losses(const CompareOptions& o, std::ostream& out) {
  const ConfigFile file = o.config.empty() ? ConfigFile{} : load_config(o.config);
  const auto kind = models::parse_kind(o.model);
  const auto mcfg = file.has("model") ? model_config(file, "model", kind) : preset_model(kind, o.preset, o.scale);
  train::TrainConfig base = train_config(file);
  base.steps = o.steps;
  base.seed = o.seed;
  base.scale = o.scale;
  if (!file.section("train").count("patch_length")) base.patch_length = 2048;
  if (!file.section("train").count("batch_size")) base.batch_size = 8;
  base.validate();
  const auto train_items = load_split(o.corpus, data::Split::train);
  const auto val_items = load_split(o.corpus, data::Split::val);
  const fs::path dir = ensure_dir(o.out);

  Meta meta;
  meta.add("command", "compare-losses");
  meta.add("seed", std::to_string(o.seed));
  meta.add("corpus", o.corpus.describe());
  meta.add("corpus_hash", corpus_hash(train_items) + "/" + corpus_hash(val_items));
  put_model(meta.config, "model", mcfg);
  meta.config.sections["train"] = base.to_kv();
  meta.write(dir / "run.meta");

  const auto initial = models::build_model(mcfg, o.seed);
  std::array<metrics::MetricReport, 2> reports;
  for (int i = 0; i < 2; ++i) {
    const auto loss = i == 0 ? train::LossKind::l1 : train::LossKind::l2;
    train::TrainConfig t = base;
    t.loss = loss;
    auto m = initial.clone();
    const auto r = train::train_supervised(m, signals_of(train_items), t);
    r.log.write_csv((dir / ("log_" + train::to_string(loss) + ".csv")).string());
    reports[static_cast<std::size_t>(i)] = metrics::evaluate_model(m, val_items, o.scale, {}, train::to_string(loss));
    out << train::to_string(loss) << ": SNR " << metrics::format_db(reports[static_cast<std::size_t>(i)].snr_mean)
        << " dB, LSD " << metrics::format_db(reports[static_cast<std::size_t>(i)].lsd_mean) << " dB\n";
  }
  std::ofstream f(dir / "compare_losses.csv");
  if (!f) throw DataError("cannot write compare_losses.csv");
  f << "# model=" << models::to_string(kind) << " scale=" << o.scale << " steps=" << o.steps << " seed=" << o.seed
    << " items=" << val_items.size() << "\n";
  f << "metric,l1_mean,l1_std,l2_mean,l2_std\n";
  using metrics::format_db;
  f << "snr," << format_db(reports[0].snr_mean) << ',' << format_db(reports[0].snr_std) << ','
    << format_db(reports[1].snr_mean) << ',' << format_db(reports[1].snr_std) << "\n";
  f << "lsd," << format_db(reports[0].lsd_mean) << ',' << format_db(reports[0].lsd_std) << ','
    << format_db(reports[1].lsd_mean) << ',' << format_db(reports[1].lsd_std) << "\n";
  return 0;
}

struct ProbeCmdOptions {
  std::string checkpoint, out;
  probe::ProbeOptions probe;
  double floor_db = -100.0;
  double ceiling_db = 60.0;
};

inline int cmd_probe(const ProbeCmdOptions& o, std::ostream& out) {
  require(o.ceiling_db > o.floor_db, "--ceiling must lie above --floor");
  const auto model = models::load_checkpoint(o.checkpoint).to_model();
  const fs::path dir = ensure_dir(o.out);
  const auto report = probe::zero_input_probe(model, o.probe, fs::path(o.checkpoint).filename().string());
  probe::write_report(report, (dir / "report.txt").string());
  probe::export_spectrogram(report.spectrogram, (dir / "spec.csv").string(), probe::ImageFormat::csv);
  probe::export_spectrogram(report.spectrogram, (dir / "spec.pgm").string(), probe::ImageFormat::pgm, o.floor_db,
                            o.ceiling_db);
  out << report.peaks.size() << " tonal peaks; period "
      << (report.period ? std::to_string(*report.period) : std::string("none")) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// entry point

inline void add_corpus_options(CLI::App* app, CorpusSource& c) {
  app->add_option("--data", c.data_dir, "Prepared corpus directory (holds manifest.tsv)");
  app->add_option("--synth", c.synth, "Use an in-memory synthetic corpus of N items instead");
  app->add_option("--synth-seed", c.synth_seed, "Seed of the synthetic corpus");
}

inline void add_stft_options(CLI::App* app, dsp::SpectrogramParams& p) {
  app->add_option("--frame", p.frame_length, "STFT frame length");
  app->add_option("--hop", p.hop, "STFT hop");
}

/// Parses argv and runs one subcommand. Returns 0 on success, 1 on usage
/// errors, 2 on data errors and 3 when training diverges.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Audio super-resolution toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  PrepareOptions prep;
  auto* p = app.add_subcommand("prepare", "Decimate a speaker-directory corpus and write a manifest");
  p->add_option("--input", prep.input, "Corpus root with one directory per speaker");
  p->add_option("--synth", prep.synth, "Write N synthetic items instead of reading --input");
  p->add_option("--speakers", prep.speakers, "Pseudo speakers of a synthetic corpus");
  p->add_option("--out", prep.out, "Output directory")->required();
  p->add_option("--rate", prep.rate, "Target sample rate in Hz");
  p->add_option("--split", prep.ratios, "Train, val and test ratios")->delimiter(',')->expected(3);
  p->add_option("--seed", prep.seed, "Split seed");
  p->add_flag("--downmix", prep.downmix, "Average the channels of multichannel files");
  p->add_flag("--normalize", prep.normalize, "Scale every utterance to a 0.95 peak");

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Supervised training of a generator");
  t->add_option("--config", tr.config, "Run config with [model] and [train] sections");
  t->add_option("--model", tr.model, "Model kind when the config has no [model] section");
  add_corpus_options(t, tr.corpus);
  t->add_option("--out", tr.out, "Output directory")->required();
  t->add_option("--steps", tr.steps, "Override [train] steps");
  t->add_option("--seed", tr.seed, "Override [train] seed");
  t->add_option("--log-every", tr.log_every, "Progress line interval");

  GanOptions ga;
  auto* g = app.add_subcommand("train-gan", "Adversarial training with a gradient-penalised critic");
  g->add_option("--config", ga.config, "Run config with [model], [critic], [train] and [gan] sections");
  add_corpus_options(g, ga.corpus);
  g->add_option("--out", ga.out, "Output directory")->required();
  g->add_option("--steps", ga.steps, "Override [train] steps (outer iterations)");
  g->add_option("--seed", ga.seed, "Override [train] seed");
  g->add_option("--log-every", ga.log_every, "Progress line interval");
  g->add_option("--warm-start", ga.warm_start, "Generator checkpoint to start from");

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Score a reconstruction method and write a metric CSV");
  add_corpus_options(e, ev.corpus);
  e->add_option("--split", ev.split, "train, val or test");
  e->add_option("--scale", ev.scale, "Upsampling ratio")->required();
  e->add_option("--method", ev.method, "spline or model");
  e->add_option("--checkpoint", ev.checkpoint, "Generator checkpoint (implies --method model)");
  e->add_option("--out", ev.out, "CSV report path")->required();
  add_stft_options(e, ev.stft);

  UpsampleOptions up;
  auto* u = app.add_subcommand("upsample", "Upsample a WAV file");
  u->add_option("--scale", up.scale, "Upsampling ratio")->required();
  u->add_option("--method", up.method, "spline or model");
  u->add_option("--checkpoint", up.checkpoint, "Generator checkpoint for --method model");
  u->add_flag("--downmix", up.downmix, "Average the channels of a multichannel input");
  u->add_flag("--clip", up.clip, "Clamp the output to [-1, 1] instead of failing");
  u->add_option("input", up.input, "Input WAV")->required();
  u->add_option("output", up.output, "Output WAV")->required();

  CompareOptions co;
  auto* c = app.add_subcommand("compare-losses", "Train one model with l1 and with l2 loss and compare");
  c->add_option("--config", co.config, "Optional run config; [model] replaces the preset");
  c->add_option("--model", co.model, "edsr or unet");
  c->add_option("--preset", co.preset, "toy or full sized network");
  add_corpus_options(c, co.corpus);
  c->add_option("--steps", co.steps, "Training steps per loss");
  c->add_option("--seed", co.seed, "Seed shared by both runs");
  c->add_option("--scale", co.scale, "Upsampling ratio");
  c->add_option("--out", co.out, "Output directory")->required();

  ProbeCmdOptions pr;
  auto* q = app.add_subcommand("probe", "Zero-input artifact probe of a generator");
  q->add_option("--checkpoint", pr.checkpoint, "Generator checkpoint")->required();
  q->add_option("--out", pr.out, "Output directory")->required();
  q->add_option("--length", pr.probe.length, "Probe length at the output rate");
  q->add_option("--rate", pr.probe.sample_rate, "Output sample rate for the axes");
  q->add_option("--threshold", pr.probe.threshold_db, "Peak threshold above the median bin, dB");
  q->add_option("--edge", pr.probe.edge, "Edge window in samples (default length/8)");
  q->add_option("--floor", pr.floor_db, "PGM floor, dB");
  q->add_option("--ceiling", pr.ceiling_db, "PGM ceiling, dB");
  add_stft_options(q, pr.probe.stft);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*p) return cmd_prepare(prep, out);
    if (*t) return cmd_train(tr, out);
    if (*g) return cmd_train_gan(ga, out);
    if (*e) return cmd_eval(ev, out);
    if (*u) return cmd_upsample(up, out);
    if (*c) {
      if (!co.corpus.valid()) co.corpus.synth = 200;
      return cmd_compare_losses(co, out);
    }
    if (*q) return cmd_probe(pr, out);
  } catch (const InvalidArgument& ex) {
    err << "audiosr: usage error: " << ex.what() << "\n";
    return 1;
  } catch (const NumericError& ex) {
    err << "audiosr: numeric failure at step " << ex.step() << ": " << ex.what() << "\n";
    return 3;
  } catch (const std::exception& ex) {
    err << "audiosr: data error: " << ex.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace audiosr::cli
