#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "audiosr/data/wav.hpp"
#include "audiosr/error.hpp"
#include "audiosr/rng.hpp"

namespace audiosr::data {

enum class Split { train, val, test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw DataError("unknown split '" + s + "'");
}

struct CorpusEntry {
  std::string speaker;
  std::string utterance;
  std::filesystem::path path;
  std::size_t samples = 0;
  int sample_rate = 0;
  Split split = Split::train;

  double duration() const { return sample_rate > 0 ? static_cast<double>(samples) / sample_rate : 0.0; }
};

struct CorpusIndex {
  std::vector<CorpusEntry> entries;  // sorted by (speaker, utterance)
  std::map<std::string, Split> speaker_split;
  std::uint64_t seed = 0;

  std::vector<CorpusEntry> in_split(Split s) const {
    std::vector<CorpusEntry> out;
    for (const auto& e : entries)
      if (e.split == s) out.push_back(e);
    return out;
  }
};

/// Assigns whole speakers to splits: sorted ids are shuffled with `seed`,
/// then the first round(r_train * n) go to train, the next round(r_val * n)
/// to val and the rest to test.
inline std::map<std::string, Split> split_speakers(std::vector<std::string> speakers, std::array<double, 3> ratios,
                                                   std::uint64_t seed) {
  require(ratios[0] >= 0 && ratios[1] >= 0 && ratios[2] >= 0, "split ratios must be non-negative");
  const double total = ratios[0] + ratios[1] + ratios[2];
  require(std::abs(total - 1.0) < 1e-9, "split ratios must sum to 1");
  std::sort(speakers.begin(), speakers.end());
  speakers.erase(std::unique(speakers.begin(), speakers.end()), speakers.end());
  Rng rng(seed);
  rng.shuffle(speakers.begin(), speakers.end());
  const auto n = static_cast<double>(speakers.size());
  const auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * n));
  const auto n_val = std::min(speakers.size() - std::min(n_train, speakers.size()),
                              static_cast<std::size_t>(std::llround(ratios[1] * n)));
  std::map<std::string, Split> out;
  for (std::size_t i = 0; i < speakers.size(); ++i) {
    out[speakers[i]] = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
  }
  return out;
}

/// Scans `root/<speaker>/*.wav` (VCTK layout). Only headers are read.
inline CorpusIndex scan_corpus(const std::filesystem::path& root, std::array<double, 3> ratios = {0.8, 0.1, 0.1},
                               std::uint64_t seed = 0) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw DataError(root.string() + ": corpus root is not a directory");
  CorpusIndex idx;
  idx.seed = seed;
  std::vector<std::string> speakers;
  for (const auto& dir : fs::directory_iterator(root)) {
    if (!dir.is_directory()) continue;
    const std::string spk = dir.path().filename().string();
    for (const auto& f : fs::directory_iterator(dir.path())) {
      if (!f.is_regular_file() || f.path().extension() != ".wav") continue;
      const WavInfo info = wav_info(f.path());
      idx.entries.push_back({spk, f.path().stem().string(), f.path(), info.frames, info.sample_rate, Split::train});
      speakers.push_back(spk);
    }
  }
  if (idx.entries.empty()) throw DataError(root.string() + ": no .wav files found in speaker directories");
  std::sort(idx.entries.begin(), idx.entries.end(), [](const CorpusEntry& a, const CorpusEntry& b) {
    return std::tie(a.speaker, a.utterance) < std::tie(b.speaker, b.utterance);
  });
  idx.speaker_split = split_speakers(speakers, ratios, seed);
  for (auto& e : idx.entries) e.split = idx.speaker_split.at(e.speaker);
  return idx;
}

/// One line per file: split, speaker, path, samples (tab separated).
inline void write_manifest(const CorpusIndex& idx, std::ostream& os) {
  os << "# seed=" << idx.seed << "\n";
  for (const auto& e : idx.entries) {
    os << to_string(e.split) << '\t' << e.speaker << '\t' << e.path.string() << '\t' << e.samples << '\n';
  }
}

inline void write_manifest(const CorpusIndex& idx, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw DataError(path.string() + ": cannot open for writing");
  write_manifest(idx, f);
}

inline CorpusIndex read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError(path.string() + ": cannot open manifest");
  CorpusIndex idx;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.rfind("# seed=", 0) == 0) {
      idx.seed = std::stoull(line.substr(7));
      continue;
    }
    std::istringstream ss(line);
    std::string split, spk, file, n;
    if (!std::getline(ss, split, '\t') || !std::getline(ss, spk, '\t') || !std::getline(ss, file, '\t') ||
        !std::getline(ss, n))
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed manifest line");
    CorpusEntry e;
    e.split = parse_split(split);
    e.speaker = spk;
    e.path = file;
    e.utterance = e.path.stem().string();
    e.samples = std::stoull(n);
    idx.speaker_split[spk] = e.split;
    idx.entries.push_back(std::move(e));
  }
  if (idx.entries.empty()) throw DataError(path.string() + ": empty manifest");
  return idx;
}

}  // namespace audiosr::data
