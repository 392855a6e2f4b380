#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "audiosr/diffgraph/adam.hpp"
#include "audiosr/error.hpp"
#include "audiosr/models/model.hpp"

namespace audiosr::models {

// Byte layout (all integers little-endian):
//   magic      8 bytes  "AUDIOSR\0"
//   version    u32      kCheckpointVersion
//   kind       str      u32 length + bytes
//   config     str      canonical `key = value` lines
//   precision  str      "f64"
//   seed       u64      initialisation seed
//   step       u64      optimiser steps taken
//   nparams    u32
//   per parameter: name str, rank u32, dims u64 x rank, data f64 x numel
//   has_adam   u8
//   if has_adam: step u64, alpha/beta1/beta2/eps f64, nmoments u32,
//                per entry: name str, numel u64, m f64 x numel, v f64 x numel

inline constexpr char kCheckpointMagic[8] = {'A', 'U', 'D', 'I', 'O', 'S', 'R', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelKind kind = ModelKind::edsr;
  ModelConfig config;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  ParameterList params;
  std::optional<dg::AdamState> adam;

  Model to_model() const {
    ParameterList copy;
    for (const auto& p : params) copy.push_back({p.name, p.tensor.detach().set_requires_grad(true)});
    Model m(config, std::move(copy), seed);
    // shapes must agree with a freshly built network of this configuration
    const Model ref = build_model(config, seed);
    require(ref.parameters().size() == m.parameters().size(), "checkpoint: parameter count does not match config");
    for (std::size_t i = 0; i < ref.parameters().size(); ++i) {
      const auto& a = ref.parameters()[i];
      const auto& b = m.parameters()[i];
      if (a.name != b.name || a.tensor.shape() != b.tensor.shape())
        throw DataError("checkpoint: parameter '" + b.name + "' does not match the configured architecture");
    }
    return m;
  }
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}
  template <typename T>
  void pod(T v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void doubles(const std::vector<double>& v) {
    os_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  Reader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}
  template <typename T>
  T pod() {
    T v{};
    raw(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  }
  std::string str(std::size_t limit = 1 << 20) {
    const auto n = pod<std::uint32_t>();
    if (n > limit) corrupt("string length " + std::to_string(n) + " out of range");
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  std::vector<double> doubles(std::size_t n) {
    if (n > (std::size_t{1} << 34)) corrupt("array length out of range");
    std::vector<double> v(n);
    raw(reinterpret_cast<char*>(v.data()), n * sizeof(double));
    return v;
  }
  [[noreturn]] void corrupt(const std::string& why) const {
    throw DataError(source_ + ": corrupt checkpoint (" + why + ")");
  }

 private:
  void raw(char* dst, std::size_t n) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) throw DataError(source_ + ": truncated checkpoint");
  }
  std::istream& is_;
  std::string source_;
};

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const Model& model, std::uint64_t step,
                             const dg::AdamState* adam = nullptr) {
  detail::Writer w(os);
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  w.pod(kCheckpointVersion);
  w.str(to_string(model.kind()));
  w.str(kv::to_text(config_to_kv(model.config())));
  w.str("f64");
  w.pod(static_cast<std::uint64_t>(model.init_seed()));
  w.pod(step);
  w.pod(static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& p : model.parameters()) {
    w.str(p.name);
    w.pod(static_cast<std::uint32_t>(p.tensor.rank()));
    for (auto d : p.tensor.shape()) w.pod(static_cast<std::uint64_t>(d));
    w.doubles(p.tensor.values());
  }
  w.pod(static_cast<std::uint8_t>(adam ? 1 : 0));
  if (adam) {
    w.pod(static_cast<std::uint64_t>(adam->step));
    w.pod(adam->alpha);
    w.pod(adam->beta1);
    w.pod(adam->beta2);
    w.pod(adam->eps);
    w.pod(static_cast<std::uint32_t>(adam->moments.size()));
    for (const auto& [name, mom] : adam->moments) {
      w.str(name);
      w.pod(static_cast<std::uint64_t>(mom.m.size()));
      w.doubles(mom.m);
      w.doubles(mom.v);
    }
  }
  if (!os) throw DataError("failed writing checkpoint");
}

inline void save_checkpoint(const std::filesystem::path& path, const Model& model, std::uint64_t step,
                            const dg::AdamState* adam = nullptr) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path.string() + ": cannot open for writing");
  write_checkpoint(os, model, step, adam);
}

inline Checkpoint read_checkpoint(std::istream& is, const std::string& source = "checkpoint") {
  detail::Reader r(is, source);
  char magic[8];
  for (char& c : magic) c = r.pod<char>();
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) r.corrupt("bad magic");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw DataError(source + ": unsupported checkpoint version " + std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  Checkpoint ck;
  try {
    ck.kind = parse_kind(r.str());
    ck.config = config_from_kv(ck.kind, kv::from_text(r.str()));
  } catch (const InvalidArgument& e) {
    r.corrupt(e.what());
  }
  if (const auto prec = r.str(); prec != "f64") r.corrupt("unsupported precision '" + prec + "'");
  ck.seed = r.pod<std::uint64_t>();
  ck.step = r.pod<std::uint64_t>();
  const auto n = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    const auto rank = r.pod<std::uint32_t>();
    if (rank > 8) r.corrupt("rank out of range");
    dg::Shape shape;
    std::size_t count = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape.push_back(static_cast<std::size_t>(r.pod<std::uint64_t>()));
      count *= shape.back();
    }
    ck.params.push_back({std::move(name), dg::Tensor(shape, r.doubles(count), true)});
  }
  const auto has_adam = r.pod<std::uint8_t>();
  if (has_adam > 1) r.corrupt("bad optimiser flag");
  if (has_adam) {
    dg::AdamState s;
    s.step = static_cast<decltype(s.step)>(r.pod<std::uint64_t>());
    s.alpha = r.pod<double>();
    s.beta1 = r.pod<double>();
    s.beta2 = r.pod<double>();
    s.eps = r.pod<double>();
    const auto nm = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < nm; ++i) {
      std::string name = r.str();
      const auto len = static_cast<std::size_t>(r.pod<std::uint64_t>());
      dg::AdamMoments mom;
      mom.m = r.doubles(len);
      mom.v = r.doubles(len);
      s.moments.emplace(std::move(name), std::move(mom));
    }
    ck.adam = std::move(s);
  }
  if (is.peek() != std::char_traits<char>::eof()) r.corrupt("trailing bytes");
  return ck;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path.string() + ": cannot open checkpoint");
  return read_checkpoint(is, path.string());
}

/// Loads a checkpoint and checks that it holds the expected kind of network.
inline Checkpoint load_checkpoint(const std::filesystem::path& path, ModelKind expected) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.kind != expected)
    throw DataError(path.string() + ": checkpoint holds a " + to_string(ck.kind) + " model, expected " +
                    to_string(expected));
  return ck;
}

}  // namespace audiosr::models
