#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "audiosr/error.hpp"
#include "audiosr/models/config.hpp"
#include "audiosr/train/config.hpp"

namespace audiosr::cli {

/// Flat `key = value` lines grouped under [section] headers. '#' starts a
/// comment. Allowed sections: model, critic, train, gan.
struct ConfigFile {
  std::map<std::string, models::KeyValues> sections;

  bool has(const std::string& s) const { return sections.count(s) > 0; }

  models::KeyValues section(const std::string& s) const {
    auto it = sections.find(s);
    return it == sections.end() ? models::KeyValues{} : it->second;
  }

  std::string text() const {
    std::string out;
    for (const auto& [name, kv] : sections) {
      out += "[" + name + "]\n";
      for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    }
    return out;
  }
};

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline ConfigFile parse_config(std::istream& is, const std::string& source = "config") {
  static const std::set<std::string> allowed{"model", "critic", "train", "gan"};
  ConfigFile cfg;
  std::string line, current;
  std::size_t lineno = 0;
  auto where = [&] { return source + ":" + std::to_string(lineno) + ": "; };
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw InvalidArgument(where() + "malformed section header '" + line + "'");
      current = trim(line.substr(1, line.size() - 2));
      if (!allowed.count(current)) throw InvalidArgument(where() + "unknown section [" + current + "]");
      cfg.sections[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidArgument(where() + "expected 'key = value', got '" + line + "'");
    if (current.empty()) throw InvalidArgument(where() + "key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw InvalidArgument(where() + "empty key");
    auto& sec = cfg.sections[current];
    if (sec.count(key)) throw InvalidArgument(where() + "duplicate key '" + key + "' in [" + current + "]");
    sec[key] = value;
  }
  return cfg;
}

inline ConfigFile load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open config '" + path + "'");
  return parse_config(f, path);
}

/// The [model] or [critic] section; `kind` picks the architecture.
inline models::ModelConfig model_config(const ConfigFile& cfg, const std::string& section,
                                        models::ModelKind fallback) {
  models::KeyValues kv = cfg.section(section);
  models::ModelKind kind = fallback;
  if (auto it = kv.find("kind"); it != kv.end()) {
    kind = models::parse_kind(it->second);
    kv.erase(it);
  }
  return models::config_from_kv(kind, kv);
}

inline train::TrainConfig train_config(const ConfigFile& cfg) { return train::TrainConfig::from_kv(cfg.section("train")); }

inline train::GanConfig gan_config(const ConfigFile& cfg) {
  train::GanConfig g;
  g.base = train_config(cfg);
  if (!g.base.loss) g.base.loss = train::LossKind::l1;
  g.apply_kv(cfg.section("gan"));
  return g;
}

}  // namespace audiosr::cli
