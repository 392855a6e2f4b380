#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "audiosr/error.hpp"

namespace audiosr::train {

/// Per-step records. `values` columns are deterministic given the seed;
/// wall_time is kept apart so logs can be compared exactly.
class TrainLog {
 public:
  explicit TrainLog(std::vector<std::string> columns = {"loss"})
      : columns_(std::move(columns)), start_(std::chrono::steady_clock::now()) {}

  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t size() const { return steps_.size(); }
  bool empty() const { return steps_.empty(); }

  void record(long step, std::vector<double> values) {
    require(values.size() == columns_.size(), "train log: wrong number of values");
    require(steps_.empty() || step > steps_.back(), "train log: step indices must increase");
    steps_.push_back(step);
    values_.push_back(std::move(values));
    wall_.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count());
  }

  long step(std::size_t i) const { return steps_[i]; }
  const std::vector<double>& values(std::size_t i) const { return values_[i]; }
  double wall_time(std::size_t i) const { return wall_[i]; }

  double value(std::size_t i, const std::string& column) const {
    for (std::size_t c = 0; c < columns_.size(); ++c)
      if (columns_[c] == column) return values_[i][c];
    throw InvalidArgument("train log: no column '" + column + "'");
  }

  /// True when step indices and every value column agree bit for bit.
  bool same_trajectory(const TrainLog& other) const {
    return columns_ == other.columns_ && steps_ == other.steps_ && values_ == other.values_;
  }

  /// step, value columns (17 significant digits), wall_time.
  void write_csv(std::ostream& os) const {
    os << "step";
    for (const auto& c : columns_) os << ',' << c;
    os << ",wall_time\n";
    for (std::size_t i = 0; i < steps_.size(); ++i) {
      os << steps_[i];
      for (double v : values_[i]) os << ',' << std::setprecision(17) << v;
      os << ',' << std::setprecision(6) << wall_[i] << '\n';
    }
  }

  void write_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    write_csv(f);
  }

 private:
  std::vector<std::string> columns_;
  std::vector<long> steps_;
  std::vector<std::vector<double>> values_;
  std::vector<double> wall_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace audiosr::train
