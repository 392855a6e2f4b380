#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "audiosr/data/patches.hpp"
#include "audiosr/diffgraph/tensor.hpp"
#include "audiosr/rng.hpp"
#include "audiosr/train/pairs.hpp"

namespace audiosr::train {

/// Training pairs cut from a corpus: every aligned patch of every item,
/// degraded once up front.
class PairBank {
 public:
  PairBank(const std::vector<dsp::Signal>& corpus, std::size_t patch_length, std::size_t stride, int scale,
           Mode mode) {
    require(!corpus.empty(), "train: empty corpus");
    for (const auto& s : corpus) {
      for (const auto& patch : data::extract_patches(s, patch_length, stride)) {
        Pair p = make_pair(patch, scale, mode);
        in_len_ = p.input.size();
        out_len_ = p.target.size();
        inputs_.insert(inputs_.end(), p.input.samples.begin(), p.input.samples.end());
        targets_.insert(targets_.end(), p.target.samples.begin(), p.target.samples.end());
        ++count_;
      }
    }
    require(count_ > 0, "train: no item is at least patch_length (" + std::to_string(patch_length) + ") long");
  }

  std::size_t size() const { return count_; }
  std::size_t input_length() const { return in_len_; }
  std::size_t target_length() const { return out_len_; }

  /// Stacks the listed pairs into (m, 1, L) input and target tensors.
  std::pair<dg::Tensor, dg::Tensor> batch(const std::vector<std::size_t>& idx) const {
    std::vector<double> in, out;
    in.reserve(idx.size() * in_len_);
    out.reserve(idx.size() * out_len_);
    for (std::size_t i : idx) {
      in.insert(in.end(), inputs_.begin() + static_cast<std::ptrdiff_t>(i * in_len_),
                inputs_.begin() + static_cast<std::ptrdiff_t>((i + 1) * in_len_));
      out.insert(out.end(), targets_.begin() + static_cast<std::ptrdiff_t>(i * out_len_),
                 targets_.begin() + static_cast<std::ptrdiff_t>((i + 1) * out_len_));
    }
    return {dg::Tensor({idx.size(), 1, in_len_}, std::move(in)), dg::Tensor({idx.size(), 1, out_len_}, std::move(out))};
  }

 private:
  std::vector<double> inputs_, targets_;
  std::size_t in_len_ = 0, out_len_ = 0, count_ = 0;
};

/// Walks seeded permutations of [0, n), reshuffling whenever one is used up.
class EpochSampler {
 public:
  EpochSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    require(n > 0, "sampler: nothing to sample");
    reshuffle();
  }

  std::vector<std::size_t> next(std::size_t m) {
    std::vector<std::size_t> out(m);
    for (auto& v : out) {
      if (pos_ == order_.size()) reshuffle();
      v = order_[pos_++];
    }
    return out;
  }

  long epoch() const { return epoch_; }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    rng_.shuffle(order_.begin(), order_.end());
    pos_ = 0;
    ++epoch_;
  }

  std::vector<std::size_t> order_;
  Rng rng_;
  std::size_t pos_ = 0;
  long epoch_ = 0;
};

}  // namespace audiosr::train
