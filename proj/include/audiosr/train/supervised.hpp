#pragma once

#include <cmath>
#include <functional>
#include <ostream>

#include "audiosr/diffgraph.hpp"
#include "audiosr/models/inference.hpp"
#include "audiosr/models/model.hpp"
#include "audiosr/train/batches.hpp"
#include "audiosr/train/config.hpp"
#include "audiosr/train/log.hpp"

namespace audiosr::train {

/// Optional side channels of a training run.
struct Hooks {
  std::function<void(long step, const models::Model&, const dg::AdamState&)> checkpoint;
  std::ostream* progress = nullptr;
};

struct SupervisedResult {
  TrainLog log;
  dg::AdamState adam;
};

/// Seeds of the independent random streams a run draws from.
inline std::uint64_t sampler_seed(std::uint64_t seed) { return seed; }
inline std::uint64_t dropout_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ull; }
inline std::uint64_t critic_seed(std::uint64_t seed) { return seed ^ 0xC2B2AE3D27D4EB4Full; }

inline dg::Tensor loss_of(LossKind k, const dg::Tensor& pred, const dg::Tensor& target) {
  return k == LossKind::l1 ? dg::l1_loss(pred, target) : dg::l2_loss(pred, target);
}

/// Checks the model kind, mode, scale and patch length against each other.
inline Mode resolve_mode(const models::Model& model, const TrainConfig& cfg) {
  require(model.kind() != models::ModelKind::critic, "train: a critic cannot be trained as a generator");
  const Mode expected = mode_for(model.kind());
  const Mode mode = cfg.mode.value_or(expected);
  require(mode == expected, "train: " + to_string(model.kind()) + " trains in " + to_string(expected) +
                                " mode, config asks for " + to_string(mode));
  validate_scale(model.kind(), cfg.scale);
  require(cfg.scale == models::model_scale(model), "train: model was built for scale " +
                                                       std::to_string(models::model_scale(model)) + ", config asks for " +
                                                       std::to_string(cfg.scale));
  std::size_t divisor = static_cast<std::size_t>(cfg.scale);
  if (model.kind() == models::ModelKind::unet) divisor *= model.config_as<models::UnetConfig>().length_divisor();
  require(cfg.patch_length % divisor == 0, "train: patch_length " + std::to_string(cfg.patch_length) +
                                               " must be divisible by " + std::to_string(divisor));
  return mode;
}

/// Minimises the chosen reconstruction loss with Adam. `model` is updated in
/// place. Passing `resume` continues from a saved optimiser state.
inline SupervisedResult train_supervised(models::Model& model, const std::vector<dsp::Signal>& corpus,
                                         const TrainConfig& cfg, const Hooks& hooks = {},
                                         const dg::AdamState* resume = nullptr) {
  cfg.validate();
  const Mode mode = resolve_mode(model, cfg);
  const LossKind loss_kind = cfg.loss.value_or(default_loss(model.kind()));
  const PairBank bank(corpus, cfg.patch_length, cfg.stride(), cfg.scale, mode);
  EpochSampler sampler(bank.size(), sampler_seed(cfg.seed));
  Rng dropout_rng(dropout_seed(cfg.seed));

  SupervisedResult out;
  if (resume) out.adam = *resume;
  out.adam.alpha = cfg.lr;
  out.adam.beta1 = cfg.beta1;
  out.adam.beta2 = cfg.beta2;
  out.adam.eps = cfg.eps;
  auto& params = model.parameters();
  for (long step = 1; step <= cfg.steps; ++step) {
    const auto [x, y] = bank.batch(sampler.next(static_cast<std::size_t>(cfg.batch_size)));
    dg::zero_grad(params);
    const dg::Tensor loss = loss_of(loss_kind, model.forward(x, true, dropout_rng), y);
    const double value = loss.item();
    if (!std::isfinite(value)) throw NumericError("train: non-finite loss " + std::to_string(value), step);
    dg::backward(loss);
    dg::adam_step(params, out.adam);
    out.log.record(step, {value});
    if (hooks.progress && cfg.log_every > 0 && step % cfg.log_every == 0) {
      *hooks.progress << "step " << step << " loss " << value << '\n';
    }
    if (hooks.checkpoint && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
      hooks.checkpoint(step, model, out.adam);
    }
  }
  return out;
}

}  // namespace audiosr::train
