#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "audiosr/diffgraph.hpp"
#include "audiosr/models/checkpoint.hpp"
#include "audiosr/models/model.hpp"
#include "audiosr/train/supervised.hpp"

namespace audiosr::train {

using CriticFn = std::function<dg::Tensor(const dg::Tensor&)>;

struct PenaltyTerms {
  dg::Tensor x_hat;    // interpolation points, a leaf requiring grad
  dg::Tensor norms;    // (b, 1, 1) input-gradient norms
  dg::Tensor penalty;  // scalar mean of (norm - 1)^2
};

/// Interpolates x_hat = eps x + (1 - eps) x_tilde per batch item and
/// returns mean_b (||grad_x_hat D(x_hat)_b||_2 - 1)^2 as a recorded graph, so
/// a backward pass reaches the critic parameters.
inline PenaltyTerms gradient_penalty(const CriticFn& critic, const dg::Tensor& x, const dg::Tensor& x_tilde,
                                     const std::vector<double>& eps) {
  require(x.defined() && x_tilde.defined() && x.shape() == x_tilde.shape(),
          "gradient_penalty: real and generated batches differ in shape");
  require(x.rank() == 3, "gradient_penalty: expected (batch, channels, length) tensors");
  require(eps.size() == x.dim(0), "gradient_penalty: need one interpolation weight per batch item");
  const std::size_t per = x.dim(1) * x.dim(2);
  std::vector<double> v(x.numel());
  const auto xr = x.data();
  const auto xg = x_tilde.data();
  for (std::size_t b = 0; b < x.dim(0); ++b) {
    require(eps[b] >= 0.0 && eps[b] <= 1.0, "gradient_penalty: eps must lie in [0, 1]");
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) v[i] = eps[b] * xr[i] + (1.0 - eps[b]) * xg[i];
  }
  PenaltyTerms out;
  out.x_hat = dg::Tensor(x.shape(), std::move(v), true);
  // items are scored independently, so the gradient of the summed scores
  // holds every item's own input gradient
  const dg::Tensor g = dg::input_gradient(dg::sum_all(critic(out.x_hat)), out.x_hat);
  out.norms = dg::sqrt(dg::sum_item(dg::square(g)));
  out.penalty = dg::mean_all(dg::square(dg::add_scalar(out.norms, -1.0)));
  return out;
}

struct CriticObjective {
  dg::Tensor loss;
  dg::Tensor d_real;
  dg::Tensor d_fake;
  PenaltyTerms gp;
};

/// mean D(x_tilde) - mean D(x) + lambda * penalty.
inline CriticObjective critic_objective(const CriticFn& critic, const dg::Tensor& x, const dg::Tensor& x_tilde,
                                        const std::vector<double>& eps, double lambda) {
  CriticObjective o;
  o.d_real = dg::mean_all(critic(x));
  o.d_fake = dg::mean_all(critic(x_tilde));
  o.gp = gradient_penalty(critic, x, x_tilde, eps);
  o.loss = dg::add(dg::sub(o.d_fake, o.d_real), dg::scale(o.gp.penalty, lambda));
  return o;
}

inline std::vector<double> draw_eps(Rng& rng, std::size_t n) {
  std::vector<double> e(n);
  for (double& v : e) v = rng.uniform();
  return e;
}

struct GanResult {
  TrainLog log{{"critic_loss", "penalty", "wasserstein", "generator_loss"}};
  dg::AdamState generator_adam;
  dg::AdamState critic_adam;
  long critic_steps = 0;
  long generator_steps = 0;
};

struct GanHooks {
  std::function<void(long step, const models::Model& gen, const models::Model& critic)> checkpoint;
  std::ostream* progress = nullptr;
};

/// Copies parameters of a supervised checkpoint into `gen`.
inline void warm_start(models::Model& gen, const std::string& path) {
  const models::Checkpoint ck = models::load_checkpoint(path, gen.kind());
  const models::Model src = ck.to_model();
  require(src.parameters().size() == gen.parameters().size(),
          "warm start: checkpoint architecture differs from the generator");
  for (std::size_t i = 0; i < src.parameters().size(); ++i) {
    const auto& a = src.parameters()[i];
    auto& b = gen.parameters()[i];
    if (a.name != b.name || a.tensor.shape() != b.tensor.shape())
      throw DataError(path + ": parameter '" + a.name + "' does not match the generator");
    auto dst = b.tensor.mutable_data();
    std::copy(a.tensor.values().begin(), a.tensor.values().end(), dst.begin());
  }
}

/// Adversarial training with a gradient-penalised critic. Each outer step
/// runs n_critic critic updates on
///   mean D(G(l)) - mean D(x) + lambda * penalty
/// followed by one generator update on
///   -mean D(G(l)) + content_weight * l1(G(l), x).
inline GanResult train_wgan_gp(models::Model& gen, models::Model& critic, const std::vector<dsp::Signal>& corpus,
                               const GanConfig& cfg, const GanHooks& hooks = {}) {
  cfg.validate();
  require(critic.kind() == models::ModelKind::critic, "train-gan: second model must be a critic");
  const Mode mode = resolve_mode(gen, cfg.base);
  require(mode == Mode::pre, "train-gan: the generator must be a pre-upsampling model");
  if (!cfg.warm_start.empty()) warm_start(gen, cfg.warm_start);

  const PairBank bank(corpus, cfg.base.patch_length, cfg.base.stride(), cfg.base.scale, mode);
  EpochSampler sampler(bank.size(), sampler_seed(cfg.base.seed));
  Rng gen_rng(dropout_seed(cfg.base.seed));
  Rng critic_rng(critic_seed(cfg.base.seed));
  const auto m = static_cast<std::size_t>(cfg.base.batch_size);

  GanResult out;
  for (auto* s : {&out.generator_adam, &out.critic_adam}) {
    s->alpha = cfg.base.lr;
    s->beta1 = cfg.base.beta1;
    s->beta2 = cfg.base.beta2;
    s->eps = cfg.base.eps;
  }
  auto& gp = gen.parameters();
  auto& cp = critic.parameters();
  const CriticFn score = [&](const dg::Tensor& t) { return critic.forward(t, true, critic_rng); };
  auto check = [](double v, const char* what, long step) {
    if (!std::isfinite(v)) throw NumericError(std::string("train-gan: non-finite ") + what, step);
  };

  for (long step = 1; step <= cfg.base.steps; ++step) {
    double critic_loss = 0.0, penalty = 0.0, wdist = 0.0;
    for (int t = 0; t < cfg.n_critic; ++t) {
      const auto [l, x] = bank.batch(sampler.next(m));
      dg::Tensor fake;
      {
        dg::NoGradGuard ng;
        fake = gen.forward(l, true, gen_rng).detach();
      }
      dg::zero_grad(cp);
      const CriticObjective obj = critic_objective(score, x, fake, draw_eps(critic_rng, m), cfg.lambda);
      critic_loss = obj.loss.item();
      penalty = obj.gp.penalty.item();
      wdist = obj.d_real.item() - obj.d_fake.item();
      check(critic_loss, "critic loss", step);
      check(penalty, "gradient penalty", step);
      dg::backward(obj.loss);
      dg::adam_step(cp, out.critic_adam);
      ++out.critic_steps;
    }

    const auto [l, x] = bank.batch(sampler.next(m));
    dg::zero_grad(gp);
    const dg::Tensor g = gen.forward(l, true, gen_rng);
    dg::Tensor loss = dg::scale(dg::mean_all(score(g)), -1.0);
    if (cfg.content_weight > 0.0) loss = dg::add(loss, dg::scale(dg::l1_loss(g, x), cfg.content_weight));
    const double gen_loss = loss.item();
    check(gen_loss, "generator loss", step);
    dg::backward(loss);
    dg::adam_step(gp, out.generator_adam);
    ++out.generator_steps;

    out.log.record(step, {critic_loss, penalty, wdist, gen_loss});
    if (hooks.progress && cfg.base.log_every > 0 && step % cfg.base.log_every == 0) {
      *hooks.progress << "step " << step << " critic " << critic_loss << " penalty " << penalty << " generator "
                      << gen_loss << '\n';
    }
    if (hooks.checkpoint && cfg.base.checkpoint_every > 0 && step % cfg.base.checkpoint_every == 0) {
      hooks.checkpoint(step, gen, critic);
    }
  }
  return out;
}

}  // namespace audiosr::train
