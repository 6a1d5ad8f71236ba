#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "arl/errors.hpp"
#include "arl/model.hpp"
#include "arl/train.hpp"

namespace arl {

struct MetaConfig {
  double meta_learning_rate = 0.01;
  std::size_t val_batch_size = 16;
  std::size_t meta_every = 1;

  void validate() const {
    if (!(meta_learning_rate >= 0.0)) throw ConfigError("meta_learning_rate must be >= 0");
    if (val_batch_size < 1) throw ConfigError("val_batch_size must be >= 1");
    if (meta_every < 1) throw ConfigError("meta_every must be >= 1");
  }
};

/// Parameters after one inner step, plus the inner adversarial encoder
/// gradients needed for the exact one-step hypergradient.
struct LookaheadState {
  ModelState theta_prime;
  // attr -> per-encoder-parameter gradient arrays of the plain adversarial
  // cross-entropy, taken at the pre-step parameters
  std::map<Attribute, std::vector<std::vector<double>>> inner_adv_grads;
  double learning_rate = 0.0;
};

namespace detail {

/// Encoder-parameter gradients of one head's plain cross-entropy (no reversal,
/// no gamma) at the current parameters. Leaves the state's values untouched.
inline std::vector<std::vector<double>> encoder_grads_of_head_loss(
    const std::vector<const Sample*>& batch, ModelState& state, Attribute attr) {
  Graph g;
  ModelVars vars = register_params(g, state);
  std::vector<Graph::VarId> pooled;
  std::vector<std::size_t> labels;
  for (const Sample* s : batch) {
    Graph::VarId emb = encode_on_tape(g, g.constant(s->frames), vars, state);
    pooled.push_back(g.mean_rows(emb));
    labels.push_back(s->label(attr));
  }
  const auto& [w, b] = vars.heads[static_cast<std::size_t>(attr)];
  Graph::VarId logits = g.add_bias(g.matmul(g.stack_rows(pooled), w), b);
  state.zero_grads();
  g.backward(g.log_softmax_nll(logits, labels));
  std::vector<std::vector<double>> grads;
  for (const Tensor& t : state.encoder_params) grads.push_back(*t.grad);
  state.zero_grads();
  return grads;
}

}  // namespace detail

/// One lookahead step: theta' from a regular train step on a private copy,
/// with the plain adversarial encoder gradients at theta retained.
inline LookaheadState inner_step(const std::vector<const Sample*>& train_batch,
                                 const ModelState& state, const TaskConfig& cfg) {
  LookaheadState look;
  look.learning_rate = cfg.learning_rate;
  look.theta_prime = state;
  ModelState probe = state;  // gradient scratch; values never move
  for (Attribute a : adversarial_attributes(cfg.roles))
    look.inner_adv_grads[a] = detail::encoder_grads_of_head_loss(train_batch, probe, a);
  train_step(train_batch, look.theta_prime, cfg);
  return look;
}

/// Primary-task cross-entropy on a validation batch, evaluated at theta'.
inline double meta_loss(const std::vector<const Sample*>& val_batch,
                        LookaheadState& lookahead, const TaskConfig& cfg) {
  if (val_batch.empty()) throw DataError("empty validation batch");
  const Attribute primary = primary_attribute(cfg.roles);
  RoleMap task_only = {{primary, Role::primary}};
  return detail::build_batch_loss(val_batch, lookahead.theta_prime, task_only)
      .bundle.task_loss;
}

/// Exact single-step hypergradient:
///   dL_meta/dgamma_i = alpha * <grad_theta L_adv_i(train), grad_theta' L_task(val)>
/// over encoder parameters. Exact because theta' is linear in gamma and the
/// inner gradients at theta do not depend on gamma.
inline std::map<Attribute, double> hypergradient(
    LookaheadState& lookahead, const std::vector<const Sample*>& val_batch,
    const TaskConfig& cfg) {
  if (lookahead.inner_adv_grads.empty())
    throw Error("lookahead carries no retained adversarial gradients");
  if (val_batch.empty()) throw DataError("empty validation batch");
  const Attribute primary = primary_attribute(cfg.roles);
  std::vector<std::vector<double>> val_grads =
      detail::encoder_grads_of_head_loss(val_batch, lookahead.theta_prime, primary);
  std::map<Attribute, double> hg;
  for (const auto& [attr, inner] : lookahead.inner_adv_grads) {
    double dot = 0.0;
    for (std::size_t p = 0; p < inner.size(); ++p)
      for (std::size_t i = 0; i < inner[p].size(); ++i)
        dot += inner[p][i] * val_grads[p][i];
    hg[attr] = lookahead.learning_rate * dot;
  }
  return hg;
}

/// gamma_i <- clamp(gamma_i - eta * hg_i, 0, gamma_max).
inline void meta_update(ModelState& state, const std::map<Attribute, double>& hypergrad,
                        const MetaConfig& meta_cfg, double gamma_max) {
  meta_cfg.validate();
  for (const auto& [attr, h] : hypergrad) {
    if (!std::isfinite(h))
      throw DivergenceError("non-finite hypergradient for " + attribute_name(attr));
    double g = state.gamma.at(attr) - meta_cfg.meta_learning_rate * h;
    state.gamma[attr] = std::min(std::max(g, 0.0), gamma_max);
  }
}

/// One epoch of meta-mode training. Every meta_every-th step first adapts
/// gamma through a discarded lookahead, then takes the real step with the
/// updated coefficients. Validation batches cycle in a fixed seeded order.
inline std::vector<TraceRow> train_epoch_meta(const std::vector<const Sample*>& train_split,
                                              const std::vector<const Sample*>& val_split,
                                              ModelState& state, const TaskConfig& cfg,
                                              const MetaConfig& meta_cfg) {
  cfg.validate();
  meta_cfg.validate();
  if (train_split.empty()) throw DataError("empty training split");
  if (val_split.empty()) throw DataError("empty validation split");

  // fixed seeded validation order, independent of the training shuffle stream
  std::vector<std::size_t> val_order =
      epoch_shuffle(val_split.size(), cfg.seed ^ 0x5a17b3e6d4c2f901ull, 0);

  std::vector<TraceRow> trace;
  std::uint64_t step = 0;
  for (auto& batch : make_batches(train_split, cfg.batch_size, cfg.seed,
                                  state.epochs_done)) {
    if (state.steps_done % meta_cfg.meta_every == 0 && !state.gamma.empty()) {
      LookaheadState look = inner_step(batch, state, cfg);
      // cursor derived from the step counter so runs resume deterministically
      const std::uint64_t k = state.steps_done / meta_cfg.meta_every;
      std::vector<const Sample*> val_batch;
      for (std::size_t i = 0; i < meta_cfg.val_batch_size; ++i)
        val_batch.push_back(
            val_split[val_order[(k * meta_cfg.val_batch_size + i) % val_order.size()]]);
      meta_update(state, hypergradient(look, val_batch, cfg), meta_cfg, cfg.gamma_max);
    }
    LossBundle bundle = train_step(batch, state, cfg);
    trace.push_back({state.epochs_done, step++, std::move(bundle), state.gamma});
  }
  state.epochs_done += 1;
  return trace;
}

}  // namespace arl
