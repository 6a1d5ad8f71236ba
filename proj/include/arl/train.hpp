#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "arl/data.hpp"
#include "arl/errors.hpp"
#include "arl/model.hpp"
#include "arl/tensor.hpp"

namespace arl {

struct TaskConfig {
  RoleMap roles;
  double learning_rate = 0.05;
  std::map<Attribute, double> gamma_init;  // missing adversarial attrs default below
  double default_gamma_init = 0.1;
  double gamma_max = 10.0;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;

  void validate() const {
    primary_attribute(roles);
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
    if (!(gamma_max > 0.0)) throw ConfigError("gamma_max must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    for (const auto& [attr, g] : gamma_init) {
      (void)attr;
      if (g < 0.0 || g > gamma_max)
        throw ConfigError("gamma_init outside [0, gamma_max]");
    }
    if (default_gamma_init < 0.0 || default_gamma_init > gamma_max)
      throw ConfigError("gamma_init outside [0, gamma_max]");
  }

  double initial_gamma(Attribute a) const {
    auto it = gamma_init.find(a);
    return it == gamma_init.end() ? default_gamma_init : it->second;
  }
};

/// Initializes the gamma table of a model for the given role configuration.
inline void attach_gammas(ModelState& state, const TaskConfig& cfg) {
  state.gamma.clear();
  for (Attribute a : adversarial_attributes(cfg.roles))
    state.gamma[a] = cfg.initial_gamma(a);
}

struct LossBundle {
  double task_loss = 0.0;
  std::vector<std::pair<Attribute, double>> adv_losses;  // plain cross-entropies
  double combined = 0.0;  // task + sum_i gamma_i * adv_i
};

namespace detail {

/// One forward pass over a batch: the tape, parameter handles, the combined
/// scalar target, and the reported losses. The adversarial branches carry a
/// unit-strength reversal node; gamma scales each adversarial term of the
/// combined loss, so the encoder sees -gamma * grad and each adversarial head
/// sees gamma * its own plain gradient.
struct BatchLoss {
  std::unique_ptr<Graph> graph;
  ModelVars vars;
  Graph::VarId combined = 0;
  LossBundle bundle;
};

inline BatchLoss build_batch_loss(const std::vector<const Sample*>& batch,
                                  ModelState& state, const RoleMap& roles) {
  if (batch.empty()) throw DataError("empty batch");
  const Attribute primary = primary_attribute(roles);
  const std::vector<Attribute> adv = adversarial_attributes(roles);

  BatchLoss out;
  out.graph = std::make_unique<Graph>();
  Graph& g = *out.graph;
  out.vars = register_params(g, state);

  std::map<Attribute, std::vector<Graph::VarId>> pooled;
  std::map<Attribute, std::vector<std::size_t>> labels;
  std::vector<Attribute> active = {primary};
  active.insert(active.end(), adv.begin(), adv.end());

  for (const Sample* s : batch) {
    Graph::VarId emb = encode_on_tape(g, g.constant(s->frames), out.vars, state);
    for (Attribute a : active) {
      Graph::VarId branch = emb;
      if (a != primary) branch = g.grad_reverse(branch, 1.0);
      pooled[a].push_back(g.mean_rows(branch));
      labels[a].push_back(s->label(a));
    }
  }

  auto head_loss = [&](Attribute a) {
    const auto& [w, b] = out.vars.heads[static_cast<std::size_t>(a)];
    Graph::VarId logits = g.add_bias(g.matmul(g.stack_rows(pooled[a]), w), b);
    return g.log_softmax_nll(logits, labels[a]);
  };

  Graph::VarId task = head_loss(primary);
  out.bundle.task_loss = g.value(task).values[0];
  Graph::VarId combined = task;
  for (Attribute a : adv) {
    const double gamma = state.gamma.at(a);
    Graph::VarId adv_loss = head_loss(a);
    out.bundle.adv_losses.emplace_back(a, g.value(adv_loss).values[0]);
    combined = g.add(combined, g.scale(adv_loss, gamma));
  }
  out.combined = combined;
  out.bundle.combined = g.value(combined).values[0];
  return out;
}

inline void check_labels(const std::vector<const Sample*>& batch, const RoleMap& roles) {
  for (const Sample* s : batch) {
    for (const auto& [attr, role] : roles) {
      if (role == Role::off) continue;
      if (s->label(attr) >= num_classes(attr))
        throw DataError("sample " + s->id + " has no valid " + attribute_name(attr) +
                        " label");
    }
  }
}

}  // namespace detail

inline LossBundle compute_losses(const std::vector<const Sample*>& batch,
                                 ModelState& state, const TaskConfig& cfg) {
  cfg.validate();
  detail::check_labels(batch, cfg.roles);
  return detail::build_batch_loss(batch, state, cfg.roles).bundle;
}

/// One SGD step on the combined loss. Encoder parameters move along
/// grad(task) - sum_i gamma_i * grad(adv_i); heads descend their own losses.
inline LossBundle train_step(const std::vector<const Sample*>& batch, ModelState& state,
                             const TaskConfig& cfg) {
  cfg.validate();
  detail::check_labels(batch, cfg.roles);
  detail::BatchLoss bl = detail::build_batch_loss(batch, state, cfg.roles);
  if (!std::isfinite(bl.bundle.combined))
    throw DivergenceError("non-finite loss at step " + std::to_string(state.steps_done));
  state.zero_grads();
  bl.graph->backward(bl.combined);
  for (Tensor* p : state.all_params()) {
    const auto& grad = *p->grad;
    for (std::size_t i = 0; i < p->values.size(); ++i)
      p->values[i] -= cfg.learning_rate * grad[i];
  }
  state.steps_done += 1;
  return bl.bundle;
}

struct TraceRow {
  std::uint64_t epoch = 0;
  std::uint64_t step = 0;
  LossBundle losses;
  std::map<Attribute, double> gamma;
};

inline std::vector<std::size_t> epoch_shuffle(std::size_t n, std::uint64_t seed,
                                              std::uint64_t epoch) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed * 0x100000001b3ull + epoch + 0xcbf29ce484222325ull);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

inline std::vector<std::vector<const Sample*>> make_batches(
    const std::vector<const Sample*>& split, std::size_t batch_size, std::uint64_t seed,
    std::uint64_t epoch) {
  std::vector<std::size_t> idx = epoch_shuffle(split.size(), seed, epoch);
  std::vector<std::vector<const Sample*>> batches;
  for (std::size_t start = 0; start < idx.size(); start += batch_size) {
    std::vector<const Sample*> batch;
    for (std::size_t i = start; i < std::min(start + batch_size, idx.size()); ++i)
      batch.push_back(split[idx[i]]);
    batches.push_back(std::move(batch));
  }
  return batches;
}

/// One pass over the training split with a deterministic per-epoch shuffle.
inline std::vector<TraceRow> train_epoch(const std::vector<const Sample*>& split,
                                         ModelState& state, const TaskConfig& cfg) {
  if (split.empty()) throw DataError("empty training split");
  std::vector<TraceRow> trace;
  std::uint64_t step = 0;
  for (auto& batch : make_batches(split, cfg.batch_size, cfg.seed, state.epochs_done)) {
    LossBundle bundle = train_step(batch, state, cfg);
    trace.push_back({state.epochs_done, step++, std::move(bundle), state.gamma});
  }
  state.epochs_done += 1;
  return trace;
}

inline void write_trace_header(std::ostream& os, const TaskConfig& cfg) {
  os << "epoch,step,task_loss";
  for (Attribute a : adversarial_attributes(cfg.roles))
    os << ",adv_loss_" << attribute_name(a);
  for (Attribute a : adversarial_attributes(cfg.roles))
    os << ",gamma_" << attribute_name(a);
  os << "\n";
}

inline void write_trace_rows(std::ostream& os, const std::vector<TraceRow>& rows) {
  for (const TraceRow& r : rows) {
    os << r.epoch << "," << r.step << "," << r.losses.task_loss;
    for (const auto& [attr, loss] : r.losses.adv_losses) {
      (void)attr;
      os << "," << loss;
    }
    for (const auto& [attr, gamma] : r.gamma) {
      (void)attr;
      os << "," << gamma;
    }
    os << "\n";
  }
}

}  // namespace arl
