#pragma once

#include <functional>
#include <random>
#include <vector>

#include "arl/model.hpp"
#include "arl/synth.hpp"
#include "arl/train.hpp"

namespace arl::testing {

/// Central finite differences of a scalar functional over one tensor's entries.
inline std::vector<double> finite_diff(Tensor& t, const std::function<double()>& eval,
                                       double h = 1e-5) {
  std::vector<double> grad(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double orig = t.values[i];
    t.values[i] = orig + h;
    const double up = eval();
    t.values[i] = orig - h;
    const double down = eval();
    t.values[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

inline double max_rel_err(const std::vector<double>& got, const std::vector<double>& want) {
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double scale = std::max(1.0, std::abs(want[i]));
    worst = std::max(worst, std::abs(got[i] - want[i]) / scale);
  }
  return worst;
}

inline Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                            double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values) v = dist(rng);
  return t;
}

/// Small random model plus a labeled batch for gradient checks.
struct Instance {
  ModelState state;
  CorpusManifest corpus;
  std::vector<const Sample*> batch;
};

inline Instance random_instance(std::mt19937_64& rng, std::size_t batch_size = 3,
                                std::size_t d_in = 4, std::size_t d_hidden = 5) {
  Instance inst;
  EncoderConfig ec{d_in, d_hidden, 2};
  inst.state = init_model(ec, rng());
  std::uniform_int_distribution<std::size_t> t_dist(1, 4);
  for (std::size_t i = 0; i < batch_size; ++i) {
    Sample s;
    s.id = "s" + std::to_string(i);
    s.speaker_id = "spk" + std::to_string(i);
    s.frames = random_tensor({t_dist(rng), d_in}, rng);
    s.dialect = rng() % 2;
    s.gender = rng() % 2;
    s.age = rng() % 5;
    s.duration_seconds = 1.0;
    inst.corpus.samples.push_back(std::move(s));
  }
  for (const Sample& s : inst.corpus.samples) inst.batch.push_back(&s);
  return inst;
}

/// Combined-loss value at the current parameters (fresh tape each call).
inline double combined_loss_value(Instance& inst, const RoleMap& roles) {
  return detail::build_batch_loss(inst.batch, inst.state, roles).bundle.combined;
}

}  // namespace arl::testing
