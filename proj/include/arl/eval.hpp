#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "arl/data.hpp"
#include "arl/errors.hpp"
#include "arl/model.hpp"
#include "arl/tensor.hpp"

namespace arl {

struct ClassMetrics {
  std::size_t support = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  double accuracy = 0.0;
  double precision = 0.0;  // macro, over classes with support
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<std::vector<double>> confusion;  // row-normalized percentages
  std::vector<ClassMetrics> per_class;
  std::vector<bool> zero_support;  // flagged classes excluded from macros
};

inline EvalReport evaluate(const std::vector<std::size_t>& predictions,
                           const std::vector<std::size_t>& labels, std::size_t c) {
  if (predictions.size() != labels.size())
    throw DataError("evaluate: " + std::to_string(predictions.size()) +
                    " predictions vs " + std::to_string(labels.size()) + " labels");
  if (predictions.empty()) throw DataError("evaluate: empty input");
  std::vector<std::vector<std::size_t>> counts(c, std::vector<std::size_t>(c, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] >= c || labels[i] >= c)
      throw DataError("evaluate: class index out of range at position " +
                      std::to_string(i));
    counts[labels[i]][predictions[i]] += 1;
    if (predictions[i] == labels[i]) ++correct;
  }

  EvalReport rep;
  rep.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  rep.per_class.resize(c);
  rep.zero_support.resize(c, false);
  rep.confusion.assign(c, std::vector<double>(c, 0.0));

  std::size_t active = 0;
  for (std::size_t k = 0; k < c; ++k) {
    std::size_t support = 0, predicted = 0;
    for (std::size_t j = 0; j < c; ++j) {
      support += counts[k][j];
      predicted += counts[j][k];
    }
    ClassMetrics& m = rep.per_class[k];
    m.support = support;
    if (support == 0) {
      rep.zero_support[k] = true;
      continue;
    }
    ++active;
    const double tp = static_cast<double>(counts[k][k]);
    m.precision = predicted == 0 ? 0.0 : tp / static_cast<double>(predicted);
    m.recall = tp / static_cast<double>(support);
    m.f1 = (m.precision + m.recall) == 0.0
               ? 0.0
               : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    rep.precision += m.precision;
    rep.recall += m.recall;
    rep.f1 += m.f1;
    for (std::size_t j = 0; j < c; ++j)
      rep.confusion[k][j] =
          100.0 * static_cast<double>(counts[k][j]) / static_cast<double>(support);
  }
  if (active > 0) {
    rep.precision /= static_cast<double>(active);
    rep.recall /= static_cast<double>(active);
    rep.f1 /= static_cast<double>(active);
  }
  return rep;
}

/// Model predictions for one attribute over a sample set.
inline std::vector<std::size_t> predict(const ModelState& state,
                                        const std::vector<const Sample*>& samples,
                                        Attribute attr) {
  std::vector<std::size_t> preds;
  preds.reserve(samples.size());
  for (const Sample* s : samples) {
    Tensor probs = pool_and_classify(encode(s->frames, state), state.head(attr));
    preds.push_back(static_cast<std::size_t>(
        std::max_element(probs.values.begin(), probs.values.end()) -
        probs.values.begin()));
  }
  return preds;
}

inline EvalReport evaluate_model(const ModelState& state,
                                 const std::vector<const Sample*>& samples,
                                 Attribute attr) {
  if (samples.empty()) throw DataError("evaluate_model: empty sample set");
  std::vector<std::size_t> labels;
  for (const Sample* s : samples) labels.push_back(s->label(attr));
  return evaluate(predict(state, samples, attr), labels, num_classes(attr));
}

/// How much attribute information the frozen encoder retains: a fresh linear
/// head is trained on mean-pooled encoder outputs (fixed 200 full-batch epochs)
/// over a seeded 80/20 sub-split; returns accuracy on the held 20%.
inline double probe(const ModelState& state, const std::vector<const Sample*>& samples,
                    Attribute attr, std::uint64_t seed = 0) {
  if (samples.size() < 5) throw DataError("probe needs at least 5 samples");
  const std::size_t d = state.encoder_config.hidden_dim;
  const std::size_t c = num_classes(attr);

  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed ^ 0x70b3c5d1e9f82467ull);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_train = (samples.size() * 8) / 10;

  Tensor train_x = Tensor::zeros({n_train, d});
  std::vector<std::size_t> train_y;
  Tensor held_x = Tensor::zeros({samples.size() - n_train, d});
  std::vector<std::size_t> held_y;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Sample* s = samples[order[i]];
    Tensor pooled = mean_pool(encode(s->frames, state));
    if (i < n_train) {
      std::copy(pooled.values.begin(), pooled.values.end(),
                train_x.values.begin() + i * d);
      train_y.push_back(s->label(attr));
    } else {
      std::copy(pooled.values.begin(), pooled.values.end(),
                held_x.values.begin() + (i - n_train) * d);
      held_y.push_back(s->label(attr));
    }
  }

  Tensor w = Tensor::zeros({d, c});
  Tensor b = Tensor::zeros({c});
  const double lr = 0.5;
  for (int epoch = 0; epoch < 200; ++epoch) {
    Graph g;
    Graph::VarId logits =
        g.add_bias(g.matmul(g.constant(train_x), g.leaf(&w)), g.leaf(&b));
    w.zero_grad();
    b.zero_grad();
    g.backward(g.log_softmax_nll(logits, train_y));
    for (std::size_t i = 0; i < w.values.size(); ++i) w.values[i] -= lr * (*w.grad)[i];
    for (std::size_t i = 0; i < b.values.size(); ++i) b.values[i] -= lr * (*b.grad)[i];
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < held_y.size(); ++i) {
    std::size_t best = 0;
    double best_z = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      double z = b.values[j];
      for (std::size_t k = 0; k < d; ++k) z += held_x.at(i, k) * w.at(k, j);
      if (z > best_z) {
        best_z = z;
        best = j;
      }
    }
    if (best == held_y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(held_y.size());
}

/// Results table with per-attribute role markers (↑ primary, ↓ adversarial,
/// ✗ unused) and percent metrics to two decimals.
inline std::string render_results_table(
    const std::vector<std::tuple<std::string, RoleMap, EvalReport>>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "Model" << std::setw(9) << "Dialect" << std::setw(8)
     << "Gender" << std::setw(7) << "Age" << std::right << std::setw(7) << "Acc."
     << std::setw(7) << "P" << std::setw(7) << "R" << std::setw(7) << "F1" << "\n";
  auto marker = [](const RoleMap& roles, Attribute a) -> std::string {
    auto it = roles.find(a);
    if (it == roles.end() || it->second == Role::off) return "✗";
    return it->second == Role::primary ? "↑" : "↓";
  };
  auto pct = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * v;
    return s.str();
  };
  for (const auto& [name, roles, rep] : rows) {
    primary_attribute(roles);
    // UTF-8 markers are 3 bytes; pad manually so columns stay aligned
    os << std::left << std::setw(24) << name;
    os << marker(roles, Attribute::dialect) << std::string(8, ' ');
    os << marker(roles, Attribute::gender) << std::string(7, ' ');
    os << marker(roles, Attribute::age) << std::string(6, ' ');
    os << std::right << std::setw(7) << pct(rep.accuracy) << std::setw(7)
       << pct(rep.precision) << std::setw(7) << pct(rep.recall) << std::setw(7)
       << pct(rep.f1) << "\n";
  }
  return os.str();
}

/// Row-normalized confusion percentages, one decimal per cell.
inline void confusion_csv(const EvalReport& report,
                          const std::vector<std::string>& names,
                          const std::string& path) {
  if (names.size() != report.confusion.size())
    throw DimensionError("confusion_csv: " + std::to_string(names.size()) +
                         " names for " + std::to_string(report.confusion.size()) +
                         " classes");
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for write: " + path);
  f << "true_class";
  for (const std::string& n : names) f << "," << n;
  f << "\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    f << names[i];
    for (double v : report.confusion[i]) f << "," << std::fixed << std::setprecision(1) << v;
    f << "\n";
  }
  if (!f) throw IoError("write failed: " + path);
}

}  // namespace arl
