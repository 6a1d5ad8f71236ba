#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "arl/errors.hpp"

namespace arl {

/// Dense row-major double tensor with an optional gradient buffer.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::optional<std::vector<double>> grad;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> v)
      : shape(std::move(s)), values(std::move(v)) {
    if (element_count(shape) != values.size()) {
      throw DimensionError("tensor value count " + std::to_string(values.size()) +
                           " does not match shape " + shape_string(shape));
    }
  }

  static std::size_t element_count(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

  static std::string shape_string(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
  }

  static Tensor zeros(std::vector<std::size_t> s) {
    std::size_t n = element_count(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  std::size_t size() const { return values.size(); }
  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

  void zero_grad() { grad.reset(); }

  void accumulate_grad(const std::vector<double>& g) {
    if (!grad) grad.emplace(values.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) (*grad)[i] += g[i];
  }

  bool all_finite() const {
    return std::all_of(values.begin(), values.end(),
                       [](double v) { return std::isfinite(v); });
  }
};

/// Reverse-mode tape. Built fresh for every forward pass; one backward per tape.
class Graph {
 public:
  using VarId = std::size_t;

  Graph() = default;
  // Backward closures hold a pointer to this graph; pin it in place.
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Registers a parameter leaf. After backward(), the accumulated gradient
  /// is flushed into param->grad (additively).
  VarId leaf(Tensor* param) {
    VarId id = push(Tensor(param->shape, param->values));
    leaves_.push_back({id, param});
    return id;
  }

  /// A value the tape will not differentiate into (inputs, labels-as-data).
  VarId constant(Tensor value) { return push(std::move(value)); }

  const Tensor& value(VarId id) const { return slots_[id].value; }

  /// Gradient of the last backward() target w.r.t. this variable.
  const std::vector<double>& grad_of(VarId id) const { return slots_[id].grad; }

  VarId matmul(VarId a, VarId b) {
    const Tensor& ta = slots_[a].value;
    const Tensor& tb = slots_[b].value;
    if (ta.shape.size() != 2 || tb.shape.size() != 2 || ta.shape[1] != tb.shape[0]) {
      throw DimensionError("matmul shape mismatch: " + Tensor::shape_string(ta.shape) +
                           " vs " + Tensor::shape_string(tb.shape));
    }
    const std::size_t m = ta.shape[0], k = ta.shape[1], n = tb.shape[1];
    Tensor out = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ta.values[i * k + p];
        for (std::size_t j = 0; j < n; ++j)
          out.values[i * n + j] += av * tb.values[p * n + j];
      }
    VarId id = push(std::move(out));
    nodes_.push_back([this, a, b, id, m, k, n] {
      const auto& g = slots_[id].grad;
      const auto& av = slots_[a].value.values;
      const auto& bv = slots_[b].value.values;
      auto& ga = slots_[a].grad;
      auto& gb = slots_[b].grad;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = g[i * n + j];
          for (std::size_t p = 0; p < k; ++p) {
            ga[i * k + p] += gij * bv[p * n + j];
            gb[p * n + j] += gij * av[i * k + p];
          }
        }
    });
    return id;
  }

  /// Row-broadcast bias add: [R x C] + [C].
  VarId add_bias(VarId m, VarId bias) {
    const Tensor& tm = slots_[m].value;
    const Tensor& tb = slots_[bias].value;
    if (tm.shape.size() != 2 || tb.size() != tm.shape[1]) {
      throw DimensionError("add_bias shape mismatch: " + Tensor::shape_string(tm.shape) +
                           " vs " + Tensor::shape_string(tb.shape));
    }
    const std::size_t r = tm.shape[0], c = tm.shape[1];
    Tensor out = tm;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out.values[i * c + j] += tb.values[j];
    VarId id = push(std::move(out));
    nodes_.push_back([this, m, bias, id, r, c] {
      const auto& g = slots_[id].grad;
      auto& gm = slots_[m].grad;
      auto& gb = slots_[bias].grad;
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
          gm[i * c + j] += g[i * c + j];
          gb[j] += g[i * c + j];
        }
    });
    return id;
  }

  VarId tanh(VarId x) {
    Tensor out = slots_[x].value;
    for (double& v : out.values) v = std::tanh(v);
    VarId id = push(std::move(out));
    nodes_.push_back([this, x, id] {
      const auto& g = slots_[id].grad;
      const auto& y = slots_[id].value.values;
      auto& gx = slots_[x].grad;
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
    });
    return id;
  }

  /// Mean over the time (row) axis: [T x D] -> [D]. T must be >= 1.
  VarId mean_rows(VarId x) {
    const Tensor& tx = slots_[x].value;
    if (tx.shape.size() != 2) {
      throw DimensionError("mean_rows expects a 2-d tensor, got " +
                           Tensor::shape_string(tx.shape));
    }
    const std::size_t t = tx.shape[0], d = tx.shape[1];
    if (t == 0) throw DataError("mean_rows: empty sequence (T = 0)");
    Tensor out = Tensor::zeros({d});
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < d; ++j) out.values[j] += tx.values[i * d + j];
    for (double& v : out.values) v /= static_cast<double>(t);
    VarId id = push(std::move(out));
    nodes_.push_back([this, x, id, t, d] {
      const auto& g = slots_[id].grad;
      auto& gx = slots_[x].grad;
      const double inv = 1.0 / static_cast<double>(t);
      for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[j] * inv;
    });
    return id;
  }

  /// Stacks B vectors of width D into a [B x D] matrix.
  VarId stack_rows(const std::vector<VarId>& rows) {
    if (rows.empty()) throw DataError("stack_rows: empty row list");
    const std::size_t d = slots_[rows[0]].value.size();
    Tensor out = Tensor::zeros({rows.size(), d});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Tensor& r = slots_[rows[i]].value;
      if (r.size() != d)
        throw DimensionError("stack_rows: inconsistent row width " +
                             Tensor::shape_string(r.shape));
      std::copy(r.values.begin(), r.values.end(), out.values.begin() + i * d);
    }
    VarId id = push(std::move(out));
    nodes_.push_back([this, rows, id, d] {
      const auto& g = slots_[id].grad;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        auto& gr = slots_[rows[i]].grad;
        for (std::size_t j = 0; j < d; ++j) gr[j] += g[i * d + j];
      }
    });
    return id;
  }

  /// Mean negative log-likelihood under softmax: [B x C] logits -> scalar.
  /// Stabilized by per-row max subtraction.
  VarId log_softmax_nll(VarId logits, const std::vector<std::size_t>& labels) {
    const Tensor& tl = slots_[logits].value;
    if (tl.shape.size() != 2)
      throw DimensionError("log_softmax_nll expects [B x C] logits, got " +
                           Tensor::shape_string(tl.shape));
    const std::size_t b = tl.shape[0], c = tl.shape[1];
    if (labels.size() != b)
      throw DimensionError("log_softmax_nll: " + std::to_string(labels.size()) +
                           " labels for batch of " + std::to_string(b));
    for (std::size_t i = 0; i < b; ++i)
      if (labels[i] >= c)
        throw LabelError("label " + std::to_string(labels[i]) + " out of range [0, " +
                         std::to_string(c) + ") at batch index " + std::to_string(i));
    // softmax rows are cached for the backward rule
    std::vector<double> probs(b * c);
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      const double* row = &tl.values[i * c];
      const double mx = *std::max_element(row, row + c);
      double z = 0.0;
      for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
      const double logz = std::log(z);
      for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - mx) / z;
      loss -= (row[labels[i]] - mx) - logz;
    }
    loss /= static_cast<double>(b);
    VarId id = push(Tensor::scalar(loss));
    nodes_.push_back([this, logits, id, labels, probs = std::move(probs), b, c] {
      const double g = slots_[id].grad[0] / static_cast<double>(b);
      auto& gl = slots_[logits].grad;
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < c; ++j) {
          const double onehot = (j == labels[i]) ? 1.0 : 0.0;
          gl[i * c + j] += g * (probs[i * c + j] - onehot);
        }
    });
    return id;
  }

  /// Identity forward; backward multiplies the upstream gradient by -gamma.
  VarId grad_reverse(VarId x, double gamma) {
    if (!(gamma >= 0.0))
      throw CoefficientError("grad_reverse: negative coefficient " + std::to_string(gamma));
    VarId id = push(slots_[x].value);
    nodes_.push_back([this, x, id, gamma] {
      const auto& g = slots_[id].grad;
      auto& gx = slots_[x].grad;
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += -gamma * g[i];
    });
    return id;
  }

  VarId add(VarId a, VarId b) {
    const Tensor& ta = slots_[a].value;
    const Tensor& tb = slots_[b].value;
    if (ta.shape != tb.shape)
      throw DimensionError("add shape mismatch: " + Tensor::shape_string(ta.shape) +
                           " vs " + Tensor::shape_string(tb.shape));
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += tb.values[i];
    VarId id = push(std::move(out));
    nodes_.push_back([this, a, b, id] {
      const auto& g = slots_[id].grad;
      auto& ga = slots_[a].grad;
      auto& gb = slots_[b].grad;
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i];
        gb[i] += g[i];
      }
    });
    return id;
  }

  VarId mul(VarId a, VarId b) {
    const Tensor& ta = slots_[a].value;
    const Tensor& tb = slots_[b].value;
    if (ta.shape != tb.shape)
      throw DimensionError("mul shape mismatch: " + Tensor::shape_string(ta.shape) +
                           " vs " + Tensor::shape_string(tb.shape));
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] *= tb.values[i];
    VarId id = push(std::move(out));
    nodes_.push_back([this, a, b, id] {
      const auto& g = slots_[id].grad;
      const auto& av = slots_[a].value.values;
      const auto& bv = slots_[b].value.values;
      auto& ga = slots_[a].grad;
      auto& gb = slots_[b].grad;
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i] * bv[i];
        gb[i] += g[i] * av[i];
      }
    });
    return id;
  }

  VarId scale(VarId x, double factor) {
    Tensor out = slots_[x].value;
    for (double& v : out.values) v *= factor;
    VarId id = push(std::move(out));
    nodes_.push_back([this, x, id, factor] {
      const auto& g = slots_[id].grad;
      auto& gx = slots_[x].grad;
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
    });
    return id;
  }

  VarId sum(VarId x) {
    double s = 0.0;
    for (double v : slots_[x].value.values) s += v;
    VarId id = push(Tensor::scalar(s));
    nodes_.push_back([this, x, id] {
      const double g = slots_[id].grad[0];
      auto& gx = slots_[x].grad;
      for (double& v : gx) v += g;
    });
    return id;
  }

  /// Reverse sweep from a scalar loss. One backward per graph; leaf parameter
  /// gradients are flushed into the registered Tensors' grad buffers.
  void backward(VarId loss) {
    if (spent_) throw GraphReuseError("backward called twice on the same graph");
    const Tensor& tl = slots_[loss].value;
    if (tl.size() != 1)
      throw RankError("backward target must be scalar, got shape " +
                      Tensor::shape_string(tl.shape));
    spent_ = true;
    slots_[loss].grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    for (const auto& [id, param] : leaves_) param->accumulate_grad(slots_[id].grad);
  }

 private:
  struct Slot {
    Tensor value;
    std::vector<double> grad;
  };

  VarId push(Tensor t) {
    Slot s;
    s.grad.assign(t.size(), 0.0);
    s.value = std::move(t);
    slots_.push_back(std::move(s));
    return slots_.size() - 1;
  }

  std::vector<Slot> slots_;
  std::vector<std::function<void()>> nodes_;
  std::vector<std::pair<VarId, Tensor*>> leaves_;
  bool spent_ = false;
};

}  // namespace arl
