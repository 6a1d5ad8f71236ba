#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "arl/data.hpp"
#include "arl/errors.hpp"
#include "arl/tensor.hpp"

namespace arl {

enum class Role { primary, adversarial, off };

using RoleMap = std::map<Attribute, Role>;

inline Attribute primary_attribute(const RoleMap& roles) {
  int count = 0;
  Attribute found = Attribute::dialect;
  for (const auto& [attr, role] : roles)
    if (role == Role::primary) {
      found = attr;
      ++count;
    }
  if (count != 1)
    throw ConfigError("exactly one primary attribute required, got " +
                      std::to_string(count));
  return found;
}

inline std::vector<Attribute> adversarial_attributes(const RoleMap& roles) {
  std::vector<Attribute> out;
  for (Attribute a : kAttributes) {
    auto it = roles.find(a);
    if (it != roles.end() && it->second == Role::adversarial) out.push_back(a);
  }
  return out;
}

struct EncoderConfig {
  std::size_t input_dim = 16;
  std::size_t hidden_dim = 32;
  std::size_t num_layers = 2;

  void validate() const {
    if (input_dim < 1 || hidden_dim < 1 || num_layers < 1)
      throw ConfigError("encoder dimensions must be >= 1");
  }
};

struct Head {
  Attribute attribute = Attribute::dialect;
  Tensor weights;  // [D x C]
  Tensor bias;     // [C]
};

/// Encoder parameters, three classification heads, adversarial coefficients.
struct ModelState {
  EncoderConfig encoder_config;
  std::vector<Tensor> encoder_params;  // per layer: weights [d_in x d_out], bias [d_out]
  std::array<Head, 3> heads;           // indexed by Attribute order
  std::map<Attribute, double> gamma;
  std::uint64_t seed = 0;
  std::uint64_t epochs_done = 0;
  std::uint64_t steps_done = 0;

  Head& head(Attribute a) { return heads[static_cast<std::size_t>(a)]; }
  const Head& head(Attribute a) const { return heads[static_cast<std::size_t>(a)]; }

  std::vector<Tensor*> all_params() {
    std::vector<Tensor*> out;
    for (Tensor& t : encoder_params) out.push_back(&t);
    for (Head& h : heads) {
      out.push_back(&h.weights);
      out.push_back(&h.bias);
    }
    return out;
  }

  void zero_grads() {
    for (Tensor* t : all_params()) t->zero_grad();
  }
};

inline ModelState init_model(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelState state;
  state.encoder_config = cfg;
  state.seed = seed;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  auto randn = [&rng](std::size_t n, double scale) {
    std::normal_distribution<double> dist(0.0, scale);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
  };
  std::size_t d_in = cfg.input_dim;
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const std::size_t d_out = cfg.hidden_dim;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_in));
    state.encoder_params.emplace_back(std::vector<std::size_t>{d_in, d_out},
                                      randn(d_in * d_out, scale));
    state.encoder_params.push_back(Tensor::zeros({d_out}));
    d_in = d_out;
  }
  for (Attribute a : kAttributes) {
    Head& h = state.head(a);
    h.attribute = a;
    const std::size_t c = num_classes(a);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
    h.weights = Tensor({cfg.hidden_dim, c}, randn(cfg.hidden_dim * c, scale));
    h.bias = Tensor::zeros({c});
  }
  return state;
}

/// Tape handles for all trainable parameters of one forward pass.
struct ModelVars {
  std::vector<Graph::VarId> encoder;
  std::array<std::pair<Graph::VarId, Graph::VarId>, 3> heads;  // (weights, bias)
};

inline ModelVars register_params(Graph& g, ModelState& state) {
  ModelVars vars;
  for (Tensor& t : state.encoder_params) vars.encoder.push_back(g.leaf(&t));
  for (Attribute a : kAttributes) {
    Head& h = state.head(a);
    vars.heads[static_cast<std::size_t>(a)] = {g.leaf(&h.weights), g.leaf(&h.bias)};
  }
  return vars;
}

/// Frame-wise (affine, tanh) stack on the tape: [T x D_in] -> [T x D].
inline Graph::VarId encode_on_tape(Graph& g, Graph::VarId frames, const ModelVars& vars,
                                   const ModelState& state) {
  const Tensor& f = g.value(frames);
  if (f.cols() != state.encoder_config.input_dim)
    throw DimensionError("encode: frame width " + std::to_string(f.cols()) +
                         " != input_dim " +
                         std::to_string(state.encoder_config.input_dim));
  if (f.rows() < 1) throw DataError("encode: empty sequence");
  Graph::VarId h = frames;
  for (std::size_t l = 0; l < state.encoder_config.num_layers; ++l) {
    h = g.matmul(h, vars.encoder[2 * l]);
    h = g.add_bias(h, vars.encoder[2 * l + 1]);
    h = g.tanh(h);
  }
  return h;
}

/// Gradient-free forward convenience (probing, inspection).
inline Tensor encode(const Tensor& frames, const ModelState& state) {
  Graph g;
  ModelState copy = state;  // leaf registration wants mutable params
  ModelVars vars = register_params(g, copy);
  return g.value(encode_on_tape(g, g.constant(frames), vars, copy));
}

inline Tensor mean_pool(const Tensor& frames) {
  Graph g;
  return g.value(g.mean_rows(g.constant(frames)));
}

inline std::vector<double> softmax(const std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - mx));
  for (double& v : p) v /= s;
  return p;
}

/// Mean pooling followed by softmax(theta * e + b): [T x D] -> [C] probabilities.
inline Tensor pool_and_classify(const Tensor& embeddings, const Head& head) {
  if (embeddings.cols() != head.weights.rows())
    throw DimensionError("pool_and_classify: embedding width " +
                         std::to_string(embeddings.cols()) + " != head dim " +
                         std::to_string(head.weights.rows()));
  Tensor pooled = mean_pool(embeddings);
  const std::size_t c = head.weights.cols();
  std::vector<double> z(c, 0.0);
  for (std::size_t j = 0; j < c; ++j) {
    z[j] = head.bias.values[j];
    for (std::size_t d = 0; d < pooled.size(); ++d)
      z[j] += pooled.values[d] * head.weights.at(d, j);
  }
  return Tensor({c}, softmax(z));
}

/// Per-attribute [1 x C] logits for one utterance. Adversarial branches pass
/// through a gradient-reversal node between the encoder and the pooling.
inline std::map<Attribute, Graph::VarId> forward_all(Graph& g, Graph::VarId frames,
                                                     const ModelVars& vars,
                                                     const ModelState& state,
                                                     const RoleMap& roles) {
  primary_attribute(roles);  // validates exactly-one-primary
  Graph::VarId emb = encode_on_tape(g, frames, vars, state);
  std::map<Attribute, Graph::VarId> logits;
  for (const auto& [attr, role] : roles) {
    if (role == Role::off) continue;
    Graph::VarId branch = emb;
    if (role == Role::adversarial) branch = g.grad_reverse(branch, 1.0);
    Graph::VarId pooled = g.mean_rows(branch);
    const auto& [w, b] = vars.heads[static_cast<std::size_t>(attr)];
    Graph::VarId row = g.stack_rows({pooled});
    logits[attr] = g.add_bias(g.matmul(row, w), b);
  }
  return logits;
}

// ---------------------------------------------------------------------------
// Checkpoint: magic "ARLCKPT1", u32 version, encoder config, parameter arrays
// with shapes, gamma values, RNG counters. All integers little-endian.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}
inline void put_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), 8);
}
inline void put_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), 8);
}
inline std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
inline std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
inline double get_f64(std::istream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

inline void put_tensor(std::ostream& os, const Tensor& t) {
  put_u32(os, static_cast<std::uint32_t>(t.shape.size()));
  for (std::size_t d : t.shape) put_u32(os, static_cast<std::uint32_t>(d));
  for (double v : t.values) put_f64(os, v);
}

inline Tensor get_tensor(std::istream& is) {
  const std::uint32_t ndim = get_u32(is);
  std::vector<std::size_t> shape(ndim);
  for (auto& d : shape) d = get_u32(is);
  std::vector<double> vals(Tensor::element_count(shape));
  for (double& v : vals) v = get_f64(is);
  return Tensor(std::move(shape), std::move(vals));
}

}  // namespace detail

inline void save_checkpoint(const ModelState& state, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for write: " + path);
  f.write("ARLCKPT1", 8);
  detail::put_u32(f, 1);  // version
  detail::put_u32(f, static_cast<std::uint32_t>(state.encoder_config.input_dim));
  detail::put_u32(f, static_cast<std::uint32_t>(state.encoder_config.hidden_dim));
  detail::put_u32(f, static_cast<std::uint32_t>(state.encoder_config.num_layers));
  detail::put_u32(f, static_cast<std::uint32_t>(state.encoder_params.size()));
  for (const Tensor& t : state.encoder_params) detail::put_tensor(f, t);
  for (const Head& h : state.heads) {
    detail::put_u32(f, static_cast<std::uint32_t>(h.attribute));
    detail::put_tensor(f, h.weights);
    detail::put_tensor(f, h.bias);
  }
  detail::put_u32(f, static_cast<std::uint32_t>(state.gamma.size()));
  for (const auto& [attr, g] : state.gamma) {
    detail::put_u32(f, static_cast<std::uint32_t>(attr));
    detail::put_f64(f, g);
  }
  detail::put_u64(f, state.seed);
  detail::put_u64(f, state.epochs_done);
  detail::put_u64(f, state.steps_done);
  if (!f) throw IoError("write failed: " + path);
}

inline ModelState load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::string(magic, 8) != "ARLCKPT1")
    throw ParseError("bad checkpoint magic in " + path);
  if (detail::get_u32(f) != 1) throw ParseError("unsupported checkpoint version in " + path);
  ModelState state;
  state.encoder_config.input_dim = detail::get_u32(f);
  state.encoder_config.hidden_dim = detail::get_u32(f);
  state.encoder_config.num_layers = detail::get_u32(f);
  const std::uint32_t n_enc = detail::get_u32(f);
  for (std::uint32_t i = 0; i < n_enc; ++i)
    state.encoder_params.push_back(detail::get_tensor(f));
  for (Head& h : state.heads) {
    h.attribute = static_cast<Attribute>(detail::get_u32(f));
    h.weights = detail::get_tensor(f);
    h.bias = detail::get_tensor(f);
  }
  const std::uint32_t n_gamma = detail::get_u32(f);
  for (std::uint32_t i = 0; i < n_gamma; ++i) {
    const Attribute a = static_cast<Attribute>(detail::get_u32(f));
    state.gamma[a] = detail::get_f64(f);
  }
  state.seed = detail::get_u64(f);
  state.epochs_done = detail::get_u64(f);
  state.steps_done = detail::get_u64(f);
  if (!f) throw ParseError("truncated checkpoint: " + path);
  return state;
}

}  // namespace arl
