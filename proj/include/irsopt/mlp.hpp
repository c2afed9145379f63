#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "irsopt/rng.hpp"
#include "irsopt/vendor_json.hpp"

namespace irsopt {

// Gradient accumulator shape-matched to an Mlp.
struct MlpGradients {
  struct LayerGrad {
    std::vector<double> w;  // row-major, out x in
    std::vector<double> b;
  };
  std::vector<LayerGrad> layers;

  void zero() {
    for (auto& l : layers) {
      std::fill(l.w.begin(), l.w.end(), 0.0);
      std::fill(l.b.begin(), l.b.end(), 0.0);
    }
  }
};

// Fully connected network with tanh hidden activations and a linear output
// layer. Forward caches activations for exact reverse-mode gradients.
class Mlp {
 public:
  struct Layer {
    int in = 0;
    int out = 0;
    std::vector<double> w;  // row-major, out x in
    std::vector<double> b;
  };

  // Per-input cache of a forward pass; required by backward().
  struct Cache {
    std::vector<std::vector<double>> activations;  // input of each layer
    std::vector<double> output;
    bool valid = false;
  };

  Mlp() = default;

  // dims = {input, hidden..., output}. Hidden weights use orthogonal rows/
  // columns scaled by sqrt(2); the output layer uses `head_gain`.
  Mlp(const std::vector<int>& dims, std::uint64_t seed, double head_gain = 1.0) {
    if (dims.size() < 2) throw std::invalid_argument("need input and output dims");
    std::mt19937_64 rng{splitmix64(seed)};
    layers_.resize(dims.size() - 1);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      const bool last = (l + 2 == dims.size());
      layers_[l].in = dims[l];
      layers_[l].out = dims[l + 1];
      layers_[l].w = orthogonal_matrix(dims[l + 1], dims[l],
                                       last ? head_gain : std::sqrt(2.0), rng);
      layers_[l].b.assign(static_cast<std::size_t>(dims[l + 1]), 0.0);
    }
  }

  int input_dim() const { return layers_.front().in; }
  int output_dim() const { return layers_.back().out; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  std::vector<double> forward(std::span<const double> x) const {
    Cache scratch;
    return forward(x, scratch);
  }

  std::vector<double> forward(std::span<const double> x, Cache& cache) const {
    if (static_cast<int>(x.size()) != input_dim())
      throw std::invalid_argument("input dimension mismatch");
    cache.activations.assign(layers_.size(), {});
    std::vector<double> cur(x.begin(), x.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      cache.activations[l] = cur;
      cur = affine(layers_[l], cur);
      if (l + 1 < layers_.size())
        for (double& v : cur) v = std::tanh(v);
    }
    cache.output = cur;
    cache.valid = true;
    return cur;
  }

  // Accumulates d(loss)/d(params) into `grads` given d(loss)/d(output).
  void backward(const Cache& cache, std::span<const double> d_output,
                MlpGradients& grads) const {
    if (!cache.valid) throw std::logic_error("backward called with stale cache");
    if (static_cast<int>(d_output.size()) != output_dim())
      throw std::invalid_argument("output gradient dimension mismatch");
    ensure_shape(grads);
    std::vector<double> delta(d_output.begin(), d_output.end());
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const Layer& layer = layers_[li];
      const std::vector<double>& input = cache.activations[li];
      if (li + 1 < layers_.size()) {
        // delta currently holds dL/d(tanh output of this layer); the cached
        // input of the NEXT layer is that tanh output.
        const std::vector<double>& act = cache.activations[li + 1];
        for (int o = 0; o < layer.out; ++o)
          delta[o] *= 1.0 - act[o] * act[o];
      }
      auto& g = grads.layers[li];
      for (int o = 0; o < layer.out; ++o) {
        const double d = delta[o];
        g.b[o] += d;
        double* grow = g.w.data() + static_cast<std::size_t>(o) * layer.in;
        for (int i = 0; i < layer.in; ++i) grow[i] += d * input[i];
      }
      if (li == 0) break;
      std::vector<double> prev(static_cast<std::size_t>(layer.in), 0.0);
      for (int o = 0; o < layer.out; ++o) {
        const double d = delta[o];
        const double* wrow = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
        for (int i = 0; i < layer.in; ++i) prev[i] += d * wrow[i];
      }
      delta = std::move(prev);
    }
  }

  // Gradient-ascent step: params += lr * grads.
  void sgd_step(const MlpGradients& grads, double learning_rate) {
    check_shape(grads);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      auto& layer = layers_[l];
      const auto& g = grads.layers[l];
      for (std::size_t i = 0; i < layer.w.size(); ++i)
        layer.w[i] += learning_rate * g.w[i];
      for (std::size_t i = 0; i < layer.b.size(); ++i)
        layer.b[i] += learning_rate * g.b[i];
    }
  }

  MlpGradients make_gradients() const {
    MlpGradients g;
    g.layers.resize(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      g.layers[l].w.assign(layers_[l].w.size(), 0.0);
      g.layers[l].b.assign(layers_[l].b.size(), 0.0);
    }
    return g;
  }

  // Flat parameter access, used by finite-difference checks.
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.w.size() + l.b.size();
    return n;
  }
  double get_parameter(std::size_t idx) const {
    return *locate(const_cast<Mlp&>(*this), idx);
  }
  void set_parameter(std::size_t idx, double value) { *locate(*this, idx) = value; }
  double gradient_at(const MlpGradients& g, std::size_t idx) const {
    std::size_t off = idx;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (off < g.layers[l].w.size()) return g.layers[l].w[off];
      off -= g.layers[l].w.size();
      if (off < g.layers[l].b.size()) return g.layers[l].b[off];
      off -= g.layers[l].b.size();
    }
    throw std::out_of_range("parameter index");
  }

  nlohmann::json to_json() const {
    nlohmann::json dims = nlohmann::json::array();
    dims.push_back(input_dim());
    for (const auto& l : layers_) dims.push_back(l.out);
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : layers_)
      layers.push_back({{"rows", l.out}, {"cols", l.in}, {"w", l.w}, {"b", l.b}});
    return {{"dims", dims}, {"layers", layers}};
  }

  static Mlp from_json(const nlohmann::json& j) {
    Mlp net;
    const auto& layers = j.at("layers");
    net.layers_.resize(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& layer = net.layers_[l];
      layer.out = layers[l].at("rows").get<int>();
      layer.in = layers[l].at("cols").get<int>();
      layer.w = layers[l].at("w").get<std::vector<double>>();
      layer.b = layers[l].at("b").get<std::vector<double>>();
      if (layer.w.size() != static_cast<std::size_t>(layer.in) * layer.out ||
          layer.b.size() != static_cast<std::size_t>(layer.out))
        throw std::invalid_argument("corrupt network record");
      if (l > 0 && net.layers_[l - 1].out != layer.in)
        throw std::invalid_argument("inconsistent layer dimensions");
    }
    return net;
  }

 private:
  static std::vector<double> affine(const Layer& layer,
                                    const std::vector<double>& x) {
    std::vector<double> y(static_cast<std::size_t>(layer.out));
    for (int o = 0; o < layer.out; ++o) {
      const double* wrow = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
      double acc = layer.b[o];
      for (int i = 0; i < layer.in; ++i) acc += wrow[i] * x[i];
      y[o] = acc;
    }
    return y;
  }

  // Gram-Schmidt over the shorter side of a Gaussian matrix, scaled by gain.
  static std::vector<double> orthogonal_matrix(int rows, int cols, double gain,
                                               std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const bool by_rows = rows <= cols;
    const int nvec = by_rows ? rows : cols;
    const int len = by_rows ? cols : rows;
    std::vector<std::vector<double>> v(nvec, std::vector<double>(len));
    for (auto& vec : v)
      for (double& x : vec) x = normal(rng);
    for (int i = 0; i < nvec; ++i) {
      for (int j = 0; j < i; ++j) {
        double dot = 0.0;
        for (int k = 0; k < len; ++k) dot += v[i][k] * v[j][k];
        for (int k = 0; k < len; ++k) v[i][k] -= dot * v[j][k];
      }
      double norm = 0.0;
      for (double x : v[i]) norm += x * x;
      norm = std::sqrt(norm);
      if (norm < 1e-12) {
        for (double& x : v[i]) x = normal(rng);
        --i;
        continue;
      }
      for (double& x : v[i]) x /= norm;
    }
    std::vector<double> w(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        w[static_cast<std::size_t>(r) * cols + c] =
            gain * (by_rows ? v[r][c] : v[c][r]);
    return w;
  }

  void ensure_shape(MlpGradients& g) const {
    if (g.layers.empty()) g = make_gradients();
    check_shape(g);
  }
  void check_shape(const MlpGradients& g) const {
    if (g.layers.size() != layers_.size())
      throw std::invalid_argument("gradient/parameter shape mismatch");
    for (std::size_t l = 0; l < layers_.size(); ++l)
      if (g.layers[l].w.size() != layers_[l].w.size() ||
          g.layers[l].b.size() != layers_[l].b.size())
        throw std::invalid_argument("gradient/parameter shape mismatch");
  }

  static double* locate(Mlp& net, std::size_t idx) {
    std::size_t off = idx;
    for (auto& l : net.layers_) {
      if (off < l.w.size()) return &l.w[off];
      off -= l.w.size();
      if (off < l.b.size()) return &l.b[off];
      off -= l.b.size();
    }
    throw std::out_of_range("parameter index");
  }

  std::vector<Layer> layers_;
};

// Adam moment buffers, kept by the trainer when the non-default optimizer is
// selected.
struct AdamState {
  MlpGradients m;
  MlpGradients v;
  long t = 0;
};

inline void adam_step(Mlp& net, const MlpGradients& grads, AdamState& state,
                      double learning_rate, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
  if (state.m.layers.empty()) {
    state.m = net.make_gradients();
    state.v = net.make_gradients();
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(beta1, state.t);
  const double bc2 = 1.0 - std::pow(beta2, state.t);
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto& layer = net.layers()[l];
    auto step_span = [&](std::vector<double>& p, const std::vector<double>& g,
                         std::vector<double>& m, std::vector<double>& v) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        p[i] += learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
      }
    };
    step_span(layer.w, grads.layers[l].w, state.m.layers[l].w, state.v.layers[l].w);
    step_span(layer.b, grads.layers[l].b, state.m.layers[l].b, state.v.layers[l].b);
  }
}

}  // namespace irsopt
