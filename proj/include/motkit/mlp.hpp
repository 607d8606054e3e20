// mlp.hpp: minimal fully-connected network with explicit backprop and a
// flat binary weight format. Double precision in memory; 32-bit floats on
// disk.
#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "motkit/geometry.hpp"

namespace motkit {

enum class OutputKind : std::uint32_t { Sigmoid = 1, Linear = 2 };

struct ModelIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Fully-connected ReLU network. Weights are stored flat, layer by layer,
/// row-major (out x (in+1)) with the bias in the last column of each row.
struct MlpModel {
  std::vector<int> layer_dims;  // [in, hidden..., out]
  std::vector<double> weights;
  OutputKind output = OutputKind::Sigmoid;
  std::uint32_t flags = 0;  // bit 0: trained as an offline post-pass model

  static constexpr std::uint32_t kOfflineFlag = 1u;

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  int layer_count() const { return static_cast<int>(layer_dims.size()) - 1; }

  static std::size_t weight_count(const std::vector<int>& dims) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
      n += static_cast<std::size_t>(dims[l + 1]) * (dims[l] + 1);
    return n;
  }

  std::size_t layer_offset(int layer) const {
    std::size_t off = 0;
    for (int l = 0; l < layer; ++l)
      off += static_cast<std::size_t>(layer_dims[l + 1]) * (layer_dims[l] + 1);
    return off;
  }

  double& at(int layer, int out, int in_or_bias) {
    return weights[layer_offset(layer) +
                   static_cast<std::size_t>(out) * (layer_dims[layer] + 1) +
                   in_or_bias];
  }
  double at(int layer, int out, int in_or_bias) const {
    return weights[layer_offset(layer) +
                   static_cast<std::size_t>(out) * (layer_dims[layer] + 1) +
                   in_or_bias];
  }

  static MlpModel zeros(std::vector<int> dims, OutputKind out) {
    MlpModel m;
    m.layer_dims = std::move(dims);
    m.weights.assign(weight_count(m.layer_dims), 0.0);
    m.output = out;
    return m;
  }

  /// Glorot-uniform init: +-sqrt(6 / (fan_in + fan_out)), biases zero.
  static MlpModel random_init(std::vector<int> dims, OutputKind out,
                              std::uint64_t seed) {
    MlpModel m = zeros(std::move(dims), out);
    std::mt19937_64 rng(seed);
    for (int l = 0; l < m.layer_count(); ++l) {
      const int fan_in = m.layer_dims[l];
      const int fan_out = m.layer_dims[l + 1];
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (int o = 0; o < fan_out; ++o)
        for (int i = 0; i < fan_in; ++i) m.at(l, o, i) = u(rng);
    }
    return m;
  }
};

/// Intermediate activations kept for backprop. activations[0] is the input;
/// activations[l+1] is the post-nonlinearity output of layer l.
struct MlpTrace {
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> preacts;  // pre-nonlinearity per layer
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline std::vector<double> mlp_forward(const MlpModel& m,
                                       const std::vector<double>& input,
                                       MlpTrace* trace = nullptr) {
  if (static_cast<int>(input.size()) != m.input_dim())
    throw DimensionMismatch("mlp input length " + std::to_string(input.size()) +
                            " != " + std::to_string(m.input_dim()));
  std::vector<double> act = input;
  if (trace) {
    trace->activations.assign(1, act);
    trace->preacts.clear();
  }
  for (int l = 0; l < m.layer_count(); ++l) {
    const int n_in = m.layer_dims[l];
    const int n_out = m.layer_dims[l + 1];
    std::vector<double> z(n_out);
    const double* w = m.weights.data() + m.layer_offset(l);
    for (int o = 0; o < n_out; ++o) {
      const double* row = w + static_cast<std::size_t>(o) * (n_in + 1);
      double s = row[n_in];  // bias
      for (int i = 0; i < n_in; ++i) s += row[i] * act[i];
      z[o] = s;
    }
    if (trace) trace->preacts.push_back(z);
    const bool last = (l == m.layer_count() - 1);
    std::vector<double> out(n_out);
    for (int o = 0; o < n_out; ++o) {
      if (!last)
        out[o] = z[o] > 0.0 ? z[o] : 0.0;  // relu
      else if (m.output == OutputKind::Sigmoid)
        out[o] = sigmoid(z[o]);
      else
        out[o] = z[o];
    }
    act = std::move(out);
    if (trace) trace->activations.push_back(act);
  }
  return act;
}

/// Backprop: given dL/d(output) (after the output nonlinearity), accumulate
/// dL/dweights into `grad_weights` (same layout as model.weights) and, if
/// requested, write dL/dinput.
inline void mlp_backward(const MlpModel& m, const MlpTrace& trace,
                         const std::vector<double>& grad_output,
                         std::vector<double>& grad_weights,
                         std::vector<double>* grad_input = nullptr) {
  if (grad_weights.size() != m.weights.size())
    grad_weights.assign(m.weights.size(), 0.0);
  std::vector<double> delta = grad_output;  // dL/d(post-activation)
  for (int l = m.layer_count() - 1; l >= 0; --l) {
    const int n_in = m.layer_dims[l];
    const int n_out = m.layer_dims[l + 1];
    const bool last = (l == m.layer_count() - 1);
    const std::vector<double>& z = trace.preacts[l];
    // chain through this layer's nonlinearity: delta becomes dL/dz
    for (int o = 0; o < n_out; ++o) {
      if (!last) {
        if (z[o] <= 0.0) delta[o] = 0.0;
      } else if (m.output == OutputKind::Sigmoid) {
        const double s = sigmoid(z[o]);
        delta[o] *= s * (1.0 - s);
      }
    }
    const std::vector<double>& prev = trace.activations[l];
    double* gw = grad_weights.data() + m.layer_offset(l);
    for (int o = 0; o < n_out; ++o) {
      double* row = gw + static_cast<std::size_t>(o) * (n_in + 1);
      for (int i = 0; i < n_in; ++i) row[i] += delta[o] * prev[i];
      row[n_in] += delta[o];
    }
    if (l > 0 || grad_input) {
      std::vector<double> next_delta(n_in, 0.0);
      const double* w = m.weights.data() + m.layer_offset(l);
      for (int o = 0; o < n_out; ++o) {
        const double* row = w + static_cast<std::size_t>(o) * (n_in + 1);
        for (int i = 0; i < n_in; ++i) next_delta[i] += delta[o] * row[i];
      }
      if (l == 0) {
        if (grad_input) *grad_input = std::move(next_delta);
        break;
      }
      delta = std::move(next_delta);
    }
  }
}

// ---------------------------------------------------------------------------
// Flat binary model file:
//   "MKMD" | u32 version | u32 flags | u32 hidden_act | u32 output_act |
//   u32 n_dims | u32 dims[n_dims] | f32 weights[...]
// All integers and floats little-endian. Hidden activation id 1 = relu.

namespace detail {
inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}
inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw ModelIoError("model file truncated");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}
}  // namespace detail

inline void save_model(const MlpModel& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ModelIoError("cannot open for write: " + path);
  os.write("MKMD", 4);
  detail::put_u32(os, 1);  // version
  detail::put_u32(os, m.flags);
  detail::put_u32(os, 1);  // hidden activation: relu
  detail::put_u32(os, static_cast<std::uint32_t>(m.output));
  detail::put_u32(os, static_cast<std::uint32_t>(m.layer_dims.size()));
  for (int d : m.layer_dims) detail::put_u32(os, static_cast<std::uint32_t>(d));
  for (double wd : m.weights) {
    const float wf = static_cast<float>(wd);
    std::uint32_t bits = std::bit_cast<std::uint32_t>(wf);
    detail::put_u32(os, bits);
  }
  if (!os) throw ModelIoError("write failed: " + path);
}

inline MlpModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ModelIoError("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "MKMD", 4) != 0)
    throw ModelIoError("bad magic in " + path);
  const std::uint32_t version = detail::get_u32(is);
  if (version != 1) throw ModelIoError("unsupported model version");
  MlpModel m;
  m.flags = detail::get_u32(is);
  const std::uint32_t hidden_act = detail::get_u32(is);
  if (hidden_act != 1) throw ModelIoError("unknown hidden activation id");
  const std::uint32_t out_act = detail::get_u32(is);
  if (out_act != 1 && out_act != 2) throw ModelIoError("unknown output id");
  m.output = static_cast<OutputKind>(out_act);
  const std::uint32_t n_dims = detail::get_u32(is);
  if (n_dims < 2 || n_dims > 64) throw ModelIoError("implausible layer count");
  m.layer_dims.resize(n_dims);
  for (auto& d : m.layer_dims) d = static_cast<int>(detail::get_u32(is));
  const std::size_t n_w = MlpModel::weight_count(m.layer_dims);
  m.weights.resize(n_w);
  for (auto& wd : m.weights) {
    const std::uint32_t bits = detail::get_u32(is);
    wd = static_cast<double>(std::bit_cast<float>(bits));
  }
  return m;
}

}  // namespace motkit
