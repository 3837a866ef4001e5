#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "terraincl/error.hpp"
#include "terraincl/rng.hpp"

namespace terraincl {

inline constexpr double kLogStdMin = -4.0;
inline constexpr double kLogStdMax = 1.0;
inline constexpr double kLogStdInit = -1.0;
inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

struct NetShape {
  std::size_t obs_dim = 235;
  std::vector<std::size_t> hidden{512, 256, 128};
  std::size_t act_dim = 12;

  friend bool operator==(const NetShape&, const NetShape&) = default;
};

// Weights + biases of both stacks plus one log-std per action dimension.
inline std::size_t parameter_count(const NetShape& s) {
  auto stack = [&](std::size_t out_dim) {
    std::size_t n = 0, in = s.obs_dim;
    for (std::size_t h : s.hidden) {
      n += h * in + h;
      in = h;
    }
    return n + out_dim * in + out_dim;
  };
  return stack(s.act_dim) + stack(1) + s.act_dim;
}

struct LayerSlice {
  std::size_t weight = 0;  // offset of the out x in column-major weight block
  std::size_t bias = 0;
  std::size_t in = 0;
  std::size_t out = 0;
};

template <typename T>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Activations kept from a forward pass for the backward pass.
template <typename T>
struct MlpCache {
  std::vector<MatrixX<T>> input;  // input[l] feeds layer l
  std::vector<MatrixX<T>> pre;    // pre-activation of layer l
  MatrixX<T> output;
};

template <typename T>
inline T elu(T x) {
  return x > T(0) ? x : std::expm1(x);
}

// ELU derivative expressed through the pre-activation.
template <typename T>
inline T elu_grad(T x) {
  return x > T(0) ? T(1) : std::exp(x);
}

// Diagonal Gaussian over actions.
template <typename T>
T log_prob(std::span<const T> mean, std::span<const T> log_std, std::span<const T> action) {
  T lp = 0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const T z = (action[i] - mean[i]) * std::exp(-log_std[i]);
    lp += T(-0.5) * z * z - log_std[i] - T(kHalfLog2Pi);
  }
  return lp;
}

template <typename T>
T entropy(std::span<const T> log_std) {
  T h = 0;
  for (T ls : log_std) h += T(0.5) + T(kHalfLog2Pi) + ls;
  return h;
}

// Actor-critic MLP with separate stacks and ELU hidden activations. All
// parameters live in one flat vector in declared layer order: actor layers
// (weight, bias), critic layers (weight, bias), log-std.
template <typename T>
class ActorCritic {
 public:
  using Matrix = MatrixX<T>;
  using Vector = VectorX<T>;

  ActorCritic() : ActorCritic(NetShape{}) {}

  explicit ActorCritic(NetShape shape) : shape_(std::move(shape)) {
    if (shape_.obs_dim == 0 || shape_.act_dim == 0) throw ParamError("policy: dimensions must be positive");
    std::size_t offset = 0;
    auto build = [&](std::vector<LayerSlice>& layers, std::size_t out_dim) {
      std::size_t in = shape_.obs_dim;
      auto add = [&](std::size_t out) {
        layers.push_back({offset, offset + out * in, in, out});
        offset += out * in + out;
        in = out;
      };
      for (std::size_t h : shape_.hidden) add(h);
      add(out_dim);
    };
    build(actor_, shape_.act_dim);
    build(critic_, 1);
    log_std_offset_ = offset;
    offset += shape_.act_dim;
    params_.assign(offset, T(0));
    if (params_.size() != parameter_count(shape_)) throw Fault("policy: parameter layout mismatch");
    for (std::size_t i = 0; i < shape_.act_dim; ++i) params_[log_std_offset_ + i] = T(kLogStdInit);
  }

  // Orthogonal init (gain sqrt 2) for hidden layers, 0.01 for output layers,
  // zero biases, log-std at its initial value.
  void initialize(std::uint64_t seed) {
    CounterRng rng(seed);
    auto init_stack = [&](const std::vector<LayerSlice>& layers) {
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const double gain = (l + 1 == layers.size()) ? 0.01 : std::numbers::sqrt2;
        const auto& L = layers[l];
        const std::size_t big = std::max(L.in, L.out), small = std::min(L.in, L.out);
        Eigen::MatrixXd g(big, small);
        for (Eigen::Index c = 0; c < g.cols(); ++c)
          for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = rng.normal();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
        // Fix the sign ambiguity of QR so the result is uniformly distributed.
        const Eigen::MatrixXd rmat = qr.matrixQR().topRows(small).template triangularView<Eigen::Upper>();
        for (std::size_t c = 0; c < small; ++c)
          if (rmat(c, c) < 0) q.col(static_cast<Eigen::Index>(c)) *= -1.0;
        Eigen::MatrixXd w = (L.out >= L.in) ? q : Eigen::MatrixXd(q.transpose());
        auto dst = weight(L);
        for (Eigen::Index c = 0; c < dst.cols(); ++c)
          for (Eigen::Index r = 0; r < dst.rows(); ++r) dst(r, c) = static_cast<T>(gain * w(r, c));
        bias(L).setZero();
      }
    };
    init_stack(actor_);
    init_stack(critic_);
    for (std::size_t i = 0; i < shape_.act_dim; ++i) params_[log_std_offset_ + i] = T(kLogStdInit);
  }

  const NetShape& shape() const { return shape_; }
  std::span<T> params() { return params_; }
  std::span<const T> params() const { return params_; }
  std::size_t size() const { return params_.size(); }
  const std::vector<LayerSlice>& actor_layers() const { return actor_; }
  const std::vector<LayerSlice>& critic_layers() const { return critic_; }
  std::size_t log_std_offset() const { return log_std_offset_; }
  std::span<const T> log_std() const {
    return std::span<const T>(params_).subspan(log_std_offset_, shape_.act_dim);
  }

  void clamp_log_std() {
    for (std::size_t i = 0; i < shape_.act_dim; ++i) {
      T& v = params_[log_std_offset_ + i];
      v = std::clamp(v, T(kLogStdMin), T(kLogStdMax));
    }
  }

  void check_finite() const {
    for (T v : params_)
      if (!std::isfinite(v)) throw Fault("policy: non-finite parameter");
  }

  Eigen::Map<Matrix> weight(const LayerSlice& L) {
    return Eigen::Map<Matrix>(params_.data() + L.weight, static_cast<Eigen::Index>(L.out),
                              static_cast<Eigen::Index>(L.in));
  }
  Eigen::Map<const Matrix> weight(const LayerSlice& L) const {
    return Eigen::Map<const Matrix>(params_.data() + L.weight, static_cast<Eigen::Index>(L.out),
                                    static_cast<Eigen::Index>(L.in));
  }
  Eigen::Map<Vector> bias(const LayerSlice& L) {
    return Eigen::Map<Vector>(params_.data() + L.bias, static_cast<Eigen::Index>(L.out));
  }
  Eigen::Map<const Vector> bias(const LayerSlice& L) const {
    return Eigen::Map<const Vector>(params_.data() + L.bias, static_cast<Eigen::Index>(L.out));
  }

  // Batched forward through one stack; x is obs_dim x batch (one column per sample).
  template <typename Derived>
  void forward_stack(const std::vector<LayerSlice>& layers, const Eigen::MatrixBase<Derived>& x,
                     MlpCache<T>& cache) const {
    if (static_cast<std::size_t>(x.rows()) != shape_.obs_dim) throw Fault("policy: observation size mismatch");
    cache.input.resize(layers.size());
    cache.pre.resize(layers.size());
    cache.input[0] = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& L = layers[l];
      Matrix& z = cache.pre[l];
      z.noalias() = weight(L) * cache.input[l];
      z.colwise() += bias(L);
      if (l + 1 < layers.size()) {
        cache.input[l + 1] = (z.array() > T(0)).select(z.array(), z.array().exp() - T(1)).matrix();
      } else {
        cache.output = z;
      }
    }
  }

  // Reverse pass for one stack: accumulates into grad (same layout as params).
  void backward_stack(const std::vector<LayerSlice>& layers, const MlpCache<T>& cache, Matrix upstream,
                      std::span<T> grad) const {
    if (grad.size() != params_.size()) throw Fault("policy: gradient buffer size mismatch");
    if (upstream.rows() != cache.output.rows() || upstream.cols() != cache.output.cols())
      throw Fault("policy: upstream gradient shape mismatch");
    for (std::size_t l = layers.size(); l-- > 0;) {
      const auto& L = layers[l];
      if (l + 1 < layers.size()) {
        // ELU'(z) = 1 for z > 0, else exp(z) = elu(z) + 1.
        upstream.array() *= (cache.pre[l].array() > T(0)).select(T(1), cache.input[l + 1].array() + T(1));
      }
      Eigen::Map<Matrix> gw(grad.data() + L.weight, static_cast<Eigen::Index>(L.out),
                            static_cast<Eigen::Index>(L.in));
      Eigen::Map<Vector> gb(grad.data() + L.bias, static_cast<Eigen::Index>(L.out));
      gw.noalias() += upstream * cache.input[l].transpose();
      // Reduce into an owned (aligned) vector first: Eigen's vectorized row
      // sums change order with the destination's alignment.
      const Vector bias_grad = upstream.rowwise().sum();
      gb += bias_grad;
      if (l > 0) {
        Matrix next = weight(L).transpose() * upstream;
        upstream = std::move(next);
      }
    }
  }

  // Means (act_dim x batch) and values (batch) for column-major observations.
  template <typename Derived>
  void forward(const Eigen::MatrixBase<Derived>& x, Matrix& mean, Vector& value) const {
    MlpCache<T> a, c;
    forward_stack(actor_, x, a);
    forward_stack(critic_, x, c);
    mean = std::move(a.output);
    value = c.output.row(0).transpose();
  }

  template <typename Derived>
  void forward_actor(const Eigen::MatrixBase<Derived>& x, Matrix& mean) const {
    MlpCache<T> a;
    forward_stack(actor_, x, a);
    mean = std::move(a.output);
  }

  template <typename Derived>
  void forward_critic(const Eigen::MatrixBase<Derived>& x, Vector& value) const {
    MlpCache<T> c;
    forward_stack(critic_, x, c);
    value = c.output.row(0).transpose();
  }

  friend bool operator==(const ActorCritic& a, const ActorCritic& b) {
    return a.shape_ == b.shape_ && a.params_ == b.params_;
  }

 private:
  NetShape shape_;
  std::vector<LayerSlice> actor_;
  std::vector<LayerSlice> critic_;
  std::size_t log_std_offset_ = 0;
  std::vector<T> params_;
};

using Policy = ActorCritic<float>;

// ---- checkpoint -------------------------------------------------------------
//
// "CLQW", one version byte, text header of key=value lines closed by "end\n",
// then every parameter as a little-endian IEEE-754 binary32.

inline constexpr std::uint8_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint64_t iteration = 0;
  std::uint64_t seed = 0;
  std::string scenario;
};

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

inline void save_checkpoint(std::ostream& os, const Policy& policy, const CheckpointMeta& meta) {
  os.write("CLQW", 4);
  os.put(static_cast<char>(kCheckpointVersion));
  const auto& s = policy.shape();
  os << "obs_dim=" << s.obs_dim << '\n'
     << "hidden=" << join_sizes(s.hidden) << '\n'
     << "act_dim=" << s.act_dim << '\n'
     << "param_count=" << policy.size() << '\n'
     << "iteration=" << meta.iteration << '\n'
     << "seed=" << meta.seed << '\n'
     << "scenario=" << meta.scenario << '\n'
     << "end\n";
  for (float v : policy.params()) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    const char bytes[4] = {static_cast<char>(bits & 0xFF), static_cast<char>((bits >> 8) & 0xFF),
                           static_cast<char>((bits >> 16) & 0xFF), static_cast<char>((bits >> 24) & 0xFF)};
    os.write(bytes, 4);
  }
  if (!os) throw Fault("checkpoint: write failed");
}

inline Policy load_checkpoint(std::istream& is, CheckpointMeta* meta_out = nullptr) {
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "CLQW") throw ConfigError("checkpoint: bad magic bytes");
  const int version = is.get();
  if (version != kCheckpointVersion) throw ConfigError("checkpoint: unsupported version");
  NetShape shape;
  shape.hidden.clear();
  CheckpointMeta meta;
  std::size_t declared = 0;
  std::string line;
  bool closed = false;
  while (std::getline(is, line)) {
    if (line == "end") {
      closed = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("checkpoint: malformed header line '" + line + "'");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    try {
      if (key == "obs_dim") shape.obs_dim = std::stoull(value);
      else if (key == "act_dim") shape.act_dim = std::stoull(value);
      else if (key == "param_count") declared = std::stoull(value);
      else if (key == "iteration") meta.iteration = std::stoull(value);
      else if (key == "seed") meta.seed = std::stoull(value);
      else if (key == "scenario") meta.scenario = value;
      else if (key == "hidden") {
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) shape.hidden.push_back(std::stoull(item));
      }
    } catch (const std::logic_error&) {
      throw ConfigError("checkpoint: bad value for '" + key + "'");
    }
  }
  if (!closed) throw ConfigError("checkpoint: truncated header");
  if (declared != parameter_count(shape)) throw ConfigError("checkpoint: parameter count does not match layer sizes");
  Policy policy(shape);
  for (float& v : policy.params()) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw ConfigError("checkpoint: truncated weights");
    const std::uint32_t bits = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
                               (std::uint32_t(b[3]) << 24);
    v = std::bit_cast<float>(bits);
  }
  if (meta_out) *meta_out = meta;
  return policy;
}

inline void save_checkpoint(const std::string& path, const Policy& policy, const CheckpointMeta& meta) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("checkpoint: cannot open " + path + " for writing");
  save_checkpoint(os, policy, meta);
}

inline Policy load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("checkpoint: cannot open " + path);
  return load_checkpoint(is, meta);
}

}  // namespace terraincl
