#include "evadv/net.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "evadv/error.hpp"
#include "evadv/random.hpp"

namespace evadv {

namespace {

std::atomic<std::uint64_t> g_model_version{1};

// 3x3 convolution with zero padding 1 over [C][W][H] planes (y fastest).
template <typename T>
void conv3x3_forward(const T* in, int cin, int w, int h, const T* weight, const T* bias, int cout, T* out) {
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  for (int co = 0; co < cout; ++co) {
    T* dst = out + co * plane;
    std::fill(dst, dst + plane, bias[co]);
    for (int ci = 0; ci < cin; ++ci) {
      const T* src = in + ci * plane;
      const T* k = weight + (static_cast<std::size_t>(co) * cin + ci) * 9;
      for (int kx = 0; kx < 3; ++kx) {
        const int x_lo = std::max(0, 1 - kx);
        const int x_hi = std::min(w, w + 1 - kx);
        for (int ky = 0; ky < 3; ++ky) {
          const T wv = k[kx * 3 + ky];
          const int y_lo = std::max(0, 1 - ky);
          const int y_hi = std::min(h, h + 1 - ky);
          for (int x = x_lo; x < x_hi; ++x) {
            T* drow = dst + static_cast<std::size_t>(x) * h;
            const T* srow = src + static_cast<std::size_t>(x + kx - 1) * h;
            for (int y = y_lo; y < y_hi; ++y) drow[y] += wv * srow[y + ky - 1];
          }
        }
      }
    }
  }
}

// Accumulates weight/bias gradients and (optionally) the input gradient.
template <typename T>
void conv3x3_backward(const T* in, int cin, int w, int h, const T* weight, int cout, const T* dout, T* dweight,
                      T* dbias, T* din) {
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  for (int co = 0; co < cout; ++co) {
    const T* g = dout + co * plane;
    T bsum = 0;
    for (std::size_t i = 0; i < plane; ++i) bsum += g[i];
    dbias[co] += bsum;
    for (int ci = 0; ci < cin; ++ci) {
      const T* src = in + ci * plane;
      T* dsrc = din ? din + ci * plane : nullptr;
      const std::size_t koff = (static_cast<std::size_t>(co) * cin + ci) * 9;
      for (int kx = 0; kx < 3; ++kx) {
        const int x_lo = std::max(0, 1 - kx);
        const int x_hi = std::min(w, w + 1 - kx);
        for (int ky = 0; ky < 3; ++ky) {
          const T wv = weight[koff + kx * 3 + ky];
          const int y_lo = std::max(0, 1 - ky);
          const int y_hi = std::min(h, h + 1 - ky);
          T acc = 0;
          for (int x = x_lo; x < x_hi; ++x) {
            const T* grow = g + static_cast<std::size_t>(x) * h;
            const std::size_t soff = static_cast<std::size_t>(x + kx - 1) * h;
            const T* srow = src + soff;
            for (int y = y_lo; y < y_hi; ++y) acc += grow[y] * srow[y + ky - 1];
            if (dsrc) {
              T* drow = dsrc + soff;
              for (int y = y_lo; y < y_hi; ++y) drow[y + ky - 1] += wv * grow[y];
            }
          }
          dweight[koff + kx * 3 + ky] += acc;
        }
      }
    }
  }
}

template <typename T>
void relu_pool_forward(const T* z, int c, int w, int h, T* out) {
  const int w2 = w / 2;
  const int h2 = h / 2;
  for (int ch = 0; ch < c; ++ch) {
    const T* src = z + static_cast<std::size_t>(ch) * w * h;
    T* dst = out + static_cast<std::size_t>(ch) * w2 * h2;
    for (int x = 0; x < w2; ++x) {
      for (int y = 0; y < h2; ++y) {
        const T* a = src + static_cast<std::size_t>(2 * x) * h + 2 * y;
        const T* b = a + h;
        const T s = std::max(a[0], T(0)) + std::max(a[1], T(0)) + std::max(b[0], T(0)) + std::max(b[1], T(0));
        dst[static_cast<std::size_t>(x) * h2 + y] = s * T(0.25);
      }
    }
  }
}

template <typename T>
void relu_pool_backward(const T* z, int c, int w, int h, const T* dpool, T* dz) {
  const int w2 = w / 2;
  const int h2 = h / 2;
  for (int ch = 0; ch < c; ++ch) {
    const T* src = z + static_cast<std::size_t>(ch) * w * h;
    T* dst = dz + static_cast<std::size_t>(ch) * w * h;
    const T* g = dpool + static_cast<std::size_t>(ch) * w2 * h2;
    for (int x = 0; x < w; ++x) {
      for (int y = 0; y < h; ++y) {
        const std::size_t i = static_cast<std::size_t>(x) * h + y;
        dst[i] = src[i] > T(0) ? T(0.25) * g[static_cast<std::size_t>(x / 2) * h2 + y / 2] : T(0);
      }
    }
  }
}

}  // namespace

std::uint64_t next_model_version() { return g_model_version.fetch_add(1); }

void validate(const NetShape& s) {
  if (s.in_channels < 1 || s.num_classes < 2 || s.conv1 < 1 || s.conv2 < 1) {
    throw Error(ErrorCode::ShapeMismatch, "network needs >= 1 input channel and >= 2 classes");
  }
  if (s.width < 4 || s.height < 4 || s.width % 4 != 0 || s.height % 4 != 0) {
    throw Error(ErrorCode::ShapeMismatch, "network input size must be a positive multiple of 4");
  }
}

ParamLayout layout_of(const NetShape& s) {
  ParamLayout l{};
  l.conv1_w = 0;
  l.conv1_b = l.conv1_w + static_cast<std::size_t>(s.conv1) * s.in_channels * 9;
  l.conv2_w = l.conv1_b + s.conv1;
  l.conv2_b = l.conv2_w + static_cast<std::size_t>(s.conv2) * s.conv1 * 9;
  l.fc_w = l.conv2_b + s.conv2;
  l.fc_b = l.fc_w + static_cast<std::size_t>(s.num_classes) * s.features();
  l.total = l.fc_b + s.num_classes;
  return l;
}

template <typename T>
ModelParams<T> init_model(const NetShape& shape, std::uint64_t seed) {
  validate(shape);
  ModelParams<T> m;
  m.shape = shape;
  const auto l = layout_of(shape);
  m.data.assign(l.total, T(0));
  Rng rng(seed);
  auto fill = [&](std::size_t off, std::size_t count, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t i = 0; i < count; ++i) m.data[off + i] = static_cast<T>(uniform(rng, -limit, limit));
  };
  fill(l.conv1_w, l.conv1_b - l.conv1_w, shape.in_channels * 9.0, shape.conv1 * 9.0);
  fill(l.conv2_w, l.conv2_b - l.conv2_w, shape.conv1 * 9.0, shape.conv2 * 9.0);
  fill(l.fc_w, l.fc_b - l.fc_w, shape.features(), shape.num_classes);
  m.touch();
  return m;
}

template <typename T>
ForwardCache<T> forward(const ModelParams<T>& model, std::span<const T> input) {
  const auto& s = model.shape;
  const std::size_t in_size = static_cast<std::size_t>(s.in_channels) * s.width * s.height;
  if (input.size() != in_size || model.data.size() != layout_of(s).total) {
    throw Error(ErrorCode::ShapeMismatch, "input has " + std::to_string(input.size()) + " values, network expects " +
                                              std::to_string(in_size));
  }
  const auto l = layout_of(s);
  const T* p = model.data.data();
  ForwardCache<T> c;
  c.model_version = model.version;
  c.input.assign(input.begin(), input.end());
  const int w2 = s.width / 2, h2 = s.height / 2, w4 = s.width / 4, h4 = s.height / 4;
  c.z1.resize(static_cast<std::size_t>(s.conv1) * s.width * s.height);
  conv3x3_forward(c.input.data(), s.in_channels, s.width, s.height, p + l.conv1_w, p + l.conv1_b, s.conv1, c.z1.data());
  c.pool1.resize(static_cast<std::size_t>(s.conv1) * w2 * h2);
  relu_pool_forward(c.z1.data(), s.conv1, s.width, s.height, c.pool1.data());
  c.z2.resize(static_cast<std::size_t>(s.conv2) * w2 * h2);
  conv3x3_forward(c.pool1.data(), s.conv1, w2, h2, p + l.conv2_w, p + l.conv2_b, s.conv2, c.z2.data());
  c.pool2.resize(static_cast<std::size_t>(s.conv2) * w4 * h4);
  relu_pool_forward(c.z2.data(), s.conv2, w2, h2, c.pool2.data());
  const std::size_t nf = c.pool2.size();
  c.logits.resize(s.num_classes);
  for (int k = 0; k < s.num_classes; ++k) {
    const T* row = p + l.fc_w + static_cast<std::size_t>(k) * nf;
    T acc = p[l.fc_b + k];
    for (std::size_t j = 0; j < nf; ++j) acc += row[j] * c.pool2[j];
    c.logits[k] = acc;
  }
  return c;
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  std::vector<T> out(logits.size());
  if (logits.empty()) return out;
  const T m = *std::max_element(logits.begin(), logits.end());
  T sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

template <typename T>
T cross_entropy(std::span<const T> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw Error(ErrorCode::ShapeMismatch, "label outside the logit range");
  }
  const T m = *std::max_element(logits.begin(), logits.end());
  T sum = 0;
  for (T v : logits) sum += std::exp(v - m);
  return std::max(T(0), std::log(sum) - (logits[label] - m));
}

template <typename T>
Gradients<T> backward_from_logits(const ModelParams<T>& model, const ForwardCache<T>& c,
                                  std::span<const T> dlogits) {
  if (c.model_version != model.version) {
    throw Error(ErrorCode::StaleCache, "activation cache was produced by a different model state");
  }
  const auto& s = model.shape;
  if (dlogits.size() != static_cast<std::size_t>(s.num_classes)) {
    throw Error(ErrorCode::ShapeMismatch, "logit gradient size");
  }
  const auto l = layout_of(s);
  const T* p = model.data.data();
  Gradients<T> g;
  g.params.assign(l.total, T(0));
  g.input.assign(c.input.size(), T(0));
  T* gp = g.params.data();
  const int w2 = s.width / 2, h2 = s.height / 2;

  const std::size_t nf = c.pool2.size();
  std::vector<T> dpool2(nf, T(0));
  for (int k = 0; k < s.num_classes; ++k) {
    const T d = dlogits[k];
    gp[l.fc_b + k] += d;
    if (d == T(0)) continue;
    const T* row = p + l.fc_w + static_cast<std::size_t>(k) * nf;
    T* grow = gp + l.fc_w + static_cast<std::size_t>(k) * nf;
    for (std::size_t j = 0; j < nf; ++j) {
      grow[j] += d * c.pool2[j];
      dpool2[j] += d * row[j];
    }
  }
  std::vector<T> dz2(c.z2.size());
  relu_pool_backward(c.z2.data(), s.conv2, w2, h2, dpool2.data(), dz2.data());
  std::vector<T> dpool1(c.pool1.size(), T(0));
  conv3x3_backward(c.pool1.data(), s.conv1, w2, h2, p + l.conv2_w, s.conv2, dz2.data(), gp + l.conv2_w,
                   gp + l.conv2_b, dpool1.data());
  std::vector<T> dz1(c.z1.size());
  relu_pool_backward(c.z1.data(), s.conv1, s.width, s.height, dpool1.data(), dz1.data());
  conv3x3_backward(c.input.data(), s.in_channels, s.width, s.height, p + l.conv1_w, s.conv1, dz1.data(),
                   gp + l.conv1_w, gp + l.conv1_b, g.input.data());
  return g;
}

template <typename T>
Gradients<T> backward(const ModelParams<T>& model, const ForwardCache<T>& cache, int label) {
  auto probs = softmax<T>(cache.logits);
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) {
    throw Error(ErrorCode::ShapeMismatch, "label outside the logit range");
  }
  probs[label] -= T(1);
  return backward_from_logits<T>(model, cache, probs);
}

template <typename T>
AdamState<T> make_adam(const ModelParams<T>& model, double lr) {
  AdamState<T> s;
  s.hyper.lr = lr;
  s.moments = AdamMoments<T>(model.size());
  return s;
}

template <typename T>
void adam_step(ModelParams<T>& model, const std::vector<T>& grads, AdamState<T>& state) {
  if (grads.size() != model.size() || state.moments.first.size() != model.size()) {
    throw Error(ErrorCode::ShapeMismatch, "adam: gradient or state does not match the model");
  }
  ++state.step;
  adam_update<T>(model.data, grads, state.moments, state.hyper, state.step);
  model.touch();
}

#define EVADV_INSTANTIATE_NET(T)                                                                          \
  template ModelParams<T> init_model<T>(const NetShape&, std::uint64_t);                                   \
  template ForwardCache<T> forward<T>(const ModelParams<T>&, std::span<const T>);                          \
  template std::vector<T> softmax<T>(std::span<const T>);                                                  \
  template T cross_entropy<T>(std::span<const T>, int);                                                    \
  template Gradients<T> backward_from_logits<T>(const ModelParams<T>&, const ForwardCache<T>&,             \
                                                std::span<const T>);                                       \
  template Gradients<T> backward<T>(const ModelParams<T>&, const ForwardCache<T>&, int);                   \
  template AdamState<T> make_adam<T>(const ModelParams<T>&, double);                                       \
  template void adam_step<T>(ModelParams<T>&, const std::vector<T>&, AdamState<T>&);

EVADV_INSTANTIATE_NET(float)
EVADV_INSTANTIATE_NET(double)

#undef EVADV_INSTANTIATE_NET

}  // namespace evadv
