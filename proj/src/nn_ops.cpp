#include "mina/nn_ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cstring>

namespace mina::nn {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using StridedMap = Eigen::Map<RowMatrix<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const RowMatrix<T>, 0, Eigen::OuterStride<>>;

// Output pixels are processed in blocks of whole rows so the im2col buffer
// stays cache resident.
constexpr int kChunkPixels = 1024;

template <typename T>
void require_rank3(const Tensor<T>& x, const char* op) {
  if (x.rank() != 3) throw ShapeError(std::string(op) + ": expected a [C, H, W] tensor, got " + x.shape_str());
}

struct ConvGeometry {
  int cin, cout, k, pad, height, width;
  int rows_per_chunk() const { return std::max(1, kChunkPixels / width); }
};

template <typename T>
ConvGeometry check_conv(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require_rank3(x, "conv2d");
  if (w.rank() != 4 || w.dim(2) != w.dim(3) || w.dim(2) % 2 == 0)
    throw ShapeError("conv2d: weight must be [out, in, k, k] with odd k, got " + w.shape_str());
  if (w.dim(1) != x.dim(0))
    throw ShapeError("conv2d: weight " + w.shape_str() + " does not match input " + x.shape_str());
  if (b.rank() != 1 || b.dim(0) != w.dim(0))
    throw ShapeError("conv2d: bias " + b.shape_str() + " does not match weight " + w.shape_str());
  return {x.dim(0), w.dim(0), w.dim(2), w.dim(2) / 2, x.dim(1), x.dim(2)};
}

// col[(c*k + ky)*k + kx][(h - h0)*W + w] = x[c][h + ky - pad][w + kx - pad]
template <typename T>
void im2col(const Tensor<T>& x, const ConvGeometry& g, int h0, int h1, T* col) {
  const int n = (h1 - h0) * g.width;
  for (int c = 0; c < g.cin; ++c)
    for (int ky = 0; ky < g.k; ++ky)
      for (int kx = 0; kx < g.k; ++kx) {
        T* dst = col + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * n;
        const int dx = kx - g.pad;
        const int w_lo = std::max(0, -dx);
        const int w_hi = std::min(g.width, g.width - dx);
        for (int h = h0; h < h1; ++h) {
          T* row = dst + static_cast<std::size_t>(h - h0) * g.width;
          const int sh = h + ky - g.pad;
          if (sh < 0 || sh >= g.height || w_lo >= w_hi) {
            std::fill(row, row + g.width, T(0));
            continue;
          }
          std::fill(row, row + w_lo, T(0));
          std::memcpy(row + w_lo, &x.at(c, sh, w_lo + dx), sizeof(T) * static_cast<std::size_t>(w_hi - w_lo));
          std::fill(row + w_hi, row + g.width, T(0));
        }
      }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, int h0, int h1, Tensor<T>& dx) {
  const int n = (h1 - h0) * g.width;
  for (int c = 0; c < g.cin; ++c)
    for (int ky = 0; ky < g.k; ++ky)
      for (int kx = 0; kx < g.k; ++kx) {
        const T* src = col + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * n;
        const int dxo = kx - g.pad;
        const int w_lo = std::max(0, -dxo);
        const int w_hi = std::min(g.width, g.width - dxo);
        for (int h = h0; h < h1; ++h) {
          const int sh = h + ky - g.pad;
          if (sh < 0 || sh >= g.height) continue;
          const T* row = src + static_cast<std::size_t>(h - h0) * g.width;
          T* out = &dx.at(c, sh, 0);
          for (int w = w_lo; w < w_hi; ++w) out[w + dxo] += row[w];
        }
      }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  const ConvGeometry g = check_conv(x, weight, bias);
  const int hw = g.height * g.width;
  const int kk = g.cin * g.k * g.k;
  Tensor<T> y({g.cout, g.height, g.width});
  Eigen::Map<const RowMatrix<T>> wm(weight.data(), g.cout, kk);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bv(bias.data(), g.cout);
  std::vector<T> col;
  const int step = g.rows_per_chunk();
  for (int h0 = 0; h0 < g.height; h0 += step) {
    const int h1 = std::min(g.height, h0 + step);
    const int n = (h1 - h0) * g.width;
    col.resize(static_cast<std::size_t>(kk) * n);
    im2col(x, g, h0, h1, col.data());
    Eigen::Map<const RowMatrix<T>> cm(col.data(), kk, n);
    StridedMap<T> ym(y.data() + static_cast<std::size_t>(h0) * g.width, g.cout, n,
                     Eigen::OuterStride<>(hw));
    ym.noalias() = wm * cm;
    ym.colwise() += bv;
  }
  return y;
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& dy,
                     Tensor<T>& dweight, Tensor<T>& dbias, Tensor<T>* dx) {
  const ConvGeometry g = check_conv(x, weight, dbias);
  if (dy.rank() != 3 || dy.dim(0) != g.cout || dy.dim(1) != g.height || dy.dim(2) != g.width)
    throw ShapeError("conv2d_backward: output gradient " + dy.shape_str() + " does not match input " +
                     x.shape_str() + " and weight " + weight.shape_str());
  require_same_shape(weight, dweight, "conv2d_backward");
  const int hw = g.height * g.width;
  const int kk = g.cin * g.k * g.k;
  Eigen::Map<const RowMatrix<T>> wm(weight.data(), g.cout, kk);
  Eigen::Map<RowMatrix<T>> dwm(dweight.data(), g.cout, kk);
  if (dx) {
    if (dx->shape() != x.shape()) *dx = Tensor<T>(x.shape());
    else dx->fill(T(0));
  }
  std::vector<T> col, dcol;
  const int step = g.rows_per_chunk();
  for (int h0 = 0; h0 < g.height; h0 += step) {
    const int h1 = std::min(g.height, h0 + step);
    const int n = (h1 - h0) * g.width;
    col.resize(static_cast<std::size_t>(kk) * n);
    im2col(x, g, h0, h1, col.data());
    Eigen::Map<const RowMatrix<T>> cm(col.data(), kk, n);
    ConstStridedMap<T> dym(dy.data() + static_cast<std::size_t>(h0) * g.width, g.cout, n,
                           Eigen::OuterStride<>(hw));
    dwm.noalias() += dym * cm.transpose();
    // Fixed summation order: vectorized reductions depend on buffer alignment.
    for (int o = 0; o < g.cout; ++o) {
      const T* r = dy.data() + static_cast<std::size_t>(o) * hw + static_cast<std::size_t>(h0) * g.width;
      T s = T(0);
      for (int i = 0; i < n; ++i) s += r[i];
      dbias[static_cast<std::size_t>(o)] += s;
    }
    if (dx) {
      dcol.resize(col.size());
      Eigen::Map<RowMatrix<T>> dcm(dcol.data(), kk, n);
      dcm.noalias() = wm.transpose() * dym;
      col2im_add(dcol.data(), g, h0, h1, *dx);
    }
  }
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& y, const Tensor<T>& dy) {
  require_same_shape(y, dy, "relu_backward");
  Tensor<T> dx(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = y[i] > T(0) ? dy[i] : T(0);
  return dx;
}

template <typename T>
Tensor<T> maxpool2(const Tensor<T>& x, std::vector<std::uint32_t>& argmax) {
  require_rank3(x, "maxpool2");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 || w % 2) throw ShapeError("maxpool2: spatial dims must be even, got " + x.shape_str());
  Tensor<T> y({c, h / 2, w / 2});
  argmax.resize(y.size());
  std::size_t o = 0;
  for (int ci = 0; ci < c; ++ci)
    for (int i = 0; i < h / 2; ++i)
      for (int j = 0; j < w / 2; ++j, ++o) {
        std::uint32_t best = static_cast<std::uint32_t>((static_cast<std::size_t>(ci) * h + 2 * i) * w + 2 * j);
        for (int di = 0; di < 2; ++di)
          for (int dj = 0; dj < 2; ++dj) {
            const auto idx =
                static_cast<std::uint32_t>((static_cast<std::size_t>(ci) * h + 2 * i + di) * w + 2 * j + dj);
            if (x[idx] > x[best]) best = idx;
          }
        argmax[o] = best;
        y[o] = x[best];
      }
  return y;
}

template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& dy, const std::vector<std::uint32_t>& argmax,
                            const std::vector<int>& input_shape) {
  if (argmax.size() != dy.size())
    throw ShapeError("maxpool2_backward: gradient " + dy.shape_str() + " does not match pooling indices");
  Tensor<T> dx(input_shape);
  for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax[i]] += dy[i];
  return dx;
}

template <typename T>
Tensor<T> upsample2(const Tensor<T>& x) {
  require_rank3(x, "upsample2");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<T> y({c, 2 * h, 2 * w});
  for (int ci = 0; ci < c; ++ci)
    for (int i = 0; i < 2 * h; ++i) {
      const T* src = &x.at(ci, i / 2, 0);
      T* dst = &y.at(ci, i, 0);
      for (int j = 0; j < 2 * w; ++j) dst[j] = src[j / 2];
    }
  return y;
}

template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& dy) {
  require_rank3(dy, "upsample2_backward");
  const int c = dy.dim(0), h = dy.dim(1), w = dy.dim(2);
  if (h % 2 || w % 2) throw ShapeError("upsample2_backward: spatial dims must be even, got " + dy.shape_str());
  Tensor<T> dx({c, h / 2, w / 2});
  for (int ci = 0; ci < c; ++ci)
    for (int i = 0; i < h; ++i) {
      const T* src = &dy.at(ci, i, 0);
      T* dst = &dx.at(ci, i / 2, 0);
      for (int j = 0; j < w; ++j) dst[j / 2] += src[j];
    }
  return dx;
}

template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank3(a, "concat");
  require_rank3(b, "concat");
  if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
    throw ShapeError("concat: spatial mismatch " + a.shape_str() + " vs " + b.shape_str());
  Tensor<T> y({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
  std::copy(a.data(), a.data() + a.size(), y.data());
  std::copy(b.data(), b.data() + b.size(), y.data() + a.size());
  return y;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> concat_backward(const Tensor<T>& dy, int channels_a) {
  require_rank3(dy, "concat_backward");
  if (channels_a < 0 || channels_a > dy.dim(0))
    throw ShapeError("concat_backward: split " + std::to_string(channels_a) + " outside " + dy.shape_str());
  Tensor<T> da({channels_a, dy.dim(1), dy.dim(2)});
  Tensor<T> db({dy.dim(0) - channels_a, dy.dim(1), dy.dim(2)});
  std::copy(dy.data(), dy.data() + da.size(), da.data());
  std::copy(dy.data() + da.size(), dy.data() + dy.size(), db.data());
  return {std::move(da), std::move(db)};
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x[i];
    if (v >= T(0)) {
      y[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      y[i] = e / (T(1) + e);
    }
  }
  return y;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& dy) {
  require_same_shape(y, dy, "sigmoid_backward");
  Tensor<T> dx(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = dy[i] * y[i] * (T(1) - y[i]);
  return dx;
}

template <typename T>
double weighted_bce(const Tensor<T>& pred, const Tensor<T>& target, double pos_weight) {
  require_same_shape(pred, target, "weighted_bce");
  if (pred.size() == 0) throw ShapeError("weighted_bce: empty tensors");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(static_cast<double>(pred[i]), kBceEpsilon, 1.0 - kBceEpsilon);
    const double y = target[i];
    sum += pos_weight * y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return -sum / static_cast<double>(pred.size());
}

template <typename T>
Tensor<T> weighted_bce_backward(const Tensor<T>& pred, const Tensor<T>& target, double pos_weight) {
  require_same_shape(pred, target, "weighted_bce_backward");
  Tensor<T> g(pred.shape());
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i];
    if (p < kBceEpsilon || p > 1.0 - kBceEpsilon) continue;
    const double y = target[i];
    g[i] = static_cast<T>(-(pos_weight * y / p - (1.0 - y) / (1.0 - p)) / n);
  }
  return g;
}

template <typename T>
double weighted_bce_with_logits(const Tensor<T>& logits, const Tensor<T>& target,
                                double pos_weight, Tensor<T>* dlogits) {
  require_same_shape(logits, target, "weighted_bce_with_logits");
  if (logits.size() == 0) throw ShapeError("weighted_bce_with_logits: empty tensors");
  const Tensor<T> p = sigmoid(logits);
  const double n = static_cast<double>(logits.size());
  if (dlogits) {
    if (dlogits->shape() != logits.shape()) *dlogits = Tensor<T>(logits.shape());
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const double y = target[i];
      const double wy = pos_weight * y;
      (*dlogits)[i] = static_cast<T>(((wy + 1.0 - y) * static_cast<double>(p[i]) - wy) / n);
    }
  }
  return weighted_bce(p, target, pos_weight);
}

#define MINA_INSTANTIATE_NN(T)                                                                   \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);              \
  template void conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,           \
                                Tensor<T>&, Tensor<T>&, Tensor<T>*);                            \
  template Tensor<T> relu(const Tensor<T>&);                                                    \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> maxpool2(const Tensor<T>&, std::vector<std::uint32_t>&);                   \
  template Tensor<T> maxpool2_backward(const Tensor<T>&, const std::vector<std::uint32_t>&,     \
                                       const std::vector<int>&);                                \
  template Tensor<T> upsample2(const Tensor<T>&);                                               \
  template Tensor<T> upsample2_backward(const Tensor<T>&);                                      \
  template Tensor<T> concat(const Tensor<T>&, const Tensor<T>&);                                \
  template std::pair<Tensor<T>, Tensor<T>> concat_backward(const Tensor<T>&, int);              \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                 \
  template Tensor<T> sigmoid_backward(const Tensor<T>&, const Tensor<T>&);                      \
  template double weighted_bce(const Tensor<T>&, const Tensor<T>&, double);                     \
  template Tensor<T> weighted_bce_backward(const Tensor<T>&, const Tensor<T>&, double);         \
  template double weighted_bce_with_logits(const Tensor<T>&, const Tensor<T>&, double, Tensor<T>*);

MINA_INSTANTIATE_NN(float)
MINA_INSTANTIATE_NN(double)

#undef MINA_INSTANTIATE_NN

}  // namespace mina::nn
