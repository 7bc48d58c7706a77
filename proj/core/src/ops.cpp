#include "hsissl/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "autograd_impl.hpp"

namespace hsissl {
namespace {

using detail::grad_of;
using detail::make_result;
using detail::Node;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

void require_rank(const Shape& shape, std::size_t rank, const char* op) {
  if (shape.size() != rank) {
    throw DimensionError(std::string(op) + " expects rank " +
                         std::to_string(rank) + ", got " + shape_string(shape));
  }
}

template <typename T>
void accumulate(std::vector<T>& dst, const T* src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// 2D convolution geometry; 1D convolution is the H = KH = 1 special case.
struct ConvGeometry {
  std::size_t batch, in_channels, height, width;
  std::size_t out_channels, kernel_h, kernel_w;
  std::size_t stride_h, stride_w, pad_h, pad_w;
  std::size_t out_h, out_w;

  std::size_t patch_size() const { return in_channels * kernel_h * kernel_w; }
  std::size_t columns() const { return batch * out_h * out_w; }
};

std::size_t conv_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                        std::size_t pad, const char* op) {
  if (stride == 0) throw DimensionError(std::string(op) + ": stride must be >= 1");
  if (kernel > in + 2 * pad) {
    throw DimensionError(std::string(op) + ": kernel extent " +
                         std::to_string(kernel) + " exceeds padded input " +
                         std::to_string(in + 2 * pad));
  }
  const std::size_t span = in + 2 * pad - kernel;
  if (span % stride != 0) {
    throw DimensionError(std::string(op) + ": non-integral output extent (" +
                         std::to_string(span) + " / stride " +
                         std::to_string(stride) + ")");
  }
  return span / stride + 1;
}

// Unfolds the input into a [patch_size x columns] row-major matrix.
template <typename T>
void im2col(const ConvGeometry& g, const T* input, T* cols) {
  const std::size_t n = g.columns();
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
      for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
        const std::size_t k = (ci * g.kernel_h + kh) * g.kernel_w + kw;
        T* row = cols + k * n;
        for (std::size_t b = 0; b < g.batch; ++b) {
          const T* src = input + (b * g.in_channels + ci) * g.height * g.width;
          T* dst = row + b * plane;
          for (std::size_t oh = 0; oh < g.out_h; ++oh) {
            const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride_h + kh) -
                            static_cast<std::ptrdiff_t>(g.pad_h);
            T* out_row = dst + oh * g.out_w;
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) {
              std::fill(out_row, out_row + g.out_w, T(0));
              continue;
            }
            const T* in_row = src + static_cast<std::size_t>(ih) * g.width;
            for (std::size_t ow = 0; ow < g.out_w; ++ow) {
              const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride_w + kw) -
                              static_cast<std::ptrdiff_t>(g.pad_w);
              out_row[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.width))
                                ? T(0)
                                : in_row[iw];
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters column gradients back onto the input.
template <typename T>
void col2im(const ConvGeometry& g, const T* cols, T* input_grad) {
  const std::size_t n = g.columns();
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
      for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
        const std::size_t k = (ci * g.kernel_h + kh) * g.kernel_w + kw;
        const T* row = cols + k * n;
        for (std::size_t b = 0; b < g.batch; ++b) {
          T* dst = input_grad + (b * g.in_channels + ci) * g.height * g.width;
          const T* src = row + b * plane;
          for (std::size_t oh = 0; oh < g.out_h; ++oh) {
            const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride_h + kh) -
                            static_cast<std::ptrdiff_t>(g.pad_h);
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) continue;
            T* in_row = dst + static_cast<std::size_t>(ih) * g.width;
            const T* col_row = src + oh * g.out_w;
            for (std::size_t ow = 0; ow < g.out_w; ++ow) {
              const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride_w + kw) -
                              static_cast<std::ptrdiff_t>(g.pad_w);
              if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.width)) continue;
              in_row[iw] += col_row[ow];
            }
          }
        }
      }
    }
  }
}

template <typename T>
BasicTensor<T> convolve(const char* op, const BasicTensor<T>& input,
                        const BasicTensor<T>& kernel, const ConvGeometry& g,
                        Shape out_shape) {
  const std::size_t k = g.patch_size();
  const std::size_t n = g.columns();
  const std::size_t plane = g.out_h * g.out_w;

  std::vector<T> cols(k * n);
  im2col(g, input.data().data(), cols.data());

  RowMat<T> out_mat(g.out_channels, n);
  const ConstMatMap<T> weights(kernel.data().data(), g.out_channels, k);
  const ConstMatMap<T> col_mat(cols.data(), k, n);
  out_mat.noalias() = weights * col_mat;

  std::vector<T> out(g.batch * g.out_channels * plane);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      const T* src = out_mat.data() + co * n + b * plane;
      std::copy(src, src + plane, out.begin() + (b * g.out_channels + co) * plane);
    }
  }

  const bool keep_cols = grad_enabled() && kernel.requires_grad();
  return make_result<T>(
      op, std::move(out_shape), std::move(out), {&input, &kernel},
      [g, in = input.node(), ker = kernel.node(),
       cols = keep_cols ? std::move(cols) : std::vector<T>{}](Node<T>& self) {
        const std::size_t k = g.patch_size();
        const std::size_t n = g.columns();
        const std::size_t plane = g.out_h * g.out_w;
        RowMat<T> grad_mat(g.out_channels, n);
        for (std::size_t b = 0; b < g.batch; ++b) {
          for (std::size_t co = 0; co < g.out_channels; ++co) {
            const T* src = self.grad.data() + (b * g.out_channels + co) * plane;
            std::copy(src, src + plane, grad_mat.data() + co * n + b * plane);
          }
        }
        if (auto* dk = grad_of(ker)) {
          const ConstMatMap<T> col_mat(cols.data(), k, n);
          MatMap<T> dk_mat(dk->data(), g.out_channels, k);
          dk_mat.noalias() += grad_mat * col_mat.transpose();
        }
        if (auto* di = grad_of(in)) {
          const ConstMatMap<T> weights(ker->data.data(), g.out_channels, k);
          RowMat<T> dcols(k, n);
          dcols.noalias() = weights.transpose() * grad_mat;
          col2im(g, dcols.data(), di->data());
        }
      });
}

}  // namespace

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank(a.shape(), 2, "matmul");
  require_rank(b.shape(), 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ, " +
                         shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  std::vector<T> out(m * n);
  MatMap<T>(out.data(), m, n).noalias() =
      ConstMatMap<T>(a.data().data(), m, k) * ConstMatMap<T>(b.data().data(), k, n);
  return make_result<T>(
      "matmul", Shape{m, n}, std::move(out), {&a, &b},
      [m, k, n, an = a.node(), bn = b.node()](Node<T>& self) {
        const ConstMatMap<T> dc(self.grad.data(), m, n);
        if (auto* da = grad_of(an)) {
          MatMap<T>(da->data(), m, k).noalias() +=
              dc * ConstMatMap<T>(bn->data.data(), k, n).transpose();
        }
        if (auto* db = grad_of(bn)) {
          MatMap<T>(db->data(), k, n).noalias() +=
              ConstMatMap<T>(an->data.data(), m, k).transpose() * dc;
        }
      });
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shapes differ, " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
  std::vector<T> out(a.numel());
  const auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  return make_result<T>("add", a.shape(), std::move(out), {&a, &b},
                        [an = a.node(), bn = b.node()](Node<T>& self) {
                          if (auto* da = grad_of(an)) accumulate(*da, self.grad.data());
                          if (auto* db = grad_of(bn)) accumulate(*db, self.grad.data());
                        });
}

template <typename T>
BasicTensor<T> add_bias(const BasicTensor<T>& x, const BasicTensor<T>& bias) {
  require_rank(x.shape(), 2, "add_bias");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (bias.numel() != cols) {
    throw DimensionError("add_bias: bias has " + std::to_string(bias.numel()) +
                         " values for " + std::to_string(cols) + " features");
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  const auto bd = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bd[c];
  }
  return make_result<T>("add_bias", x.shape(), std::move(out), {&x, &bias},
                        [rows, cols, xn = x.node(), bn = bias.node()](Node<T>& self) {
                          if (auto* dx = grad_of(xn)) accumulate(*dx, self.grad.data());
                          if (auto* db = grad_of(bn)) {
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t c = 0; c < cols; ++c) {
                                (*db)[c] += self.grad[r * cols + c];
                              }
                            }
                          }
                        });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T alpha) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (auto& v : out) v *= alpha;
  return make_result<T>("scale", x.shape(), std::move(out), {&x},
                        [alpha, xn = x.node()](Node<T>& self) {
                          if (auto* dx = grad_of(xn)) {
                            for (std::size_t i = 0; i < dx->size(); ++i) {
                              (*dx)[i] += alpha * self.grad[i];
                            }
                          }
                        });
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (auto& v : out) v = std::max(v, T(0));
  return make_result<T>("relu", x.shape(), std::move(out), {&x},
                        [xn = x.node()](Node<T>& self) {
                          if (auto* dx = grad_of(xn)) {
                            for (std::size_t i = 0; i < dx->size(); ++i) {
                              if (xn->data[i] > T(0)) (*dx)[i] += self.grad[i];
                            }
                          }
                        });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  T total = 0;
  for (const T v : x.data()) total += v;
  return make_result<T>("sum", Shape{1}, std::vector<T>{total}, {&x},
                        [xn = x.node()](Node<T>& self) {
                          if (auto* dx = grad_of(xn)) {
                            for (auto& g : *dx) g += self.grad[0];
                          }
                        });
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) +
                         " as " + shape_string(shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return make_result<T>("reshape", std::move(shape), std::move(out), {&x},
                        [xn = x.node()](Node<T>& self) {
                          if (auto* dx = grad_of(xn)) accumulate(*dx, self.grad.data());
                        });
}

template <typename T>
BasicTensor<T> flatten(const BasicTensor<T>& x) {
  if (x.rank() < 1) throw DimensionError("flatten: rank-0 tensor");
  return reshape(x, Shape{x.dim(0), x.numel() / x.dim(0)});
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                      ConvOptions options) {
  require_rank(input.shape(), 4, "conv2d input");
  require_rank(kernel.shape(), 4, "conv2d kernel");
  if (kernel.dim(1) != input.dim(1)) {
    throw DimensionError("conv2d: kernel expects " + std::to_string(kernel.dim(1)) +
                         " input channels, input has " + std::to_string(input.dim(1)));
  }
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.in_channels = input.dim(1);
  g.height = input.dim(2);
  g.width = input.dim(3);
  g.out_channels = kernel.dim(0);
  g.kernel_h = kernel.dim(2);
  g.kernel_w = kernel.dim(3);
  g.stride_h = g.stride_w = options.stride;
  g.pad_h = g.pad_w = options.padding;
  g.out_h = conv_extent(g.height, g.kernel_h, g.stride_h, g.pad_h, "conv2d");
  g.out_w = conv_extent(g.width, g.kernel_w, g.stride_w, g.pad_w, "conv2d");
  return convolve("conv2d", input, kernel, g,
                  Shape{g.batch, g.out_channels, g.out_h, g.out_w});
}

template <typename T>
BasicTensor<T> conv1d(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                      ConvOptions options) {
  require_rank(input.shape(), 3, "conv1d input");
  require_rank(kernel.shape(), 3, "conv1d kernel");
  if (kernel.dim(1) != input.dim(1)) {
    throw DimensionError("conv1d: kernel expects " + std::to_string(kernel.dim(1)) +
                         " input channels, input has " + std::to_string(input.dim(1)));
  }
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.in_channels = input.dim(1);
  g.height = 1;
  g.width = input.dim(2);
  g.out_channels = kernel.dim(0);
  g.kernel_h = 1;
  g.kernel_w = kernel.dim(2);
  g.stride_h = 1;
  g.stride_w = options.stride;
  g.pad_h = 0;
  g.pad_w = options.padding;
  g.out_h = 1;
  g.out_w = conv_extent(g.width, g.kernel_w, g.stride_w, g.pad_w, "conv1d");
  return convolve("conv1d", input, kernel, g, Shape{g.batch, g.out_channels, g.out_w});
}

template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& input, const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta,
                          std::type_identity_t<RunningStats<T>>* stats,
                          BatchNormOptions options) {
  if (input.rank() < 2) {
    throw DimensionError("batch_norm expects [B x C x ...], got " +
                         shape_string(input.shape()));
  }
  const std::size_t batch = input.dim(0);
  const std::size_t channels = input.dim(1);
  const std::size_t inner = input.numel() / (batch * channels);
  const std::size_t count = batch * inner;
  if (gamma.numel() != channels || beta.numel() != channels) {
    throw DimensionError("batch_norm: affine parameters do not match " +
                         std::to_string(channels) + " channels");
  }
  if (stats && (stats->mean.size() != channels || stats->var.size() != channels)) {
    throw DimensionError("batch_norm: running statistics do not match channels");
  }
  if (options.training && batch < 2) {
    throw DegenerateBatchError("batch_norm: training mode needs a batch of at least 2");
  }
  if (!options.training && !stats) {
    throw DimensionError("batch_norm: evaluation mode requires running statistics");
  }

  const auto x = input.data();
  std::vector<T> mean(channels), inv_std(channels);
  if (options.training) {
    for (std::size_t c = 0; c < channels; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* row = x.data() + (b * channels + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) s += row[i];
      }
      const double mu = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* row = x.data() + (b * channels + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          const double d = row[i] - mu;
          ss += d * d;
        }
      }
      const double var = ss / static_cast<double>(count);
      mean[c] = static_cast<T>(mu);
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + options.eps));
      if (stats) {
        const double m = options.momentum;
        const double unbiased = ss / static_cast<double>(count - 1);
        stats->mean[c] = static_cast<T>((1.0 - m) * stats->mean[c] + m * mu);
        stats->var[c] = static_cast<T>((1.0 - m) * stats->var[c] + m * unbiased);
      }
    }
  } else {
    for (std::size_t c = 0; c < channels; ++c) {
      mean[c] = stats->mean[c];
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(double(stats->var[c]) + options.eps));
    }
  }

  std::vector<T> xhat(input.numel()), out(input.numel());
  const auto g = gamma.data(), bt = beta.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = (b * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const T h = (x[base + i] - mean[c]) * inv_std[c];
        xhat[base + i] = h;
        out[base + i] = g[c] * h + bt[c];
      }
    }
  }

  return make_result<T>(
      "batch_norm", input.shape(), std::move(out), {&input, &gamma, &beta},
      [batch, channels, inner, count, training = options.training,
       xhat = std::move(xhat), inv_std = std::move(inv_std), xn = input.node(),
       gn = gamma.node(), bn = beta.node()](Node<T>& self) {
        const auto& dy = self.grad;
        std::vector<double> sum_dy(channels, 0.0), sum_dy_xhat(channels, 0.0);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t base = (b * channels + c) * inner;
            for (std::size_t i = 0; i < inner; ++i) {
              sum_dy[c] += dy[base + i];
              sum_dy_xhat[c] += dy[base + i] * xhat[base + i];
            }
          }
        }
        if (auto* dg = grad_of(gn)) {
          for (std::size_t c = 0; c < channels; ++c) (*dg)[c] += T(sum_dy_xhat[c]);
        }
        if (auto* db = grad_of(bn)) {
          for (std::size_t c = 0; c < channels; ++c) (*db)[c] += T(sum_dy[c]);
        }
        if (auto* dx = grad_of(xn)) {
          const double n = static_cast<double>(count);
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t c = 0; c < channels; ++c) {
              const double k = gn->data[c] * inv_std[c];
              const std::size_t base = (b * channels + c) * inner;
              for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t j = base + i;
                if (training) {
                  (*dx)[j] += T(k * (dy[j] - sum_dy[c] / n -
                                     xhat[j] * sum_dy_xhat[c] / n));
                } else {
                  (*dx)[j] += T(k * dy[j]);
                }
              }
            }
          }
        }
      });
}

template <typename T>
BasicTensor<T> global_average_pool(const BasicTensor<T>& x) {
  if (x.rank() < 3) {
    throw DimensionError("global_average_pool expects [B x C x ...], got " +
                         shape_string(x.shape()));
  }
  const std::size_t rows = x.dim(0) * x.dim(1);
  const std::size_t inner = x.numel() / rows;
  std::vector<T> out(rows);
  const auto d = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    T s = 0;
    for (std::size_t i = 0; i < inner; ++i) s += d[r * inner + i];
    out[r] = s / static_cast<T>(inner);
  }
  return make_result<T>("global_average_pool", Shape{x.dim(0), x.dim(1)},
                        std::move(out), {&x},
                        [rows, inner, xn = x.node()](Node<T>& self) {
                          if (auto* dx = grad_of(xn)) {
                            const T w = T(1) / static_cast<T>(inner);
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t i = 0; i < inner; ++i) {
                                (*dx)[r * inner + i] += self.grad[r] * w;
                              }
                            }
                          }
                        });
}

template <typename T>
BasicTensor<T> softmax_cross_entropy(const BasicTensor<T>& logits,
                                     std::span<const int> labels) {
  require_rank(logits.shape(), 2, "softmax_cross_entropy");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for a batch of " + std::to_string(batch));
  }
  for (const int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw LabelError("label " + std::to_string(label) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
  }
  const auto z = logits.data();
  std::vector<T> probs(batch * classes);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const T* row = z.data() + b * classes;
    const T peak = *std::max_element(row, row + classes);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(double(row[c] - peak));
    const double log_denom = std::log(denom);
    for (std::size_t c = 0; c < classes; ++c) {
      probs[b * classes + c] = static_cast<T>(std::exp(double(row[c] - peak) - log_denom));
    }
    loss -= double(row[labels[b]] - peak) - log_denom;
  }
  loss /= static_cast<double>(batch);
  std::vector<int> targets(labels.begin(), labels.end());
  return make_result<T>(
      "softmax_cross_entropy", Shape{1}, std::vector<T>{static_cast<T>(loss)}, {&logits},
      [batch, classes, probs = std::move(probs), targets = std::move(targets),
       ln = logits.node()](Node<T>& self) {
        if (auto* dz = grad_of(ln)) {
          const T w = self.grad[0] / static_cast<T>(batch);
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t c = 0; c < classes; ++c) {
              const T onehot = static_cast<int>(c) == targets[b] ? T(1) : T(0);
              (*dz)[b * classes + c] += w * (probs[b * classes + c] - onehot);
            }
          }
        }
      });
}

#define HSISSL_INSTANTIATE_OPS(T)                                                   \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);     \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);        \
  template BasicTensor<T> add_bias(const BasicTensor<T>&, const BasicTensor<T>&);   \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);                          \
  template BasicTensor<T> relu(const BasicTensor<T>&);                              \
  template BasicTensor<T> sum(const BasicTensor<T>&);                               \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                    \
  template BasicTensor<T> flatten(const BasicTensor<T>&);                           \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&,      \
                                 ConvOptions);                                      \
  template BasicTensor<T> conv1d(const BasicTensor<T>&, const BasicTensor<T>&,      \
                                 ConvOptions);                                      \
  template BasicTensor<T> batch_norm(const BasicTensor<T>&, const BasicTensor<T>&,  \
                                     const BasicTensor<T>&, RunningStats<T>*,       \
                                     BatchNormOptions);                             \
  template BasicTensor<T> global_average_pool(const BasicTensor<T>&);               \
  template BasicTensor<T> softmax_cross_entropy(const BasicTensor<T>&,              \
                                                std::span<const int>);

HSISSL_INSTANTIATE_OPS(float)
HSISSL_INSTANTIATE_OPS(double)

#undef HSISSL_INSTANTIATE_OPS

}  // namespace hsissl
