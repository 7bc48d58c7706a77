#include "hsissl/barlow_twins.hpp"

#include <Eigen/Core>
#include <cmath>

#include "autograd_impl.hpp"

namespace hsissl {
namespace {

using detail::grad_of;
using detail::make_result;
using detail::Node;

using MatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VecD = Eigen::VectorXd;

// Column-centres (optionally) and unit-normalizes a [batch x D] matrix.
// Returns the normalized matrix and the per-column norms used.
template <typename T>
std::pair<MatD, VecD> normalize_columns(const BasicTensor<T>& z, bool center, double eps) {
  const auto rows = static_cast<Eigen::Index>(z.dim(0));
  const auto cols = static_cast<Eigen::Index>(z.dim(1));
  MatD m(rows, cols);
  const auto data = z.data();
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[r * cols + c];
  }
  if (center) m.rowwise() -= m.colwise().mean();
  VecD norms = (m.colwise().squaredNorm().array() + eps).sqrt().transpose();
  for (Eigen::Index c = 0; c < cols; ++c) m.col(c) /= norms(c);
  return {std::move(m), std::move(norms)};
}

// Adjoint of normalize_columns for an upstream gradient on the output.
MatD normalize_columns_backward(const MatD& upstream, const MatD& normalized,
                                const VecD& norms, bool center) {
  MatD grad = upstream;
  for (Eigen::Index c = 0; c < grad.cols(); ++c) {
    const double projection = upstream.col(c).dot(normalized.col(c));
    grad.col(c) = (upstream.col(c) - normalized.col(c) * projection) / norms(c);
  }
  if (center) grad.rowwise() -= grad.colwise().mean();
  return grad;
}

}  // namespace

template <typename T>
BasicTensor<T> cross_correlation(const BasicTensor<T>& z_a, const BasicTensor<T>& z_b,
                                 CorrelationOptions options) {
  if (z_a.rank() != 2 || z_a.shape() != z_b.shape()) {
    throw DimensionError("cross_correlation expects two [batch x D] inputs, got " +
                         shape_string(z_a.shape()) + " and " + shape_string(z_b.shape()));
  }
  if (z_a.dim(0) < 2) {
    throw DegenerateBatchError("cross_correlation needs a batch of at least 2");
  }
  const std::size_t d = z_a.dim(1);
  auto [a_hat, a_norm] = normalize_columns(z_a, options.center, options.eps);
  auto [b_hat, b_norm] = normalize_columns(z_b, options.center, options.eps);
  // Entry-wise dot products with one fixed reduction order, so swapping the
  // branches yields exactly the transpose.
  const MatD a_t = a_hat.transpose();
  const MatD b_t = b_hat.transpose();
  std::vector<T> out(d * d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      out[i * d + j] = static_cast<T>(a_t.row(Eigen::Index(i)).dot(b_t.row(Eigen::Index(j))));
    }
  }

  return make_result<T>(
      "cross_correlation", Shape{d, d}, std::move(out), {&z_a, &z_b},
      [d, center = options.center, a_hat = std::move(a_hat), a_norm = std::move(a_norm),
       b_hat = std::move(b_hat), b_norm = std::move(b_norm), an = z_a.node(),
       bn = z_b.node()](Node<T>& self) {
        MatD g(d, d);
        for (std::size_t i = 0; i < d * d; ++i) g.data()[i] = self.grad[i];
        if (auto* da = grad_of(an)) {
          const MatD up = b_hat * g.transpose();
          const MatD gz = normalize_columns_backward(up, a_hat, a_norm, center);
          for (Eigen::Index i = 0; i < gz.size(); ++i) (*da)[i] += static_cast<T>(gz.data()[i]);
        }
        if (auto* db = grad_of(bn)) {
          const MatD up = a_hat * g;
          const MatD gz = normalize_columns_backward(up, b_hat, b_norm, center);
          for (Eigen::Index i = 0; i < gz.size(); ++i) (*db)[i] += static_cast<T>(gz.data()[i]);
        }
      });
}

template <typename T>
BasicTensor<T> barlow_twins_loss(const BasicTensor<T>& correlation, double lambda) {
  if (correlation.rank() != 2 || correlation.dim(0) != correlation.dim(1)) {
    throw DimensionError("barlow_twins_loss expects a square matrix, got " +
                         shape_string(correlation.shape()));
  }
  const std::size_t d = correlation.dim(0);
  const auto c = correlation.data();
  double invariance = 0.0, redundancy = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double v = c[i * d + j];
      if (i == j) {
        invariance += (1.0 - v) * (1.0 - v);
      } else {
        redundancy += v * v;
      }
    }
  }
  const double loss = invariance + lambda * redundancy;
  return make_result<T>("barlow_twins_loss", Shape{1}, std::vector<T>{static_cast<T>(loss)},
                        {&correlation},
                        [d, lambda, cn = correlation.node()](Node<T>& self) {
                          if (auto* dc = grad_of(cn)) {
                            const double up = self.grad[0];
                            for (std::size_t i = 0; i < d; ++i) {
                              for (std::size_t j = 0; j < d; ++j) {
                                const double v = cn->data[i * d + j];
                                const double g = i == j ? -2.0 * (1.0 - v) : 2.0 * lambda * v;
                                (*dc)[i * d + j] += static_cast<T>(up * g);
                              }
                            }
                          }
                        });
}

double mean_abs_off_diagonal(const Tensor& correlation) {
  const std::size_t d = correlation.dim(0);
  if (d < 2) return 0.0;
  const auto c = correlation.data();
  double total = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (i != j) total += std::abs(double(c[i * d + j]));
    }
  }
  return total / double(d * (d - 1));
}

template BasicTensor<float> cross_correlation(const BasicTensor<float>&,
                                              const BasicTensor<float>&, CorrelationOptions);
template BasicTensor<double> cross_correlation(const BasicTensor<double>&,
                                               const BasicTensor<double>&, CorrelationOptions);
template BasicTensor<float> barlow_twins_loss(const BasicTensor<float>&, double);
template BasicTensor<double> barlow_twins_loss(const BasicTensor<double>&, double);

}  // namespace hsissl
