#include "gpsgraph/eigensym.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace gps {

namespace {

double hypot2(double a, double b) { return std::sqrt(a * a + b * b); }

// Householder reduction of a (row-major, symmetric) to tridiagonal form.
// On return a holds the accumulated orthogonal transform Q, d the diagonal
// and e the subdiagonal (e[0] unused).
void tridiagonalize(std::vector<double>& a, std::int64_t n, std::vector<double>& d,
                    std::vector<double>& e) {
  for (std::int64_t i = n - 1; i >= 1; --i) {
    const std::int64_t l = i - 1;
    double h = 0.0, scale = 0.0;
    if (l > 0) {
      for (std::int64_t k = 0; k <= l; ++k) scale += std::fabs(a[i * n + k]);
      if (scale == 0.0) {
        e[i] = a[i * n + l];
      } else {
        for (std::int64_t k = 0; k <= l; ++k) {
          a[i * n + k] /= scale;
          h += a[i * n + k] * a[i * n + k];
        }
        double f = a[i * n + l];
        double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
        e[i] = scale * g;
        h -= f * g;
        a[i * n + l] = f - g;
        f = 0.0;
        for (std::int64_t j = 0; j <= l; ++j) {
          a[j * n + i] = a[i * n + j] / h;
          g = 0.0;
          for (std::int64_t k = 0; k <= j; ++k) g += a[j * n + k] * a[i * n + k];
          for (std::int64_t k = j + 1; k <= l; ++k) g += a[k * n + j] * a[i * n + k];
          e[j] = g / h;
          f += e[j] * a[i * n + j];
        }
        const double hh = f / (h + h);
        for (std::int64_t j = 0; j <= l; ++j) {
          f = a[i * n + j];
          e[j] = g = e[j] - hh * f;
          for (std::int64_t k = 0; k <= j; ++k)
            a[j * n + k] -= f * e[k] + g * a[i * n + k];
        }
      }
    } else {
      e[i] = a[i * n + l];
    }
    d[i] = h;
  }
  d[0] = 0.0;
  e[0] = 0.0;
  // accumulate the transform
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t l = i - 1;
    if (d[i] != 0.0) {
      for (std::int64_t j = 0; j <= l; ++j) {
        double g = 0.0;
        for (std::int64_t k = 0; k <= l; ++k) g += a[i * n + k] * a[k * n + j];
        for (std::int64_t k = 0; k <= l; ++k) a[k * n + j] -= g * a[k * n + i];
      }
    }
    d[i] = a[i * n + i];
    a[i * n + i] = 1.0;
    for (std::int64_t j = 0; j <= l; ++j) a[j * n + i] = a[i * n + j] = 0.0;
  }
}

// Implicit-shift QL on the tridiagonal (d, e), rotations applied to z.
void ql_implicit(std::vector<double>& d, std::vector<double>& e, std::vector<double>& z,
                 std::int64_t n) {
  for (std::int64_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  for (std::int64_t l = 0; l < n; ++l) {
    std::int64_t iter = 0;
    std::int64_t m;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::fabs(d[m]) + std::fabs(d[m + 1]);
        if (std::fabs(e[m]) <= 1e-300 || std::fabs(e[m]) <= 2.3e-16 * dd) break;
      }
      if (m != l) {
        if (++iter == 50)
          throw std::runtime_error("eigen_symmetric: QL failed to converge after 50 sweeps at row " +
                                   std::to_string(l));
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = hypot2(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::fabs(r) : -std::fabs(r)));
        double s = 1.0, c = 1.0, p = 0.0;
        bool underflow = false;
        std::int64_t i;
        for (i = m - 1; i >= l; --i) {
          double f = s * e[i];
          const double b = c * e[i];
          r = hypot2(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          for (std::int64_t k = 0; k < n; ++k) {
            f = z[k * n + i + 1];
            z[k * n + i + 1] = s * z[k * n + i] + c * f;
            z[k * n + i] = c * z[k * n + i] - s * f;
          }
        }
        if (underflow && i >= l) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

}  // namespace

EigenResult eigen_symmetric(const std::vector<double>& matrix, std::int64_t n) {
  if (static_cast<std::int64_t>(matrix.size()) != n * n)
    throw std::invalid_argument("eigen_symmetric: matrix size must be n*n");
  if (n == 0) return {};
  EigenResult res;
  if (n == 1) {
    res.values = {matrix[0]};
    res.vectors = {1.0};
    return res;
  }
  std::vector<double> a = matrix;
  std::vector<double> d(static_cast<std::size_t>(n), 0.0), e(static_cast<std::size_t>(n), 0.0);
  tridiagonalize(a, n, d, e);
  ql_implicit(d, e, a, n);

  // sort ascending, reorder eigenvector columns
  std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::int64_t x, std::int64_t y) { return d[x] < d[y]; });
  res.values.resize(static_cast<std::size_t>(n));
  res.vectors.assign(static_cast<std::size_t>(n * n), 0.0);
  for (std::int64_t j = 0; j < n; ++j) {
    res.values[j] = d[idx[j]];
    for (std::int64_t i = 0; i < n; ++i) res.vectors[i * n + j] = a[i * n + idx[j]];
  }
  return res;
}

}  // namespace gps
