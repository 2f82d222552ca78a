#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gpsgraph/ops.hpp"

#ifdef GPS_USE_CBLAS
#include <cblas.h>
#endif

namespace gps {

void dense_gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k,
                double alpha, const double* a, std::int64_t lda, const double* b, std::int64_t ldb,
                double beta, double* c, std::int64_t ldc) {
#ifdef GPS_USE_CBLAS
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), alpha, a, static_cast<int>(lda), b, static_cast<int>(ldb), beta,
              c, static_cast<int>(ldc));
#else
  if (beta != 1.0) {
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < n; ++j) c[i * ldc + j] *= beta;
  }
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t p = 0; p < k; ++p) {
      const double av = alpha * (trans_a ? a[p * lda + i] : a[i * lda + p]);
      if (av == 0.0) continue;
      const double* brow = trans_b ? nullptr : b + p * ldb;
      if (trans_b) {
        for (std::int64_t j = 0; j < n; ++j) c[i * ldc + j] += av * b[j * ldb + p];
      } else {
        for (std::int64_t j = 0; j < n; ++j) c[i * ldc + j] += av * brow[j];
      }
    }
  }
#endif
}

namespace {

void check_same_shape(const Value& a, const Value& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace

Value matmul(const Value& a, const Value& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  const std::int64_t p = a.rows(), q = a.cols(), r = b.cols();
  Value out = make_op(p, r, "matmul", {a, b}, [a, b, p, q, r](detail::Node& n) {
    if (a.requires_grad()) {
      // dA += dC * B^T
      dense_gemm(false, true, p, q, r, 1.0, n.grad.data(), r, b.data().data(), r, 1.0,
                 a.node()->grad.data(), q);
    }
    if (b.requires_grad()) {
      // dB += A^T * dC
      dense_gemm(true, false, q, r, p, 1.0, a.data().data(), q, n.grad.data(), r, 1.0,
                 b.node()->grad.data(), r);
    }
  });
  dense_gemm(false, false, p, r, q, 1.0, a.data().data(), q, b.data().data(), r, 0.0,
             out.mutable_data().data(), r);
  return out;
}

Value linear(const Value& x, const Value& w, const Value& bias) {
  if (x.cols() != w.rows()) throw std::invalid_argument("linear: inner dimensions differ");
  if (bias.defined() && (bias.rows() != 1 || bias.cols() != w.cols()))
    throw std::invalid_argument("linear: bias shape mismatch");
  const std::int64_t n = x.rows(), din = x.cols(), dout = w.cols();
  std::vector<Value> parents{x, w};
  if (bias.defined()) parents.push_back(bias);
  Value out = make_op(n, dout, "linear", parents, [x, w, bias, n, din, dout](detail::Node& nd) {
    if (x.requires_grad())
      dense_gemm(false, true, n, din, dout, 1.0, nd.grad.data(), dout, w.data().data(), dout, 1.0,
                 x.node()->grad.data(), din);
    if (w.requires_grad())
      dense_gemm(true, false, din, dout, n, 1.0, x.data().data(), din, nd.grad.data(), dout, 1.0,
                 w.node()->grad.data(), dout);
    if (bias.defined() && bias.requires_grad()) {
      auto& bg = bias.node()->grad;
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < dout; ++j) bg[j] += nd.grad[i * dout + j];
    }
  });
  auto& y = out.mutable_data();
  if (bias.defined()) {
    for (std::int64_t i = 0; i < n; ++i)
      std::copy(bias.data().begin(), bias.data().end(), y.begin() + i * dout);
    dense_gemm(false, false, n, dout, din, 1.0, x.data().data(), din, w.data().data(), dout, 1.0,
               y.data(), dout);
  } else {
    dense_gemm(false, false, n, dout, din, 1.0, x.data().data(), din, w.data().data(), dout, 0.0,
               y.data(), dout);
  }
  return out;
}

Value add(const Value& a, const Value& b) {
  check_same_shape(a, b, "add");
  Value out = make_op(a.rows(), a.cols(), "add", {a, b}, [a, b](detail::Node& n) {
    if (a.requires_grad()) {
      auto& g = a.node()->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
    if (b.requires_grad()) {
      auto& g = b.node()->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  });
  auto& y = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] + b.data()[i];
  return out;
}

Value sub(const Value& a, const Value& b) { return add(a, scale(b, -1.0)); }

Value mul(const Value& a, const Value& b) {
  check_same_shape(a, b, "mul");
  Value out = make_op(a.rows(), a.cols(), "mul", {a, b}, [a, b](detail::Node& n) {
    if (a.requires_grad()) {
      auto& g = a.node()->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * b.data()[i];
    }
    if (b.requires_grad()) {
      auto& g = b.node()->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * a.data()[i];
    }
  });
  auto& y = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] * b.data()[i];
  return out;
}

Value div(const Value& a, const Value& b) {
  check_same_shape(a, b, "div");
  Value out = make_op(a.rows(), a.cols(), "div", {a, b}, [a, b](detail::Node& n) {
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      const double inv = 1.0 / b.data()[i];
      if (a.requires_grad()) a.node()->grad[i] += n.grad[i] * inv;
      if (b.requires_grad()) b.node()->grad[i] -= n.grad[i] * a.data()[i] * inv * inv;
    }
  });
  auto& y = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] / b.data()[i];
  return out;
}

Value scale(const Value& x, double c) {
  Value out = make_op(x.rows(), x.cols(), "scale", {x}, [x, c](detail::Node& n) {
    auto& g = x.node()->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * n.grad[i];
  });
  auto& y = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = c * x.data()[i];
  return out;
}

Value add_scalar(const Value& x, double c) {
  Value out = make_op(x.rows(), x.cols(), "add_scalar", {x}, [x](detail::Node& n) {
    auto& g = x.node()->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
  auto& y = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x.data()[i] + c;
  return out;
}

Value scale_by(const Value& x, const Value& s) {
  if (s.size() != 1) throw std::invalid_argument("scale_by: s must be scalar");
  Value out = make_op(x.rows(), x.cols(), "scale_by", {x, s}, [x, s](detail::Node& n) {
    const double sv = s.data()[0];
    if (x.requires_grad()) {
      auto& g = x.node()->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sv * n.grad[i];
    }
    if (s.requires_grad()) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n.grad.size(); ++i) acc += n.grad[i] * x.data()[i];
      s.node()->grad[0] += acc;
    }
  });
  auto& y = out.mutable_data();
  const double sv = s.data()[0];
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = sv * x.data()[i];
  return out;
}

Value relu(const Value& x) {
  // subgradient 0 at the kink
  Value out = make_op(x.rows(), x.cols(), "relu", {x}, [x](detail::Node& n) {
    auto& g = x.node()->grad;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x.data()[i] > 0.0) g[i] += n.grad[i];
  });
  auto& y = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
  return out;
}

Value sigmoid(const Value& x) {
  Value out = make_op(x.rows(), x.cols(), "sigmoid", {x}, [x](detail::Node& n) {
    auto& g = x.node()->grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = n.data[i];
      g[i] += n.grad[i] * s * (1.0 - s);
    }
  });
  auto& y = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x.data()[i]));
  return out;
}

Value exp_elem(const Value& x) {
  Value out = make_op(x.rows(), x.cols(), "exp", {x}, [x](detail::Node& n) {
    auto& g = x.node()->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * n.data[i];
  });
  auto& y = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::exp(x.data()[i]);
  return out;
}

Value abs_elem(const Value& x) {
  Value out = make_op(x.rows(), x.cols(), "abs", {x}, [x](detail::Node& n) {
    auto& g = x.node()->grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = x.data()[i];
      g[i] += n.grad[i] * (v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
    }
  });
  auto& y = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::fabs(x.data()[i]);
  return out;
}

Value row_scale(const Value& x, const Value& s) {
  if (s.rows() != x.rows() || s.cols() != 1)
    throw std::invalid_argument("row_scale: s must be [n x 1]");
  const std::int64_t n = x.rows(), d = x.cols();
  Value out = make_op(n, d, "row_scale", {x, s}, [x, s, n, d](detail::Node& nd) {
    for (std::int64_t i = 0; i < n; ++i) {
      const double sv = s.data()[i];
      double acc = 0.0;
      for (std::int64_t j = 0; j < d; ++j) {
        const double g = nd.grad[i * d + j];
        if (x.requires_grad()) x.node()->grad[i * d + j] += g * sv;
        acc += g * x.data()[i * d + j];
      }
      if (s.requires_grad()) s.node()->grad[i] += acc;
    }
  });
  auto& y = out.mutable_data();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < d; ++j) y[i * d + j] = x.data()[i * d + j] * s.data()[i];
  return out;
}

Value softmax_rows(const Value& x) {
  const std::int64_t n = x.rows(), d = x.cols();
  Value out = make_op(n, d, "softmax_rows", {x}, [x, n, d](detail::Node& nd) {
    auto& g = x.node()->grad;
    for (std::int64_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::int64_t j = 0; j < d; ++j) dot += nd.grad[i * d + j] * nd.data[i * d + j];
      for (std::int64_t j = 0; j < d; ++j)
        g[i * d + j] += nd.data[i * d + j] * (nd.grad[i * d + j] - dot);
    }
  });
  auto& y = out.mutable_data();
  for (std::int64_t i = 0; i < n; ++i) {
    double mx = x.data()[i * d];
    for (std::int64_t j = 1; j < d; ++j) mx = std::max(mx, x.data()[i * d + j]);
    double sum = 0.0;
    for (std::int64_t j = 0; j < d; ++j) {
      y[i * d + j] = std::exp(x.data()[i * d + j] - mx);
      sum += y[i * d + j];
    }
    const double inv = 1.0 / sum;
    for (std::int64_t j = 0; j < d; ++j) y[i * d + j] *= inv;
  }
  return out;
}

Value gather_rows(const Value& x, const std::vector<std::int64_t>& idx) {
  const std::int64_t d = x.cols();
  for (std::int64_t i : idx)
    if (i < 0 || i >= x.rows()) throw std::out_of_range("gather_rows: index out of range");
  const auto n = static_cast<std::int64_t>(idx.size());
  Value out = make_op(n, d, "gather_rows", {x}, [x, idx, n, d](detail::Node& nd) {
    auto& g = x.node()->grad;
    for (std::int64_t i = 0; i < n; ++i) {
      const std::int64_t r = idx[static_cast<std::size_t>(i)];
      for (std::int64_t j = 0; j < d; ++j) g[r * d + j] += nd.grad[i * d + j];
    }
  });
  auto& y = out.mutable_data();
  for (std::int64_t i = 0; i < n; ++i)
    std::copy_n(x.data().begin() + idx[static_cast<std::size_t>(i)] * d, d, y.begin() + i * d);
  return out;
}

Value segment_sum(const Value& x, const std::vector<std::int64_t>& seg,
                  std::int64_t num_segments) {
  if (static_cast<std::int64_t>(seg.size()) != x.rows())
    throw std::invalid_argument("segment_sum: seg length must equal row count");
  for (std::int64_t s : seg)
    if (s < 0 || s >= num_segments) throw std::out_of_range("segment_sum: index out of range");
  const std::int64_t n = x.rows(), d = x.cols();
  Value out = make_op(num_segments, d, "segment_sum", {x}, [x, seg, n, d](detail::Node& nd) {
    auto& g = x.node()->grad;
    for (std::int64_t i = 0; i < n; ++i) {
      const std::int64_t s = seg[static_cast<std::size_t>(i)];
      for (std::int64_t j = 0; j < d; ++j) g[i * d + j] += nd.grad[s * d + j];
    }
  });
  auto& y = out.mutable_data();
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t s = seg[static_cast<std::size_t>(i)];
    for (std::int64_t j = 0; j < d; ++j) y[s * d + j] += x.data()[i * d + j];
  }
  return out;
}

Value concat_cols(const std::vector<Value>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: empty input");
  const std::int64_t n = xs[0].rows();
  std::int64_t d = 0;
  for (const Value& x : xs) {
    if (x.rows() != n) throw std::invalid_argument("concat_cols: row count mismatch");
    d += x.cols();
  }
  Value out = make_op(n, d, "concat_cols", xs, [xs, n, d](detail::Node& nd) {
    std::int64_t off = 0;
    for (const Value& x : xs) {
      const std::int64_t c = x.cols();
      if (x.requires_grad()) {
        auto& g = x.node()->grad;
        for (std::int64_t i = 0; i < n; ++i)
          for (std::int64_t j = 0; j < c; ++j) g[i * c + j] += nd.grad[i * d + off + j];
      }
      off += c;
    }
  });
  auto& y = out.mutable_data();
  std::int64_t off = 0;
  for (const Value& x : xs) {
    const std::int64_t c = x.cols();
    for (std::int64_t i = 0; i < n; ++i)
      std::copy_n(x.data().begin() + i * c, c, y.begin() + i * d + off);
    off += c;
  }
  return out;
}

Value concat_rows(const std::vector<Value>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_rows: empty input");
  const std::int64_t d = xs[0].cols();
  std::int64_t n = 0;
  for (const Value& x : xs) {
    if (x.cols() != d) throw std::invalid_argument("concat_rows: column count mismatch");
    n += x.rows();
  }
  Value out = make_op(n, d, "concat_rows", xs, [xs, d](detail::Node& nd) {
    std::int64_t off = 0;
    for (const Value& x : xs) {
      const std::int64_t r = x.rows();
      if (x.requires_grad()) {
        auto& g = x.node()->grad;
        for (std::int64_t i = 0; i < r * d; ++i) g[i] += nd.grad[off * d + i];
      }
      off += r;
    }
  });
  auto& y = out.mutable_data();
  std::int64_t off = 0;
  for (const Value& x : xs) {
    std::copy(x.data().begin(), x.data().end(), y.begin() + off * d);
    off += x.rows();
  }
  return out;
}

Value slice_cols(const Value& x, std::int64_t start, std::int64_t len) {
  if (start < 0 || len < 0 || start + len > x.cols())
    throw std::out_of_range("slice_cols: range out of bounds");
  const std::int64_t n = x.rows(), d = x.cols();
  Value out = make_op(n, len, "slice_cols", {x}, [x, start, len, n, d](detail::Node& nd) {
    auto& g = x.node()->grad;
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < len; ++j) g[i * d + start + j] += nd.grad[i * len + j];
  });
  auto& y = out.mutable_data();
  for (std::int64_t i = 0; i < n; ++i)
    std::copy_n(x.data().begin() + i * d + start, len, y.begin() + i * len);
  return out;
}

Value slice_rows(const Value& x, std::int64_t start, std::int64_t len) {
  if (start < 0 || len < 0 || start + len > x.rows())
    throw std::out_of_range("slice_rows: range out of bounds");
  const std::int64_t d = x.cols();
  Value out = make_op(len, d, "slice_rows", {x}, [x, start, len, d](detail::Node& nd) {
    auto& g = x.node()->grad;
    for (std::int64_t i = 0; i < len * d; ++i) g[start * d + i] += nd.grad[i];
  });
  auto& y = out.mutable_data();
  std::copy_n(x.data().begin() + start * d, len * d, y.begin());
  return out;
}

Value reshape(const Value& x, std::int64_t rows, std::int64_t cols) {
  if (rows * cols != x.size()) throw std::invalid_argument("reshape: element count mismatch");
  Value out = make_op(rows, cols, "reshape", {x}, [x](detail::Node& nd) {
    auto& g = x.node()->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += nd.grad[i];
  });
  out.mutable_data() = x.data();
  return out;
}

Value sum_all(const Value& x) {
  Value out = make_op(1, 1, "sum_all", {x}, [x](detail::Node& nd) {
    auto& g = x.node()->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += nd.grad[0];
  });
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  out.mutable_data()[0] = acc;
  return out;
}

Value mean_all(const Value& x) { return scale(sum_all(x), 1.0 / static_cast<double>(x.size())); }

Value batchnorm(const Value& x, const Value& gamma, const Value& beta,
                std::vector<double>& running_mean, std::vector<double>& running_var,
                double momentum, double eps, Mode mode) {
  const std::int64_t n = x.rows(), d = x.cols();
  if (gamma.cols() != d || beta.cols() != d || gamma.rows() != 1 || beta.rows() != 1)
    throw std::invalid_argument("batchnorm: affine parameter shape mismatch");
  if (static_cast<std::int64_t>(running_mean.size()) != d ||
      static_cast<std::int64_t>(running_var.size()) != d)
    throw std::invalid_argument("batchnorm: running statistics size mismatch");
  if (mode == Mode::kTrain && n < 2)
    throw std::invalid_argument("batchnorm: train mode requires at least 2 rows");

  std::vector<double> mean(d, 0.0), inv_std(d, 0.0);
  if (mode == Mode::kTrain) {
    std::vector<double> var(d, 0.0);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < d; ++j) mean[j] += x.data()[i * d + j];
    for (std::int64_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < d; ++j) {
        const double c = x.data()[i * d + j] - mean[j];
        var[j] += c * c;
      }
    for (std::int64_t j = 0; j < d; ++j) {
      var[j] /= static_cast<double>(n);
      inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
      running_mean[j] = (1.0 - momentum) * running_mean[j] + momentum * mean[j];
      running_var[j] = (1.0 - momentum) * running_var[j] + momentum * var[j];
    }
  } else {
    for (std::int64_t j = 0; j < d; ++j) {
      mean[j] = running_mean[j];
      inv_std[j] = 1.0 / std::sqrt(running_var[j] + eps);
    }
  }

  auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n * d));
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < d; ++j)
      (*xhat)[i * d + j] = (x.data()[i * d + j] - mean[j]) * inv_std[j];

  const bool train = mode == Mode::kTrain;
  Value out = make_op(
      n, d, "batchnorm", {x, gamma, beta},
      [x, gamma, beta, xhat, inv_std, n, d, train](detail::Node& nd) {
        // row-major sweeps; column accumulators stay cache resident
        std::vector<double> dbeta(static_cast<std::size_t>(d), 0.0);
        std::vector<double> dgamma(static_cast<std::size_t>(d), 0.0);
        for (std::int64_t i = 0; i < n; ++i)
          for (std::int64_t j = 0; j < d; ++j) {
            dbeta[j] += nd.grad[i * d + j];
            dgamma[j] += nd.grad[i * d + j] * (*xhat)[i * d + j];
          }
        if (beta.requires_grad())
          for (std::int64_t j = 0; j < d; ++j) beta.node()->grad[j] += dbeta[j];
        if (gamma.requires_grad())
          for (std::int64_t j = 0; j < d; ++j) gamma.node()->grad[j] += dgamma[j];
        if (!x.requires_grad()) return;
        if (train) {
          // batch statistics depend on x
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < d; ++j) {
              const double g = gamma.data()[j];
              x.node()->grad[i * d + j] +=
                  inv_std[j] * (nd.grad[i * d + j] * g - inv_n * g * dbeta[j] -
                                (*xhat)[i * d + j] * inv_n * g * dgamma[j]);
            }
        } else {
          for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < d; ++j)
              x.node()->grad[i * d + j] += nd.grad[i * d + j] * gamma.data()[j] * inv_std[j];
        }
      });
  auto& y = out.mutable_data();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < d; ++j)
      y[i * d + j] = gamma.data()[j] * (*xhat)[i * d + j] + beta.data()[j];
  return out;
}

Value dropout(const Value& x, double p, Mode mode, RngStream& rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (mode == Mode::kEval || p == 0.0) return x;
  const double keep = 1.0 - p;
  const double inv_keep = 1.0 / keep;
  auto mask = std::make_shared<std::vector<double>>(static_cast<std::size_t>(x.size()));
  for (auto& m : *mask) m = rng.uniform() < keep ? inv_keep : 0.0;
  Value out = make_op(x.rows(), x.cols(), "dropout", {x}, [x, mask](detail::Node& nd) {
    auto& g = x.node()->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += nd.grad[i] * (*mask)[i];
  });
  auto& y = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x.data()[i] * (*mask)[i];
  return out;
}

Value l1_loss(const Value& pred, const std::vector<double>& target) {
  if (static_cast<std::int64_t>(target.size()) != pred.size())
    throw std::invalid_argument("l1_loss: target length mismatch");
  const auto n = static_cast<double>(pred.size());
  Value out = make_op(1, 1, "l1_loss", {pred}, [pred, target, n](detail::Node& nd) {
    auto& g = pred.node()->grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double diff = pred.data()[i] - target[i];
      g[i] += nd.grad[0] * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) / n;
    }
  });
  double acc = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) acc += std::fabs(pred.data()[i] - target[i]);
  out.mutable_data()[0] = acc / n;
  return out;
}

Value cross_entropy(const Value& logits, const std::vector<std::int64_t>& labels,
                    const std::vector<double>* class_weights) {
  const std::int64_t n = logits.rows(), c = logits.cols();
  if (static_cast<std::int64_t>(labels.size()) != n)
    throw std::invalid_argument("cross_entropy: label count mismatch");
  for (std::int64_t y : labels)
    if (y < 0 || y >= c) throw std::out_of_range("cross_entropy: class index out of range");
  if (class_weights && static_cast<std::int64_t>(class_weights->size()) != c)
    throw std::invalid_argument("cross_entropy: weight count mismatch");

  auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n * c));
  auto wsum = std::make_shared<double>(0.0);
  std::vector<double> w(static_cast<std::size_t>(n), 1.0);
  double loss = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    double mx = logits.data()[i * c];
    for (std::int64_t j = 1; j < c; ++j) mx = std::max(mx, logits.data()[i * c + j]);
    double sum = 0.0;
    for (std::int64_t j = 0; j < c; ++j) sum += std::exp(logits.data()[i * c + j] - mx);
    const double log_z = mx + std::log(sum);
    for (std::int64_t j = 0; j < c; ++j)
      (*probs)[i * c + j] = std::exp(logits.data()[i * c + j] - log_z);
    if (class_weights) w[i] = (*class_weights)[labels[static_cast<std::size_t>(i)]];
    loss += w[i] * (log_z - logits.data()[i * c + labels[static_cast<std::size_t>(i)]]);
    *wsum += w[i];
  }
  Value out = make_op(1, 1, "cross_entropy", {logits},
                      [logits, labels, probs, wsum, w, n, c](detail::Node& nd) {
                        auto& g = logits.node()->grad;
                        const double inv = nd.grad[0] / *wsum;
                        for (std::int64_t i = 0; i < n; ++i) {
                          for (std::int64_t j = 0; j < c; ++j)
                            g[i * c + j] += inv * w[i] * (*probs)[i * c + j];
                          g[i * c + labels[static_cast<std::size_t>(i)]] -= inv * w[i];
                        }
                      });
  out.mutable_data()[0] = loss / *wsum;
  return out;
}

Value pool_segments(const Value& x, const std::vector<std::int64_t>& seg,
                    std::int64_t num_segments, PoolMode mode) {
  if (static_cast<std::int64_t>(seg.size()) != x.rows())
    throw std::invalid_argument("pool_segments: seg length must equal row count");
  const std::int64_t d = x.cols();
  std::vector<std::int64_t> count(static_cast<std::size_t>(num_segments), 0);
  for (std::int64_t s : seg) {
    if (s < 0 || s >= num_segments) throw std::out_of_range("pool_segments: index out of range");
    ++count[static_cast<std::size_t>(s)];
  }
  for (std::int64_t s = 0; s < num_segments; ++s)
    if (count[static_cast<std::size_t>(s)] == 0)
      throw std::invalid_argument("pool_segments: empty segment " + std::to_string(s));

  if (mode == PoolMode::kSum) return segment_sum(x, seg, num_segments);
  if (mode == PoolMode::kMean) {
    Value sums = segment_sum(x, seg, num_segments);
    std::vector<double> inv(static_cast<std::size_t>(num_segments));
    for (std::int64_t s = 0; s < num_segments; ++s)
      inv[static_cast<std::size_t>(s)] = 1.0 / static_cast<double>(count[s]);
    return row_scale(sums, Value::from_data(num_segments, 1, std::move(inv)));
  }

  // max: route gradient to the argmax row, lowest index on ties
  auto argmax = std::make_shared<std::vector<std::int64_t>>(
      static_cast<std::size_t>(num_segments * d), -1);
  Value out = make_op(num_segments, d, "pool_max", {x}, [x, argmax, d](detail::Node& nd) {
    auto& g = x.node()->grad;
    for (std::size_t i = 0; i < argmax->size(); ++i)
      g[(*argmax)[i] * d + static_cast<std::int64_t>(i % static_cast<std::size_t>(d))] +=
          nd.grad[i];
  });
  auto& y = out.mutable_data();
  std::vector<bool> seen(static_cast<std::size_t>(num_segments), false);
  for (std::int64_t i = 0; i < x.rows(); ++i) {
    const std::int64_t s = seg[static_cast<std::size_t>(i)];
    for (std::int64_t j = 0; j < d; ++j) {
      const double v = x.data()[i * d + j];
      if (!seen[static_cast<std::size_t>(s)] || v > y[s * d + j]) {
        y[s * d + j] = v;
        (*argmax)[s * d + j] = i;
      }
    }
    seen[static_cast<std::size_t>(s)] = true;
  }
  return out;
}

}  // namespace gps
