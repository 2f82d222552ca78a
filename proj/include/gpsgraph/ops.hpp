#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gpsgraph/rng.hpp"
#include "gpsgraph/tensor.hpp"

namespace gps {

// Raw GEMM: C = alpha * op(A) * op(B) + beta * C, row-major. Backed by CBLAS
// when available, by blocked loops otherwise.
void dense_gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k,
                double alpha, const double* a, std::int64_t lda, const double* b, std::int64_t ldb,
                double beta, double* c, std::int64_t ldc);

Value matmul(const Value& a, const Value& b);
// x [n x d_in] * w [d_in x d_out] + bias row (bias may be undefined)
Value linear(const Value& x, const Value& w, const Value& bias);

Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value div(const Value& a, const Value& b);
Value scale(const Value& x, double c);
Value add_scalar(const Value& x, double c);
// y = s * x with a learnable scalar s [1x1]
Value scale_by(const Value& x, const Value& s);
Value relu(const Value& x);
Value sigmoid(const Value& x);
Value exp_elem(const Value& x);
Value abs_elem(const Value& x);
// y_ij = x_ij * s_i, s is [n x 1]
Value row_scale(const Value& x, const Value& s);

Value softmax_rows(const Value& x);

Value gather_rows(const Value& x, const std::vector<std::int64_t>& idx);
Value segment_sum(const Value& x, const std::vector<std::int64_t>& seg, std::int64_t num_segments);

Value concat_cols(const std::vector<Value>& xs);
Value concat_rows(const std::vector<Value>& xs);
Value slice_cols(const Value& x, std::int64_t start, std::int64_t len);
Value slice_rows(const Value& x, std::int64_t start, std::int64_t len);
Value reshape(const Value& x, std::int64_t rows, std::int64_t cols);

Value sum_all(const Value& x);
Value mean_all(const Value& x);

enum class Mode { kTrain, kEval };

// Batch normalization over the row axis with learnable affine. Running
// statistics (biased variance) are updated in train mode with the given
// momentum and consumed in eval mode. Train mode requires n >= 2.
Value batchnorm(const Value& x, const Value& gamma, const Value& beta,
                std::vector<double>& running_mean, std::vector<double>& running_var,
                double momentum, double eps, Mode mode);

Value dropout(const Value& x, double p, Mode mode, RngStream& rng);

Value l1_loss(const Value& pred, const std::vector<double>& target);
// Mean (or class-weighted) negative log softmax at the target class.
Value cross_entropy(const Value& logits, const std::vector<std::int64_t>& labels,
                    const std::vector<double>* class_weights = nullptr);

enum class PoolMode { kSum, kMean, kMax };
// Segment-wise reduction of rows; every segment must be non-empty.
Value pool_segments(const Value& x, const std::vector<std::int64_t>& seg,
                    std::int64_t num_segments, PoolMode mode);

// Multi-head softmax attention restricted to each graph segment. seg must be
// nondecreasing. Dropout, when active, is applied to the probability matrix.
Value segment_attention(const Value& q, const Value& k, const Value& v,
                        const std::vector<std::int64_t>& seg, std::int64_t num_segments,
                        std::int64_t heads, double attn_dropout, Mode mode, RngStream& rng);

// Performer positive-random-feature attention per segment; never materializes
// an N x N matrix. features holds heads * m_feat * head_dim Gaussian draws.
Value performer_attention(const Value& q, const Value& k, const Value& v,
                          const std::vector<std::int64_t>& seg, std::int64_t num_segments,
                          std::int64_t heads, const std::vector<double>& features,
                          std::int64_t m_feat);

}  // namespace gps
