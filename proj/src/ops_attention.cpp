#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "gpsgraph/ops.hpp"

namespace gps {

namespace {

// Segment boundaries from a nondecreasing segment index array.
std::vector<std::int64_t> segment_starts(const std::vector<std::int64_t>& seg,
                                         std::int64_t num_segments, std::int64_t n) {
  std::vector<std::int64_t> starts(static_cast<std::size_t>(num_segments) + 1, 0);
  std::int64_t prev = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t s = seg[static_cast<std::size_t>(i)];
    if (s < prev || s >= num_segments)
      throw std::invalid_argument("attention: segment index must be nondecreasing and in range");
    prev = s;
    ++starts[static_cast<std::size_t>(s) + 1];
  }
  for (std::int64_t s = 0; s < num_segments; ++s)
    starts[static_cast<std::size_t>(s) + 1] += starts[static_cast<std::size_t>(s)];
  return starts;
}

void check_qkv(const Value& q, const Value& k, const Value& v, std::int64_t heads) {
  if (q.rows() != k.rows() || q.rows() != v.rows() || q.cols() != k.cols() ||
      q.cols() != v.cols())
    throw std::invalid_argument("attention: q, k, v shapes must match");
  if (heads < 1 || q.cols() % heads != 0)
    throw std::invalid_argument("attention: head count must divide feature dim");
}

}  // namespace

Value segment_attention(const Value& q, const Value& k, const Value& v,
                        const std::vector<std::int64_t>& seg, std::int64_t num_segments,
                        std::int64_t heads, double attn_dropout, Mode mode, RngStream& rng) {
  check_qkv(q, k, v, heads);
  const std::int64_t n = q.rows(), d = q.cols(), dh = d / heads;
  if (static_cast<std::int64_t>(seg.size()) != n)
    throw std::invalid_argument("attention: seg length must equal row count");
  const auto starts = segment_starts(seg, num_segments, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool needs_grad = q.requires_grad() || k.requires_grad() || v.requires_grad();
  const bool use_dropout = mode == Mode::kTrain && attn_dropout > 0.0;
  const double inv_keep = use_dropout ? 1.0 / (1.0 - attn_dropout) : 1.0;

  // probs[g*heads+h] holds the post-softmax matrix; masks hold 0 / 1/(1-p)
  auto probs = std::make_shared<std::vector<std::vector<double>>>();
  auto masks = std::make_shared<std::vector<std::vector<double>>>();
  probs->resize(static_cast<std::size_t>(num_segments * heads));
  if (use_dropout) masks->resize(static_cast<std::size_t>(num_segments * heads));

  Value out = make_op(
      n, d, "segment_attention", {q, k, v},
      [q, k, v, starts, num_segments, heads, dh, d, scale, probs, masks, use_dropout](
          detail::Node& nd) {
        std::vector<double> ptilde, dp, ds;
        for (std::int64_t g = 0; g < num_segments; ++g) {
          const std::int64_t beg = starts[static_cast<std::size_t>(g)];
          const std::int64_t ng = starts[static_cast<std::size_t>(g) + 1] - beg;
          if (ng == 0) continue;
          for (std::int64_t h = 0; h < heads; ++h) {
            const auto slot = static_cast<std::size_t>(g * heads + h);
            const std::vector<double>& p = (*probs)[slot];
            const double* dout = nd.grad.data() + beg * d + h * dh;
            const double* vsub = v.data().data() + beg * d + h * dh;
            const double* qsub = q.data().data() + beg * d + h * dh;
            const double* ksub = k.data().data() + beg * d + h * dh;
            ptilde.assign(p.begin(), p.end());
            if (use_dropout) {
              const auto& m = (*masks)[slot];
              for (std::size_t i = 0; i < ptilde.size(); ++i) ptilde[i] *= m[i];
            }
            if (v.requires_grad())
              dense_gemm(true, false, ng, dh, ng, 1.0, ptilde.data(), ng, dout, d, 1.0,
                         v.node()->grad.data() + beg * d + h * dh, d);
            if (!q.requires_grad() && !k.requires_grad()) continue;
            dp.assign(static_cast<std::size_t>(ng * ng), 0.0);
            dense_gemm(false, true, ng, ng, dh, 1.0, dout, d, vsub, d, 0.0, dp.data(), ng);
            if (use_dropout) {
              const auto& m = (*masks)[slot];
              for (std::size_t i = 0; i < dp.size(); ++i) dp[i] *= m[i];
            }
            ds.assign(static_cast<std::size_t>(ng * ng), 0.0);
            for (std::int64_t i = 0; i < ng; ++i) {
              double dot = 0.0;
              for (std::int64_t j = 0; j < ng; ++j) dot += dp[i * ng + j] * p[i * ng + j];
              for (std::int64_t j = 0; j < ng; ++j)
                ds[i * ng + j] = p[i * ng + j] * (dp[i * ng + j] - dot);
            }
            if (q.requires_grad())
              dense_gemm(false, false, ng, dh, ng, scale, ds.data(), ng, ksub, d, 1.0,
                         q.node()->grad.data() + beg * d + h * dh, d);
            if (k.requires_grad())
              dense_gemm(true, false, ng, dh, ng, scale, ds.data(), ng, qsub, d, 1.0,
                         k.node()->grad.data() + beg * d + h * dh, d);
          }
        }
      });

  auto& y = out.mutable_data();
  std::vector<double> pbuf;
  for (std::int64_t g = 0; g < num_segments; ++g) {
    const std::int64_t beg = starts[static_cast<std::size_t>(g)];
    const std::int64_t ng = starts[static_cast<std::size_t>(g) + 1] - beg;
    if (ng == 0) continue;
    for (std::int64_t h = 0; h < heads; ++h) {
      const auto slot = static_cast<std::size_t>(g * heads + h);
      pbuf.assign(static_cast<std::size_t>(ng * ng), 0.0);
      dense_gemm(false, true, ng, ng, dh, scale, q.data().data() + beg * d + h * dh, d,
                 k.data().data() + beg * d + h * dh, d, 0.0, pbuf.data(), ng);
      for (std::int64_t i = 0; i < ng; ++i) {
        double mx = pbuf[i * ng];
        for (std::int64_t j = 1; j < ng; ++j) mx = std::max(mx, pbuf[i * ng + j]);
        double sum = 0.0;
        for (std::int64_t j = 0; j < ng; ++j) {
          pbuf[i * ng + j] = std::exp(pbuf[i * ng + j] - mx);
          sum += pbuf[i * ng + j];
        }
        const double inv = 1.0 / sum;
        for (std::int64_t j = 0; j < ng; ++j) pbuf[i * ng + j] *= inv;
      }
      std::vector<double> ptilde;
      const std::vector<double>* peff = &pbuf;
      if (use_dropout) {
        auto& m = (*masks)[slot];
        m.resize(pbuf.size());
        ptilde.resize(pbuf.size());
        for (std::size_t i = 0; i < pbuf.size(); ++i) {
          m[i] = rng.uniform() < 1.0 - attn_dropout ? inv_keep : 0.0;
          ptilde[i] = pbuf[i] * m[i];
        }
        peff = &ptilde;
      }
      dense_gemm(false, false, ng, dh, ng, 1.0, peff->data(), ng,
                 v.data().data() + beg * d + h * dh, d, 0.0, y.data() + beg * d + h * dh, d);
      if (needs_grad) (*probs)[slot] = std::move(pbuf);
    }
  }
  return out;
}

Value performer_attention(const Value& q, const Value& k, const Value& v,
                          const std::vector<std::int64_t>& seg, std::int64_t num_segments,
                          std::int64_t heads, const std::vector<double>& features,
                          std::int64_t m_feat) {
  check_qkv(q, k, v, heads);
  if (m_feat < 1) throw std::invalid_argument("performer: m_feat must be >= 1");
  const std::int64_t n = q.rows(), d = q.cols(), dh = d / heads;
  if (static_cast<std::int64_t>(features.size()) != heads * m_feat * dh)
    throw std::invalid_argument("performer: feature buffer size mismatch");
  if (static_cast<std::int64_t>(seg.size()) != n)
    throw std::invalid_argument("performer: seg length must equal row count");
  const auto starts = segment_starts(seg, num_segments, n);
  // exp(q.k / sqrt(dh)) kernel: rescale both sides by dh^{-1/4}
  const double s = std::pow(static_cast<double>(dh), -0.25);
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m_feat));
  const bool needs_grad = q.requires_grad() || k.requires_grad() || v.requires_grad();

  struct Saved {
    std::vector<double> phi_q, phi_k;  // [ng x m]
    std::vector<double> big_m;         // [m x dh]
    std::vector<double> z;             // [m]
    std::vector<double> den;           // [ng]
  };
  auto saved = std::make_shared<std::vector<Saved>>();
  if (needs_grad) saved->resize(static_cast<std::size_t>(num_segments * heads));

  auto fill_phi = [&](const double* x, std::int64_t ng, const double* w, std::vector<double>& phi) {
    // phi[u,i] = exp(w_i . (s x_u) - |s x_u|^2/2 - c) / sqrt(m), c = max_{u,i} w_i . (s x_u)
    phi.assign(static_cast<std::size_t>(ng * m_feat), 0.0);
    dense_gemm(false, true, ng, m_feat, dh, s, x, d, w, dh, 0.0, phi.data(), m_feat);
    double c = -1e300;
    for (double val : phi) c = std::max(c, val);
    for (std::int64_t u = 0; u < ng; ++u) {
      double sq = 0.0;
      for (std::int64_t j = 0; j < dh; ++j) {
        const double xv = s * x[u * d + j];
        sq += xv * xv;
      }
      sq *= 0.5;
      for (std::int64_t i = 0; i < m_feat; ++i)
        phi[u * m_feat + i] = std::exp(phi[u * m_feat + i] - sq - c) * inv_sqrt_m;
    }
  };

  Value out = make_op(
      n, d, "performer_attention", {q, k, v},
      [q, k, v, starts, num_segments, heads, dh, d, m_feat, s, features, saved](detail::Node& nd) {
        std::vector<double> dnum, dden, dphi_q, dphi_k, dm, dz, rowsum;
        for (std::int64_t g = 0; g < num_segments; ++g) {
          const std::int64_t beg = starts[static_cast<std::size_t>(g)];
          const std::int64_t ng = starts[static_cast<std::size_t>(g) + 1] - beg;
          if (ng == 0) continue;
          for (std::int64_t h = 0; h < heads; ++h) {
            const Saved& sv = (*saved)[static_cast<std::size_t>(g * heads + h)];
            const double* w = features.data() + h * m_feat * dh;
            const double* dout = nd.grad.data() + beg * d + h * dh;
            const double* yout = nd.data.data() + beg * d + h * dh;

            dnum.assign(static_cast<std::size_t>(ng * dh), 0.0);
            dden.assign(static_cast<std::size_t>(ng), 0.0);
            for (std::int64_t u = 0; u < ng; ++u) {
              const double inv_den = 1.0 / sv.den[static_cast<std::size_t>(u)];
              double ydotg = 0.0;
              for (std::int64_t j = 0; j < dh; ++j) {
                dnum[u * dh + j] = dout[u * d + j] * inv_den;
                ydotg += yout[u * d + j] * dout[u * d + j];
              }
              dden[static_cast<std::size_t>(u)] = -ydotg * inv_den;
            }
            // dPhiQ = dnum * M^T + dden z^T
            dphi_q.assign(static_cast<std::size_t>(ng * m_feat), 0.0);
            dense_gemm(false, true, ng, m_feat, dh, 1.0, dnum.data(), dh, sv.big_m.data(), dh, 0.0,
                       dphi_q.data(), m_feat);
            for (std::int64_t u = 0; u < ng; ++u)
              for (std::int64_t i = 0; i < m_feat; ++i)
                dphi_q[u * m_feat + i] += dden[static_cast<std::size_t>(u)] * sv.z[i];
            // dM = PhiQ^T dnum ; dz = PhiQ^T dden
            dm.assign(static_cast<std::size_t>(m_feat * dh), 0.0);
            dense_gemm(true, false, m_feat, dh, ng, 1.0, sv.phi_q.data(), m_feat, dnum.data(), dh,
                       0.0, dm.data(), dh);
            dz.assign(static_cast<std::size_t>(m_feat), 0.0);
            for (std::int64_t u = 0; u < ng; ++u)
              for (std::int64_t i = 0; i < m_feat; ++i)
                dz[i] += sv.phi_q[u * m_feat + i] * dden[static_cast<std::size_t>(u)];
            // dPhiK = V dM^T + 1 dz^T ; dV += PhiK dM
            dphi_k.assign(static_cast<std::size_t>(ng * m_feat), 0.0);
            dense_gemm(false, true, ng, m_feat, dh, 1.0, v.data().data() + beg * d + h * dh, d,
                       dm.data(), dh, 0.0, dphi_k.data(), m_feat);
            for (std::int64_t u = 0; u < ng; ++u)
              for (std::int64_t i = 0; i < m_feat; ++i) dphi_k[u * m_feat + i] += dz[i];
            if (v.requires_grad())
              dense_gemm(false, false, ng, dh, m_feat, 1.0, sv.phi_k.data(), m_feat, dm.data(), dh,
                         1.0, v.node()->grad.data() + beg * d + h * dh, d);

            // through phi(x): dx = W^T (dphi*phi) - x * rowsum(dphi*phi), x = s*input
            auto pull_back = [&](const std::vector<double>& phi, std::vector<double>& dphi,
                                 const Value& src) {
              if (!src.requires_grad()) return;
              rowsum.assign(static_cast<std::size_t>(ng), 0.0);
              for (std::int64_t u = 0; u < ng; ++u) {
                for (std::int64_t i = 0; i < m_feat; ++i) {
                  dphi[u * m_feat + i] *= phi[u * m_feat + i];
                  rowsum[static_cast<std::size_t>(u)] += dphi[u * m_feat + i];
                }
              }
              double* gx = src.node()->grad.data() + beg * d + h * dh;
              dense_gemm(false, false, ng, dh, m_feat, s, dphi.data(), m_feat, w, dh, 1.0, gx, d);
              const double* xin = src.data().data() + beg * d + h * dh;
              for (std::int64_t u = 0; u < ng; ++u)
                for (std::int64_t j = 0; j < dh; ++j)
                  gx[u * d + j] -= s * s * rowsum[static_cast<std::size_t>(u)] * xin[u * d + j];
            };
            pull_back(sv.phi_q, dphi_q, q);
            pull_back(sv.phi_k, dphi_k, k);
          }
        }
      });

  auto& y = out.mutable_data();
  std::vector<double> phi_q, phi_k, big_m, z;
  for (std::int64_t g = 0; g < num_segments; ++g) {
    const std::int64_t beg = starts[static_cast<std::size_t>(g)];
    const std::int64_t ng = starts[static_cast<std::size_t>(g) + 1] - beg;
    if (ng == 0) continue;
    for (std::int64_t h = 0; h < heads; ++h) {
      const double* w = features.data() + h * m_feat * dh;
      fill_phi(q.data().data() + beg * d + h * dh, ng, w, phi_q);
      fill_phi(k.data().data() + beg * d + h * dh, ng, w, phi_k);
      big_m.assign(static_cast<std::size_t>(m_feat * dh), 0.0);
      dense_gemm(true, false, m_feat, dh, ng, 1.0, phi_k.data(), m_feat,
                 v.data().data() + beg * d + h * dh, d, 0.0, big_m.data(), dh);
      z.assign(static_cast<std::size_t>(m_feat), 0.0);
      for (std::int64_t u = 0; u < ng; ++u)
        for (std::int64_t i = 0; i < m_feat; ++i) z[i] += phi_k[u * m_feat + i];
      std::vector<double> den(static_cast<std::size_t>(ng), 0.0);
      dense_gemm(false, false, ng, dh, m_feat, 1.0, phi_q.data(), m_feat, big_m.data(), dh, 0.0,
                 y.data() + beg * d + h * dh, d);
      for (std::int64_t u = 0; u < ng; ++u) {
        double dn = 0.0;
        for (std::int64_t i = 0; i < m_feat; ++i) dn += phi_q[u * m_feat + i] * z[i];
        if (!(dn > 1e-30))
          throw std::runtime_error(
              "performer_attention: denominator underflow; increase m_feat");
        den[static_cast<std::size_t>(u)] = dn;
        const double inv = 1.0 / dn;
        for (std::int64_t j = 0; j < dh; ++j) y[(beg + u) * d + h * dh + j] *= inv;
      }
      if (needs_grad) {
        Saved& sv = (*saved)[static_cast<std::size_t>(g * heads + h)];
        sv.phi_q = phi_q;
        sv.phi_k = phi_k;
        sv.big_m = std::move(big_m);
        sv.z = std::move(z);
        sv.den = std::move(den);
      }
    }
  }
  return out;
}

}  // namespace gps
