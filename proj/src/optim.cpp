#include "gpsgraph/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace gps {

void adamw_step(ParamStore& params, const AdamWConfig& cfg) {
  params.adam_step += 1;
  const auto t = static_cast<double>(params.adam_step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (const auto& name : params.names()) {
    Value p = params.get(name);
    const auto& g = p.grad();
    auto& m = params.moment1(name);
    auto& v = params.moment2(name);
    auto& theta = p.mutable_data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw std::runtime_error("adamw_step: non-finite gradient in " + name);
      if (cfg.weight_decay != 0.0) theta[i] -= cfg.lr * cfg.weight_decay * theta[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      theta[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

double warmup_cosine_lr(std::int64_t step, double base_lr, std::int64_t warmup_steps,
                        std::int64_t total_steps) {
  if (warmup_steps >= total_steps)
    throw std::invalid_argument("warmup_cosine_lr: warmup must be shorter than total");
  if (step < 0 || step > total_steps)
    throw std::invalid_argument("warmup_cosine_lr: step out of range");
  if (step < warmup_steps)
    return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  const double progress = static_cast<double>(step - warmup_steps) /
                          static_cast<double>(total_steps - warmup_steps);
  return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

}  // namespace gps
