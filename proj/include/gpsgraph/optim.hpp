#pragma once

#include <cstdint>

#include "gpsgraph/param_store.hpp"

namespace gps {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// One AdamW step over every parameter: decoupled decay theta -= lr*wd*theta,
// then the bias-corrected Adam update. Moments persist in the store. Throws
// on a non-finite gradient, naming the parameter.
void adamw_step(ParamStore& params, const AdamWConfig& cfg);

// Linear warm-up to base_lr over warmup_steps, then cosine decay to zero at
// total_steps.
double warmup_cosine_lr(std::int64_t step, double base_lr, std::int64_t warmup_steps,
                        std::int64_t total_steps);

}  // namespace gps
