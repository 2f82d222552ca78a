#pragma once

#include <functional>
#include <vector>

#include "gpsgraph/tensor.hpp"

namespace gps {

// Central-difference gradient verification. f must be deterministic and
// return a scalar loss built from the given leaves. For tensors larger than
// max_coords_per_tensor, a deterministic sample of coordinates is checked
// (at least 64). Coordinates near a relu/abs kink are skipped by the caller's
// choice of inputs, not here. Returns the worst relative error.
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::int64_t worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

GradCheckReport grad_check(const std::function<Value()>& f,
                           const std::vector<std::pair<std::string, Value>>& leaves,
                           std::int64_t max_coords_per_tensor = 64);

}  // namespace gps
