#include "gpsgraph/grad_check.hpp"

#include <cmath>
#include <stdexcept>

#include "gpsgraph/rng.hpp"

namespace gps {

GradCheckReport grad_check(const std::function<Value()>& f,
                           const std::vector<std::pair<std::string, Value>>& leaves,
                           std::int64_t max_coords_per_tensor) {
  if (max_coords_per_tensor < 64) max_coords_per_tensor = 64;

  // analytic pass
  for (const auto& [name, v] : leaves) {
    Value leaf = v;
    leaf.zero_grad();
  }
  Value loss = f();
  if (!std::isfinite(loss.item())) throw std::runtime_error("grad_check: non-finite loss");
  backward(loss);

  GradCheckReport report;
  RngStream pick(0x67726164u);  // coordinate subsampling
  for (const auto& [name, vconst] : leaves) {
    Value v = vconst;
    const std::vector<double> analytic = v.grad();
    const auto size = static_cast<std::int64_t>(analytic.size());
    std::vector<std::int64_t> coords;
    if (size <= max_coords_per_tensor) {
      coords.resize(static_cast<std::size_t>(size));
      for (std::int64_t i = 0; i < size; ++i) coords[static_cast<std::size_t>(i)] = i;
    } else {
      RngStream local = pick.split(name);
      for (std::int64_t i = 0; i < max_coords_per_tensor; ++i)
        coords.push_back(static_cast<std::int64_t>(local.below(static_cast<std::uint64_t>(size))));
    }
    for (std::int64_t idx : coords) {
      auto& buf = v.mutable_data();
      const double orig = buf[static_cast<std::size_t>(idx)];
      const double h = 1e-6 * std::max(1.0, std::fabs(orig));
      buf[static_cast<std::size_t>(idx)] = orig + h;
      const double fp = f().item();
      buf[static_cast<std::size_t>(idx)] = orig - h;
      const double fm = f().item();
      buf[static_cast<std::size_t>(idx)] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw std::runtime_error("grad_check: non-finite perturbed loss");
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[static_cast<std::size_t>(idx)];
      const double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1.0});
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = name;
        report.worst_index = idx;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace gps
