#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "gpsgraph/rng.hpp"
#include "gpsgraph/tensor.hpp"

namespace gps {

// Named learnable tensors plus optimizer moments and non-learnable runtime
// state (batch-norm running statistics, attention feature draws). Names are
// unique; iteration follows declaration order.
class ParamStore {
 public:
  Value create(const std::string& name, std::int64_t rows, std::int64_t cols,
               std::vector<double> init);
  Value create_zeros(const std::string& name, std::int64_t rows, std::int64_t cols);
  Value create_glorot(const std::string& name, std::int64_t rows, std::int64_t cols,
                      RngStream rng);
  Value create_normal(const std::string& name, std::int64_t rows, std::int64_t cols,
                      RngStream rng, double stddev);

  bool has(const std::string& name) const { return params_.count(name) > 0; }
  Value get(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }

  // Runtime buffer, created on first access with the given fill value.
  std::vector<double>& state(const std::string& name, std::int64_t size, double fill);
  bool has_state(const std::string& name) const { return state_.count(name) > 0; }
  const std::vector<std::string>& state_names() const { return state_order_; }

  // Optimizer moment buffers, zero on first access.
  std::vector<double>& moment1(const std::string& name);
  std::vector<double>& moment2(const std::string& name);
  std::int64_t adam_step = 0;

  std::int64_t param_count() const;
  void zero_grads();

  void save(const std::string& path, const std::string& manifest_json) const;
  // Returns the stored manifest; parameter/state buffers must already exist
  // with matching shapes.
  std::string load(const std::string& path);

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Value> params_;
  std::vector<std::string> state_order_;
  std::unordered_map<std::string, std::vector<double>> state_;
  std::unordered_map<std::string, std::vector<double>> m1_, m2_;
};

}  // namespace gps
