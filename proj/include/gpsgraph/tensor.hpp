#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gps {

class Value;

namespace detail {

struct Node {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<double> data;
  std::vector<double> grad;  // allocated on first use, same length as data
  bool requires_grad = false;
  std::string op;  // empty for leaves
  std::vector<std::shared_ptr<Node>> parents;
  // Accumulates parent gradients from this node's grad. Null for leaves.
  std::function<void(Node&)> backward;

  std::int64_t size() const { return rows * cols; }

  void ensure_grad() {
    if (grad.empty()) grad.assign(static_cast<std::size_t>(size()), 0.0);
  }
};

}  // namespace detail

// Dense float64 tensor participating in a reverse-mode autodiff tape.
// Copying a Value copies the handle, not the buffer.
class Value {
 public:
  Value() = default;

  static Value zeros(std::int64_t rows, std::int64_t cols, bool requires_grad = false);
  static Value from_data(std::int64_t rows, std::int64_t cols, std::vector<double> data,
                         bool requires_grad = false);
  static Value scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  std::int64_t rows() const { return node_->rows; }
  std::int64_t cols() const { return node_->cols; }
  std::int64_t size() const { return node_->size(); }
  bool requires_grad() const { return node_->requires_grad; }

  const std::vector<double>& data() const { return node_->data; }
  std::vector<double>& mutable_data() { return node_->data; }

  // Gradient buffer; zeros until backward() has run through this node.
  const std::vector<double>& grad() const {
    node_->ensure_grad();
    return node_->grad;
  }
  std::vector<double>& mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }

  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }

  double item() const {
    if (size() != 1) throw std::invalid_argument("Value::item: tensor is not scalar");
    return node_->data[0];
  }

  double at(std::int64_t r, std::int64_t c) const {
    return node_->data[static_cast<std::size_t>(r * cols() + c)];
  }

  std::shared_ptr<detail::Node> node() const { return node_; }

  friend Value make_op(std::int64_t rows, std::int64_t cols, std::string op,
                       std::vector<Value> parents, std::function<void(detail::Node&)> backward);

 private:
  explicit Value(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;
};

// Creates an op node; requires_grad is inherited from any parent.
Value make_op(std::int64_t rows, std::int64_t cols, std::string op, std::vector<Value> parents,
              std::function<void(detail::Node&)> backward);

// Reverse sweep from a scalar loss. Visits each reachable node exactly once
// in reverse topological order; repeated calls accumulate into grads.
void backward(const Value& loss);

// Writes the reachable op graph as a text edge list (child <- parent).
void dump_graph(const Value& root, std::ostream& os);

}  // namespace gps
