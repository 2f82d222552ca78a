#include "gpsgraph/tensor.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace gps {

namespace {
// Tape buffers are a few hundred KB and churn fast; keep them on the heap
// free lists instead of round-tripping through mmap.
struct MallocTuning {
  MallocTuning() {
#ifdef __GLIBC__
    mallopt(M_MMAP_THRESHOLD, 64 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 128 * 1024 * 1024);
#endif
  }
};
const MallocTuning malloc_tuning;
}  // namespace

Value make_op(std::int64_t rows, std::int64_t cols, std::string op, std::vector<Value> parents,
              std::function<void(detail::Node&)> backward) {
  auto n = std::make_shared<detail::Node>();
  n->rows = rows;
  n->cols = cols;
  n->data.assign(static_cast<std::size_t>(rows * cols), 0.0);
  n->op = std::move(op);
  n->parents.reserve(parents.size());
  for (const Value& p : parents) {
    n->parents.push_back(p.node());
    if (p.requires_grad()) n->requires_grad = true;
  }
  if (n->requires_grad) n->backward = std::move(backward);
  struct Access : Value {
    explicit Access(std::shared_ptr<detail::Node> n) : Value(std::move(n)) {}
  };
  return Access(std::move(n));
}

Value Value::zeros(std::int64_t rows, std::int64_t cols, bool requires_grad) {
  return from_data(rows, cols, std::vector<double>(static_cast<std::size_t>(rows * cols), 0.0),
                   requires_grad);
}

Value Value::from_data(std::int64_t rows, std::int64_t cols, std::vector<double> data,
                       bool requires_grad) {
  if (static_cast<std::int64_t>(data.size()) != rows * cols)
    throw std::invalid_argument("Value::from_data: data length does not match shape");
  auto n = std::make_shared<detail::Node>();
  n->rows = rows;
  n->cols = cols;
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return Value(std::move(n));
}

Value Value::scalar(double v, bool requires_grad) {
  return from_data(1, 1, {v}, requires_grad);
}

namespace {

// Iterative post-order DFS; recursion would overflow on deep tapes.
void topo_sort(detail::Node* root, std::vector<detail::Node*>& order) {
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      detail::Node* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace

void backward(const Value& loss) {
  if (loss.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
  detail::Node* root = loss.node().get();
  if (!root->requires_grad) return;
  std::vector<detail::Node*> order;
  topo_sort(root, order);
  // op-node grads are per-sweep scratch; only leaf grads accumulate across calls
  for (detail::Node* n : order)
    if (!n->parents.empty()) {
      if (n->grad.empty())
        n->ensure_grad();  // fresh allocation is already zero
      else
        std::fill(n->grad.begin(), n->grad.end(), 0.0);
    }
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward) {
      for (auto& p : n->parents)
        if (p->requires_grad) p->ensure_grad();
      n->backward(*n);
    }
  }
}

void dump_graph(const Value& root, std::ostream& os) {
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<detail::Node*> stack{root.node().get()};
  visited.insert(root.node().get());
  while (!stack.empty()) {
    detail::Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto& p : n->parents)
      if (!visited.count(p.get())) {
        visited.insert(p.get());
        stack.push_back(p.get());
      }
  }
  std::unordered_map<detail::Node*, std::size_t> id;
  for (std::size_t i = 0; i < order.size(); ++i) id[order[i]] = i;
  for (detail::Node* n : order) {
    os << id[n] << " " << (n->op.empty() ? "leaf" : n->op) << " [" << n->rows << "x" << n->cols
       << "]";
    for (auto& p : n->parents) os << " <- " << id[p.get()];
    os << "\n";
  }
}

}  // namespace gps
