#include "tagclip/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace tagclip {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::vector<double>& detail::Node::grad_buffer() {
  if (grad.empty()) grad.assign(values.size(), 0.0);
  return grad;
}

Tensor::Tensor() : node_(std::make_shared<detail::Node>()) {
  node_->values.assign(1, 0.0);
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  auto n = std::make_shared<detail::Node>();
  n->values.assign(shape_numel(shape), value);
  n->shape = std::move(shape);
  return Tensor(std::move(n));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor shape " + shape_str(shape) + " holds " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> v;
  v.reserve(m * n);
  for (const auto& r : rows) {
    if (r.size() != n) throw ShapeError("ragged matrix literal");
    v.insert(v.end(), r.begin(), r.end());
  }
  return from({m, n}, std::move(v));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return from({values.size()}, std::vector<double>(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_str(shape()));
  }
  return node_->shape[axis];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  if (rank() != 2) throw ShapeError("at(r, c) needs a matrix, got " + shape_str(shape()));
  return node_->values[r * node_->shape[1] + c];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor " + shape_str(shape()));
  return node_->values[0];
}

std::span<double> Tensor::mutable_values() {
  if (!node_->is_leaf()) throw std::logic_error("mutable_values() on a non-leaf tensor");
  return node_->values;
}

Tensor& Tensor::set_requires_grad(bool on) {
  if (!node_->is_leaf()) throw std::logic_error("set_requires_grad() on a non-leaf tensor");
  node_->requires_grad = on;
  return *this;
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(numel(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const { return from(shape(), node_->values); }

Tensor Tensor::make_result(Shape shape, std::vector<double> values,
                           std::vector<Tensor> parents,
                           std::function<void(detail::Node&)> backward_fn) {
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  if (g_grad_enabled) {
    bool any = std::any_of(parents.begin(), parents.end(),
                           [](const Tensor& p) { return p.requires_grad(); });
    if (any) {
      n->requires_grad = true;
      n->parents.reserve(parents.size());
      for (auto& p : parents) n->parents.push_back(p.node_);
      n->backward_fn = std::move(backward_fn);
    }
  }
  return Tensor(std::move(n));
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward() needs a single-element loss, got " + shape_str(loss.shape()));
  }
  detail::Node* root = &loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a deterministic topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* p = node->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->values.size(), 0.0);
  }
  root->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (!(*it)->is_leaf()) (*it)->backward_fn(**it);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

}  // namespace tagclip
