#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tagclip {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into parents' grads.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }
  std::vector<double>& grad_buffer();
};

}  // namespace detail

/// Dense row-major double tensor with reverse-mode gradient recording.
///
/// A Tensor is a cheap handle; copies share storage. Values are fixed at
/// creation. Only leaf tensors expose mutable values (for optimizer updates)
/// and only gradient buffers change during backward().
class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->values.size(); }
  bool defined() const { return node_ != nullptr; }

  std::span<const double> values() const { return node_->values; }
  double operator[](std::size_t i) const { return node_->values[i]; }
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  /// Leaf-only mutable access, used by optimizers and initializers.
  std::span<double> mutable_values();

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient accumulator; zeros if nothing has been accumulated yet.
  std::vector<double> grad() const;
  void zero_grad();

  /// New leaf with a copy of the values and no history.
  Tensor detach() const;
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  detail::Node& node() const { return *node_; }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  static Tensor make_result(Shape shape, std::vector<double> values,
                            std::vector<Tensor> parents,
                            std::function<void(detail::Node&)> backward_fn);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Runs reverse-mode differentiation from a single-element loss.
/// Leaf gradients accumulate across calls; intermediate gradients are reset.
void backward(const Tensor& loss);

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace tagclip
