// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major double tensors with reverse-mode differentiation.
//
// A Tensor is a cheap shared handle. Values are treated as immutable once a
// tensor has been consumed by an operation; ops always return new tensors.
// Parameters (leaves with requires_grad) are the only tensors updated in
// place, and only between forward passes.
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace evflow {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl;

/// One recorded operation. `backward` receives the gradient of the node's
/// output and accumulates into the gradients of `inputs`.
struct GraphNode {
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(std::span<const double> grad_out)> backward;
  bool released = false;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient arrives
  bool requires_grad = false;
  std::shared_ptr<GraphNode> node;  // null for leaves

  std::vector<double>& ensure_grad();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor scalar(double v) { return Tensor(Shape{1}, v); }
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const;
  std::size_t dim(std::size_t i) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Write access for filling inputs and for optimizer updates on leaves.
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }

  double at(std::size_t i, std::size_t j) const;
  double at(std::size_t c, std::size_t y, std::size_t x) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);
  bool is_leaf() const;

  /// Gradient accumulated by backward(); empty span when none arrived.
  std::span<const double> grad() const;
  void zero_grad();

  /// Seeds d(this)/d(this) = 1 and propagates to every reachable leaf.
  /// Throws StaleGraphError when the graph was already consumed.
  void backward() const;

  Tensor detach() const;
  Tensor clone() const;

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& impl_ptr() const { return impl_; }

  /// Builds an op result. When any input requires grad and grad mode is
  /// enabled, the result records `backward` against those inputs.
  static Tensor make_result(Shape shape, std::vector<double> values,
                            std::vector<Tensor> inputs,
                            std::function<void(std::span<const double>)> backward);

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

/// Accumulates into an input's gradient buffer; used by op backward closures.
std::span<double> grad_buffer(const Tensor& t);
bool needs_grad(const Tensor& t);

bool grad_enabled();

/// Disables graph recording for its lifetime (inference paths).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace evflow
