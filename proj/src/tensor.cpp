// SPDX-License-Identifier: Apache-2.0
#include "evflow/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "evflow/error.hpp"

namespace evflow {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::vector<double>& TensorImpl::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor::Tensor(Shape shape, double fill) : impl_(std::make_shared<TensorImpl>()) {
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : impl_(std::make_shared<TensorImpl>()) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor of shape " + shape_str(shape) + " cannot hold " +
                         std::to_string(values.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> v;
  v.reserve(m * n);
  for (const auto& r : rows) {
    if (r.size() != n) throw DimensionError("ragged rows");
    v.insert(v.end(), r.begin(), r.end());
  }
  return Tensor(Shape{m, n}, std::move(v));
}

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t i) const {
  if (i >= impl_->shape.size()) throw DimensionError("dimension index out of range");
  return impl_->shape[i];
}

std::size_t Tensor::numel() const { return impl_->data.size(); }
std::span<const double> Tensor::data() const { return impl_->data; }
std::span<double> Tensor::mutable_data() { return impl_->data; }

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  return impl_->data[i * impl_->shape[1] + j];
}

double Tensor::at(std::size_t c, std::size_t y, std::size_t x) const {
  const auto& s = impl_->shape;
  return impl_->data[(c * s[1] + y) * s[2] + x];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  return *this;
}

bool Tensor::is_leaf() const { return !impl_->node; }

std::span<const double> Tensor::grad() const { return impl_->grad; }

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

Tensor Tensor::clone() const { return detach(); }

std::span<double> grad_buffer(const Tensor& t) { return t.impl()->ensure_grad(); }

bool needs_grad(const Tensor& t) { return t.defined() && t.impl()->requires_grad; }

Tensor Tensor::make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                           std::function<void(std::span<const double>)> backward) {
  Tensor out(std::move(shape), std::move(values));
  if (!g_grad_enabled) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return needs_grad(t); });
  if (!any) return out;
  auto node = std::make_shared<GraphNode>();
  node->inputs.reserve(inputs.size());
  for (auto& t : inputs) node->inputs.push_back(t.impl_);
  node->backward = std::move(backward);
  out.impl_->node = std::move(node);
  out.impl_->requires_grad = true;
  return out;
}

void Tensor::backward() const {
  if (numel() != 1) throw DimensionError("backward() requires a scalar loss");
  if (!impl_->requires_grad) throw ArgumentError("loss does not depend on any grad-tracked tensor");
  if (impl_->node && impl_->node->released) {
    throw StaleGraphError("backward() through a graph that was already consumed; re-run forward");
  }

  // Iterative post-order DFS gives a topological order of the non-leaf nodes.
  // Owning pointers: releasing a node's inputs must not free tensors that
  // are still queued.
  std::vector<std::shared_ptr<TensorImpl>> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<std::shared_ptr<TensorImpl>, std::size_t>> stack;
  stack.emplace_back(impl_, 0);
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [cur, next] = stack.back();
    if (cur->node && next < cur->node->inputs.size()) {
      std::shared_ptr<TensorImpl> child = cur->node->inputs[next++];
      if (child->requires_grad && visited.insert(child.get()).second) stack.emplace_back(std::move(child), 0);
      continue;
    }
    order.push_back(std::move(cur));
    stack.pop_back();
  }

  impl_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* t = it->get();
    if (!t->node) continue;
    if (t->node->released) throw StaleGraphError("graph node reused after release");
    if (!t->grad.empty()) t->node->backward(t->grad);
    // Release intermediate state: saved inputs, closure captures, grad buffer.
    t->node->backward = nullptr;
    t->node->inputs.clear();
    t->node->released = true;
    t->grad.clear();
    t->grad.shrink_to_fit();
  }
}

}  // namespace evflow
