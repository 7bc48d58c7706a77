#pragma once

// Internal helpers shared by the op implementations.

#include <cmath>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "hsissl/error.hpp"
#include "hsissl/tensor.hpp"

namespace hsissl::detail {

template <typename T>
void require_finite(const std::vector<T>& values, const char* op) {
  for (const T v : values) {
    if (!std::isfinite(v)) {
      throw NumericalError(std::string("non-finite value produced by ") + op);
    }
  }
}

// Wraps a forward result into a tensor. The backward closure is attached
// only when recording is on and some input needs a gradient.
template <typename T>
BasicTensor<T> make_result(const char* op, Shape shape, std::vector<T> values,
                           std::initializer_list<const BasicTensor<T>*> inputs,
                           std::function<void(Node<T>&)> backward_fn) {
  require_finite(values, op);
  BasicTensor<T> out(std::move(shape), std::move(values));
  if (!grad_enabled()) return out;
  auto& node = *out.node();
  for (const auto* input : inputs) {
    if (input->requires_grad()) node.parents.push_back(input->node());
  }
  if (!node.parents.empty()) {
    node.requires_grad = true;
    node.backward_fn = std::move(backward_fn);
  }
  return out;
}

// Gradient buffer of an input, or nullptr when it does not need one.
template <typename T>
std::vector<T>* grad_of(const std::shared_ptr<Node<T>>& node) {
  return node->requires_grad ? &node->grad_buffer() : nullptr;
}

}  // namespace hsissl::detail
