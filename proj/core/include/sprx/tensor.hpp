#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sprx/config.hpp"

namespace sprx {
inline namespace SPRX_PRECISION_NS {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Raised when operand shapes are incompatible; the message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for non-finite inputs or outputs where a finite value is required.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
struct TensorImpl;
struct Node;
}  // namespace detail

/// Dense row-major tensor with optional reverse-mode gradient tracking.
///
/// Tensor is a shared handle: copies alias the same storage. Results of
/// recorded operations are immutable; only leaves may be written through
/// mutable_data() (the optimizer does this between steps).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, real fill = real(0), bool requires_grad = false);
  Tensor(Shape shape, std::vector<real> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor ones(Shape shape, bool requires_grad = false);
  static Tensor scalar(real value, bool requires_grad = false);
  static Tensor from(Shape shape, std::initializer_list<real> values, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const real> data() const;
  std::span<real> mutable_data();
  real item() const;
  real operator[](std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const real> grad() const;
  std::span<real> mutable_grad();
  void zero_grad();

  /// Copy of the data with no history.
  Tensor detach() const;

  const detail::TensorImpl* id() const { return impl_.get(); }

 private:
  friend struct detail::Node;
  friend class GradTape;
  friend Tensor make_op_result(Shape, std::vector<real>, std::vector<Tensor>,
                               std::function<void(std::span<const real>, std::span<const real>)>);
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Backward rule: receives the gradient w.r.t. the op output and the output
/// values, and accumulates into the inputs it captured.
using BackwardFn = std::function<void(std::span<const real> grad_out, std::span<const real> out)>;

/// Builds an op result. A backward node is recorded only when gradient mode is
/// on and at least one input requires a gradient.
Tensor make_op_result(Shape shape, std::vector<real> data, std::vector<Tensor> inputs,
                      BackwardFn backward);

/// Gradient buffer of `t` for accumulation, or an empty span when `t` does not
/// take part in differentiation.
std::span<real> grad_sink(const Tensor& t);

/// Reverse-ordered record of the operations reachable from a root tensor.
/// Replaying visits each recorded operation exactly once.
class GradTape {
 public:
  static GradTape record(const Tensor& root);
  std::size_t size() const { return nodes_.size(); }
  /// Seeds d(root)/d(root) = 1 and propagates. Leaf gradients accumulate.
  void replay(const Tensor& root) const;

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
};

/// Back-propagates from a scalar loss. Calling it twice without zeroing
/// accumulates leaf gradients.
void backward(const Tensor& loss);

bool grad_enabled();

/// Disables graph recording in the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
