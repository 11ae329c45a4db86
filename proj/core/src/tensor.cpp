#include "sprx/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

namespace sprx {
inline namespace SPRX_PRECISION_NS {

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<real> data;
  std::vector<real> grad;
  bool requires_grad = false;
  std::shared_ptr<Node> grad_fn;
};

struct Node {
  std::uint64_t seq = 0;
  std::vector<Tensor> inputs;
  BackwardFn backward;
  std::weak_ptr<TensorImpl> output;
};

namespace {
std::atomic<std::uint64_t> next_seq{1};
thread_local bool grad_mode = true;
}  // namespace

}  // namespace detail

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, real fill, bool requires_grad) : impl_(std::make_shared<detail::TensorImpl>()) {
  impl_->data.assign(sprx::numel(shape), fill);
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<real> data, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  if (data.size() != sprx::numel(shape)) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                     to_string(shape));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return Tensor(std::move(shape), real(0), requires_grad); }
Tensor Tensor::ones(Shape shape, bool requires_grad) { return Tensor(std::move(shape), real(1), requires_grad); }
Tensor Tensor::scalar(real value, bool requires_grad) { return Tensor(Shape{1}, value, requires_grad); }

Tensor Tensor::from(Shape shape, std::initializer_list<real> values, bool requires_grad) {
  return Tensor(std::move(shape), std::vector<real>(values), requires_grad);
}

const Shape& Tensor::shape() const {
  static const Shape empty;
  return impl_ ? impl_->shape : empty;
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= dim()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(shape()));
  return shape()[axis];
}

std::size_t Tensor::numel() const { return impl_ ? impl_->data.size() : 0; }

std::span<const real> Tensor::data() const {
  if (!impl_) return {};
  return impl_->data;
}

std::span<real> Tensor::mutable_data() {
  if (!impl_) return {};
  if (impl_->grad_fn) throw std::logic_error("mutable_data() on a recorded op result");
  return impl_->data;
}

real Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  if (impl_) impl_->requires_grad = flag;
  return *this;
}

bool Tensor::is_leaf() const { return !impl_ || !impl_->grad_fn; }

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const real> Tensor::grad() const {
  if (!impl_) return {};
  return impl_->grad;
}

std::span<real> Tensor::mutable_grad() {
  if (!impl_) return {};
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), real(0));
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_ && !impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), real(0));
}

Tensor Tensor::detach() const {
  if (!impl_) return {};
  return Tensor(impl_->shape, impl_->data, false);
}

Tensor make_op_result(Shape shape, std::vector<real> data, std::vector<Tensor> inputs, BackwardFn backward) {
  Tensor out(std::move(shape), std::move(data), false);
  if (!detail::grad_mode) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  auto node = std::make_shared<detail::Node>();
  node->seq = detail::next_seq.fetch_add(1, std::memory_order_relaxed);
  node->inputs = std::move(inputs);
  node->backward = std::move(backward);
  node->output = out.impl_;
  out.impl_->grad_fn = std::move(node);
  out.impl_->requires_grad = true;
  return out;
}

std::span<real> grad_sink(const Tensor& t) {
  if (!t.requires_grad()) return {};
  // Const access to the handle; the gradient buffer is bookkeeping, not data.
  return const_cast<Tensor&>(t).mutable_grad();
}

GradTape GradTape::record(const Tensor& root) {
  GradTape tape;
  if (!root.defined() || !root.impl_->grad_fn) return tape;
  std::unordered_set<const detail::Node*> seen;
  std::vector<std::shared_ptr<detail::Node>> stack{root.impl_->grad_fn};
  seen.insert(root.impl_->grad_fn.get());
  while (!stack.empty()) {
    auto node = std::move(stack.back());
    stack.pop_back();
    for (const auto& in : node->inputs) {
      if (!in.impl_ || !in.impl_->grad_fn) continue;
      if (seen.insert(in.impl_->grad_fn.get()).second) stack.push_back(in.impl_->grad_fn);
    }
    tape.nodes_.push_back(std::move(node));
  }
  // Inputs are always recorded before the ops that consume them, so descending
  // sequence numbers are a valid reverse topological order.
  std::sort(tape.nodes_.begin(), tape.nodes_.end(),
            [](const auto& a, const auto& b) { return a->seq > b->seq; });
  return tape;
}

void GradTape::replay(const Tensor& root) const {
  if (root.numel() != 1) throw ShapeError("backward() requires a scalar loss, got shape " + to_string(root.shape()));
  if (!root.requires_grad()) throw std::logic_error("backward() on a tensor that does not require grad");
  auto& seed = root.impl_->grad;
  if (seed.empty()) seed.assign(1, real(0));
  seed[0] += real(1);
  for (const auto& node : nodes_) {
    auto out = node->output.lock();
    if (!out || out->grad.empty()) continue;
    node->backward(out->grad, out->data);
    // Interior gradients are transient; leaves keep theirs.
    std::vector<real>().swap(out->grad);
  }
}

void backward(const Tensor& loss) { GradTape::record(loss).replay(loss); }

bool grad_enabled() { return detail::grad_mode; }

NoGradGuard::NoGradGuard() : previous_(detail::grad_mode) { detail::grad_mode = false; }
NoGradGuard::~NoGradGuard() { detail::grad_mode = previous_; }

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
