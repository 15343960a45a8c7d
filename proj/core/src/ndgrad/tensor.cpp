#include "bdgd/ndgrad/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "bdgd/errors.hpp"

namespace bdgd::ndgrad {

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

std::vector<float>& detail::Node::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0f);
  return grad;
}

namespace {

std::shared_ptr<detail::Node> make_node(Shape shape, std::vector<float> values, bool requires_grad) {
  for (auto d : shape)
    if (d < 0) throw ShapeError("tensor: negative extent in " + to_string(shape));
  if (static_cast<std::int64_t>(values.size()) != numel(shape))
    throw ShapeError("tensor: " + std::to_string(values.size()) + " values for shape " +
                     to_string(shape));
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

detail::Node& checked(const std::shared_ptr<detail::Node>& node) {
  if (!node) throw std::logic_error("tensor: use of undefined tensor");
  return *node;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  const auto n = ndgrad::numel(shape);
  return wrap(make_node(std::move(shape), std::vector<float>(static_cast<std::size_t>(n), value),
                        requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
  return wrap(make_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return wrap(make_node({1}, {value}, requires_grad));
}

const Shape& Tensor::shape() const { return checked(node_).shape; }
std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(checked(node_).data.size()); }
std::span<const float> Tensor::data() const { return checked(node_).data; }
std::span<float> Tensor::mutable_data() { return checked(node_).data; }

float Tensor::item() const {
  const auto& n = checked(node_);
  if (n.data.size() != 1) throw ShapeError("item: tensor of shape " + to_string(n.shape) + " is not a scalar");
  return n.data[0];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }
bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }
std::span<const float> Tensor::grad() const { return checked(node_).grad; }
std::span<float> Tensor::mutable_grad() { return checked(node_).grad_buffer(); }
void Tensor::zero_grad() { checked(node_).grad.clear(); }
const char* Tensor::op_name() const { return checked(node_).op; }

Tensor Tensor::detach() const {
  const auto& n = checked(node_);
  return wrap(make_node(n.shape, n.data, false));
}

Tape Tape::record(const Tensor& root) {
  Tape tape;
  if (!root.defined() || !root.requires_grad()) return tape;
  // Iterative post-order DFS; a node is emitted after all of its inputs.
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      tape.order_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

void Tape::replay_backward() const {
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

void Tensor::backward() const {
  auto& root = checked(node_);
  if (root.data.size() != 1)
    throw ShapeError("backward: loss must be a scalar, got shape " + to_string(root.shape));
  if (!root.requires_grad) throw std::logic_error("backward: loss does not depend on any parameter");
  const Tape tape = Tape::record(*this);
  root.grad_buffer()[0] += 1.0f;
  tape.replay_backward();
  // Interior gradients are scratch space; only leaves keep theirs.
  for (detail::Node* node : tape.nodes())
    if (node->backward) node->grad.clear();
}

}  // namespace bdgd::ndgrad
