#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bdgd::ndgrad {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward;

  std::vector<float>& grad_buffer();
};

}  // namespace detail

/// Dense float32 n-d array; a cheap handle to a node in the autodiff graph.
///
/// Copies share storage. A tensor created with requires_grad is a parameter:
/// backward() accumulates into its grad. Results of ops on parameters carry a
/// backward closure and keep their inputs alive until the graph is dropped.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::int64_t dim(std::size_t axis) const { return shape().at(axis); }
  std::int64_t numel() const;
  std::size_t rank() const { return shape().size(); }

  std::span<const float> data() const;
  std::span<float> mutable_data();
  float item() const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const float> grad() const;
  std::span<float> mutable_grad();
  void zero_grad();

  /// Same values, detached from the graph, with fresh storage.
  Tensor detach() const;

  /// Reverse-mode sweep from this scalar. Parameter grads accumulate (+=).
  void backward() const;

  const char* op_name() const;
  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  static Tensor wrap(std::shared_ptr<detail::Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Nodes reachable from a root that take part in differentiation, in
/// topological order (inputs before consumers). Each node appears once.
class Tape {
 public:
  static Tape record(const Tensor& root);

  std::size_t size() const { return order_.size(); }
  const std::vector<detail::Node*>& nodes() const { return order_; }

  /// Visits nodes consumers-first and runs each backward closure once.
  void replay_backward() const;

 private:
  std::vector<detail::Node*> order_;
};

}  // namespace bdgd::ndgrad
