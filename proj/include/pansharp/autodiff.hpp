#pragma once

#include <array>
#include <string>
#include <vector>

#include "pansharp/errors.hpp"
#include "pansharp/ops.hpp"
#include "pansharp/tensor.hpp"

namespace pansharp {

enum class OpKind {
  kInput,
  kConv2d,
  kConvTranspose2d,
  kPRelu,
  kConcat,
  kAdd,
  kSum,
  kL1Loss,
  kL2Loss,
};

// Reverse-mode tape. Nodes are appended in execution order, so inputs always
// precede their consumers; backward() walks the tape in reverse and sums
// chain-rule contributions into per-node accumulators.
template <typename T>
class Graph {
 public:
  using NodeId = int;

  NodeId input(Tensor<T> value) {
    return push(OpKind::kInput, {}, std::move(value));
  }

  NodeId conv2d(NodeId x, NodeId w, NodeId bias, int stride, int padding) {
    Tensor<T> out =
        ops::conv2d(value(x), value(w), value(bias), stride, padding);
    NodeId id = push(OpKind::kConv2d, {x, w, bias}, std::move(out));
    nodes_[id].stride = stride;
    nodes_[id].padding = padding;
    return id;
  }

  NodeId conv2d_transpose(NodeId x, NodeId w, NodeId bias, int stride) {
    Tensor<T> out = ops::conv2d_transpose(value(x), value(w), value(bias), stride);
    NodeId id = push(OpKind::kConvTranspose2d, {x, w, bias}, std::move(out));
    nodes_[id].stride = stride;
    return id;
  }

  NodeId prelu(NodeId x, NodeId slopes) {
    return push(OpKind::kPRelu, {x, slopes},
                ops::prelu(value(x), value(slopes)));
  }

  NodeId concat_channels(NodeId a, NodeId b) {
    return push(OpKind::kConcat, {a, b},
                ops::concat_channels(value(a), value(b)));
  }

  NodeId add(NodeId a, NodeId b) {
    return push(OpKind::kAdd, {a, b},
                ops::add_elementwise(value(a), value(b)));
  }

  NodeId sum(NodeId x) {
    Tensor<T> out({1});
    out[0] = ops::sum(value(x));
    return push(OpKind::kSum, {x}, std::move(out));
  }

  NodeId l1_loss(NodeId pred, NodeId target) {
    Tensor<T> out({1});
    out[0] = ops::l1_loss(value(pred), value(target));
    return push(OpKind::kL1Loss, {pred, target}, std::move(out));
  }

  NodeId l2_loss(NodeId pred, NodeId target) {
    Tensor<T> out({1});
    out[0] = ops::l2_loss(value(pred), value(target));
    return push(OpKind::kL2Loss, {pred, target}, std::move(out));
  }

  const Tensor<T>& value(NodeId id) const { return node(id).value; }

  // Gradient accumulated by the last backward(); zero tensor before that.
  const Tensor<T>& grad(NodeId id) const {
    const Node& n = node(id);
    if (n.grad.size() == 0)
      const_cast<Node&>(n).grad = Tensor<T>(n.value.shape());
    return n.grad;
  }

  int size() const { return static_cast<int>(nodes_.size()); }

  void zero_grads() {
    for (Node& n : nodes_)
      if (n.grad.size() != 0) n.grad.fill(T(0));
  }

  // Reverse traversal from a scalar-valued node. Accumulators are reset at
  // the start of every pass.
  void backward(NodeId loss) {
    Node& ln = node(loss);
    if (ln.value.size() != 1)
      throw ContractError("backward: loss node must be scalar, got " +
                          ln.value.shape().str());
    for (Node& n : nodes_) {
      if (n.grad.size() == 0)
        n.grad = Tensor<T>(n.value.shape());
      else
        n.grad.fill(T(0));
    }
    ln.grad[0] = T(1);
    for (int id = loss; id >= 0; --id) {
      Node& n = nodes_[id];
      switch (n.kind) {
        case OpKind::kInput:
          break;
        case OpKind::kConv2d:
          ops::conv2d_backward(value(n.in[0]), value(n.in[1]), n.grad,
                               n.stride, n.padding, &mut_grad(n.in[0]),
                               &mut_grad(n.in[1]), &mut_grad(n.in[2]));
          break;
        case OpKind::kConvTranspose2d:
          ops::conv2d_transpose_backward(value(n.in[0]), value(n.in[1]),
                                         n.grad, n.stride, &mut_grad(n.in[0]),
                                         &mut_grad(n.in[1]),
                                         &mut_grad(n.in[2]));
          break;
        case OpKind::kPRelu:
          ops::prelu_backward(value(n.in[0]), value(n.in[1]), n.grad,
                              &mut_grad(n.in[0]), &mut_grad(n.in[1]));
          break;
        case OpKind::kConcat:
          ops::concat_channels_backward(n.grad, value(n.in[0]).extent(1),
                                        &mut_grad(n.in[0]),
                                        &mut_grad(n.in[1]));
          break;
        case OpKind::kAdd: {
          Tensor<T>& ga = mut_grad(n.in[0]);
          Tensor<T>& gb = mut_grad(n.in[1]);
          for (int64_t j = 0; j < n.grad.size(); ++j) {
            ga[j] += n.grad[j];
            gb[j] += n.grad[j];
          }
          break;
        }
        case OpKind::kSum: {
          Tensor<T>& gx = mut_grad(n.in[0]);
          const T g = n.grad[0];
          for (int64_t j = 0; j < gx.size(); ++j) gx[j] += g;
          break;
        }
        case OpKind::kL1Loss:
          ops::l1_loss_backward(value(n.in[0]), value(n.in[1]), n.grad[0],
                                &mut_grad(n.in[0]), &mut_grad(n.in[1]));
          break;
        case OpKind::kL2Loss:
          ops::l2_loss_backward(value(n.in[0]), value(n.in[1]), n.grad[0],
                                &mut_grad(n.in[0]), &mut_grad(n.in[1]));
          break;
      }
    }
  }

 private:
  struct Node {
    OpKind kind;
    std::array<NodeId, 3> in{-1, -1, -1};
    Tensor<T> value;
    Tensor<T> grad;
    int stride = 1;
    int padding = 0;
  };

  const Node& node(NodeId id) const {
    if (id < 0 || id >= size())
      throw ContractError("graph: node " + std::to_string(id) +
                          " is not on this tape");
    return nodes_[static_cast<size_t>(id)];
  }
  Node& node(NodeId id) {
    return const_cast<Node&>(static_cast<const Graph*>(this)->node(id));
  }

  Tensor<T>& mut_grad(NodeId id) { return node(id).grad; }

  NodeId push(OpKind kind, std::initializer_list<NodeId> inputs,
              Tensor<T> value) {
    Node n;
    n.kind = kind;
    int i = 0;
    for (NodeId in : inputs) {
      node(in);  // validates
      n.in[i++] = in;
    }
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

}  // namespace pansharp
