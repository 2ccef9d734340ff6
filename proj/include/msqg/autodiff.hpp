#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "msqg/tensor.hpp"

namespace msqg::nn {

enum class OpKind : uint8_t {
    Leaf,
    MatMul,        // 2-D x 2-D, optional transpose of the right operand
    Add,           // same shape, or (m x n) + (1 x n) row broadcast
    Mul,           // elementwise, same shape
    Concat,        // n-ary along axis 0 (rows) or 1 (cols)
    Slice,         // contiguous range along axis 0 or 1
    Mean,          // mean over all elements -> 1x1
    Tanh,
    Sigmoid,
    Relu,
    Softmax,       // row-wise
    Embedding,     // table (V x d) gathered by token ids -> (len x d)
    CrossEntropy,  // mean token NLL of row-wise logits vs targets, PAD ignored
};

// Define-by-run tape. Nodes are appended in topological order and values are
// computed immediately; backward() walks the tape once in reverse. Parameter
// leaves are bound by pointer and their gradients accumulate into
// Tensor::grad, so one model can serve many graphs.
class Graph {
  public:
    int param(Tensor& t);             // leaf bound to a trainable tensor
    int input(const Tensor& t);       // leaf bound to read-only external data
    int value_leaf(Tensor t);         // leaf that owns its (non-trainable) value

    int matmul(int a, int b, bool transpose_b = false);
    int add(int a, int b);
    int mul(int a, int b);
    int concat(const std::vector<int>& parts, int axis);
    int slice(int a, int axis, int offset, int len);
    int mean(int a);
    int tanh_of(int a);
    int sigmoid_of(int a);
    int relu_of(int a);
    int softmax_rows(int a);
    int embedding(int table, const std::vector<int>& ids);
    int cross_entropy(int logits, const std::vector<int>& targets, int ignore_id);

    const Tensor& value(int id) const;
    std::span<const float> grad_of(int id) const;
    size_t node_count() const { return nodes_.size(); }

    // Root must be scalar (1 element). Gradients of bound parameters
    // accumulate into their Tensor::grad buffers.
    void backward(int root);

  private:
    struct Node {
        OpKind kind = OpKind::Leaf;
        std::vector<int> in;
        Tensor out;                    // owned value (unused for bound leaves)
        Tensor* bound = nullptr;       // trainable leaf
        const Tensor* cbound = nullptr;// read-only leaf
        std::vector<float> grad;       // local adjoint for owned nodes
        bool needs_grad = false;
        int axis = 0, offset = 0, len = 0;
        bool transpose_b = false;
        std::vector<int> ids;          // Embedding ids / CrossEntropy targets
        int ignore_id = -1;
        int n_counted = 0;             // CrossEntropy: tokens in the mean
    };

    const Tensor& val(const Node& n) const;
    const Node& checked(int id) const;
    int push(Node n);
    float* adjoint(Node& n);
    void accumulate(Node& n, std::span<const float> g);

    std::vector<Node> nodes_;
};

}  // namespace msqg::nn
