#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "crashsev/tensor.hpp"

namespace crashsev::diffgraph {

// Per-column batch-norm running statistics. `momentum` weights the NEW batch
// statistic: running <- (1 - momentum) * running + momentum * batch.
struct BatchNormState {
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.3;
    double epsilon = 1e-5;
    bool initialized = false;
};

constexpr double kLogEpsilon = 1e-12;

// Define-by-run reverse-mode tape over dense 2-D tensors. The node list is
// topologically ordered by construction; backward walks it once in reverse.
// Rebuilt each forward pass; single-threaded per tape.
class Tape {
public:
    // Records an input node. Parameters pass requires_grad = true.
    int leaf(Tensor value, bool requires_grad = false);

    // value/grad access. grad_of is valid after backward() for nodes that
    // required grad and were reachable from the loss.
    const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    const std::vector<double>& grad_of(int id) const {
        return nodes_[static_cast<std::size_t>(id)].value.grad;
    }

    int matmul(int a, int b);
    int add(int a, int b);                 // same shape
    int add_row_bias(int x, int bias);     // bias broadcast over rows
    int mul(int a, int b);                 // elementwise, same shape
    int scale(int x, double k);
    int affine(int x, double k, double c);  // k*x + c elementwise
    int relu(int x);
    int sigmoid(int x);
    int glu(int x);  // [m x 2u] -> [m x u]; first half gated by sigmoid of second
    int slice_cols(int x, std::size_t c0, std::size_t c1);  // columns [c0, c1)
    int softmax_rows(int x);
    // Mean negative log-likelihood of the true classes under row-wise softmax.
    int cross_entropy(int logits, const std::vector<int>& labels);
    // Mean over all entries of -m * log(m + 1e-12); the mask sparsity penalty.
    int neg_entropy_mean(int m);

    // Train mode normalizes by batch statistics and updates `state` in place;
    // scale/shift are learnable per-column leaf nodes, each [1 x cols].
    int batchnorm_train(int x, BatchNormState& state, int scale, int shift);
    // Infer mode uses running statistics only; errors if never trained.
    int batchnorm_infer(int x, const BatchNormState& state, int scale, int shift);

    // Custom primitive: caller supplies the forward value and a backward rule
    // receiving (tape, output grad, this node's id).
    using BackwardFn = std::function<void(Tape&, const std::vector<double>&, int)>;
    int custom(Tensor value, std::vector<int> inputs, BackwardFn backward);

    // Reverse sweep from a scalar (1x1) loss node. Fills grads of every
    // parameter leaf that the loss depends on; seed gradient is 1.
    void backward(int loss_id);

    bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
    std::size_t node_count() const { return nodes_.size(); }

    // Accumulates into a node's grad buffer. Exposed for custom backward rules.
    void accumulate_grad(int id, const std::vector<double>& delta);
    std::vector<double>& grad_buffer(int id);

private:
    struct Node {
        Tensor value;
        std::vector<int> inputs;
        BackwardFn backward_fn;  // null for leaves
        bool requires_grad = false;
    };

    int push(Tensor value, std::vector<int> inputs, BackwardFn backward);

    std::vector<Node> nodes_;
};

}  // namespace crashsev::diffgraph
