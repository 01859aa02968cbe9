#pragma once

#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "aircade/tensor.hpp"

namespace aircade {

/// Learnable tensor with an accumulating gradient buffer.
struct Parameter {
    Tensor value;
    Tensor grad;
    std::string name;

    Parameter() = default;
    Parameter(std::string n, Tensor v)
        : value(std::move(v)), grad(Tensor::zeros(value.shape)), name(std::move(n)) {}

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
    int64_t numel() const { return value.numel(); }
};

class ComputeTape;

/// Handle to a value recorded on a ComputeTape.
struct Var {
    ComputeTape* tape = nullptr;
    int32_t id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

/// Reverse-mode autodiff tape. Records every primitive applied during a
/// forward pass; backward() replays the records in exact reverse order and
/// accumulates adjoints into Parameter::grad for every parameter leaf.
///
/// Tensors recorded on a tape are immutable. A tape is single-threaded;
/// independent tapes may run concurrently as long as they do not write the
/// same Parameter gradient at the same time.
class ComputeTape {
public:
    ComputeTape() = default;
    ComputeTape(const ComputeTape&) = delete;
    ComputeTape& operator=(const ComputeTape&) = delete;

    // ---- leaves ----
    Var constant(Tensor v);
    /// Leases a parameter onto the tape. Repeated leases of the same
    /// parameter return the same node, so batched forwards share leaves.
    Var param(Parameter& p);

    const Tensor& val(Var v) const;
    size_t node_count() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }

    // ---- primitives ----
    /// Batched matrix product alpha * a @ b on the trailing two dimensions.
    /// Leading batch dimensions must match or broadcast from 1 (or be absent).
    Var matmul(Var a, Var b, double alpha = 1.0);
    Var transpose_last2(Var a);

    enum class SoftmaxAxis { last, second_last };
    Var softmax(Var x, SoftmaxAxis axis);
    Var softmax_lastdim(Var x) { return softmax(x, SoftmaxAxis::last); }

    Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

    Var relu(Var x);
    Var tanh_fn(Var x);
    Var sigmoid(Var x);
    Var abs_fn(Var x);

    // Binary elementwise ops broadcast trailing-aligned size-1 dimensions.
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var hadamard(Var a, Var b);
    Var divide(Var a, Var b);

    Var scale(Var x, double c);

    Var concat_lastdim(std::span<const Var> parts);
    Var slice_lastdim(Var x, int64_t start, int64_t len);

    /// x @ w (+ bias). Composition of matmul and broadcast add.
    Var linear(Var x, Var w);
    Var linear(Var x, Var w, Var bias);

    /// Select rows of a table by index; adjoint scatter-adds back.
    Var gather_rows(Var table, std::vector<int64_t> rows);
    /// Insert a new axis of the given size at `axis`, repeating values.
    Var expand_axis(Var x, int axis, int64_t count);
    /// Swap the first two axes of a rank-3 tensor.
    Var swap_axes01(Var x);
    Var reshape(Var x, Shape s);

    Var sum_all(Var x);
    Var mean_all(Var x);
    Var sum_lastdim_keepdim(Var x);
    Var stack_scalars(std::span<const Var> xs);

    /// Reverse sweep from a scalar loss. Consumes the tape.
    void backward(Var loss);

private:
    struct Node {
        Tensor value;
        Tensor adjoint;  // empty until first contribution arrives
        Parameter* parameter = nullptr;
        std::function<void(ComputeTape&, Node&)> backprop;
    };

    std::vector<Node> nodes_;
    std::unordered_map<Parameter*, int32_t> param_cache_;
    bool consumed_ = false;

    void check_open() const;
    int32_t require(Var v) const;
    Var push(Tensor value, std::function<void(ComputeTape&, Node&)> backprop);
    Tensor& adj(int32_t id);

    Var binary_elementwise(Var a, Var b, int op);
    Var unary_elementwise(Var x, int op);
};

}  // namespace aircade
