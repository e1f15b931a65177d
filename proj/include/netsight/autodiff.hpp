#pragma once

#include <functional>
#include <vector>

#include "netsight/tensor.hpp"

namespace netsight {

class Tape;

/// Handle to a value recorded on a tape.
struct Var {
    Tape* tape = nullptr;
    int idx = -1;
};

/// Record of primitive operations in construction order (which is a
/// topological order, since every operation only consumes earlier entries).
/// backward() replays the record in exact reverse; a consumed tape cannot be
/// replayed.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf without upstream gradient interest (masks, targets, encodings).
    Var constant(Tensor value);
    Var constant(const Matrix& value) { return constant(Tensor::from_matrix(value)); }

    /// Leaf whose gradient will be read after backward (parameters, probes).
    Var watch(const Matrix& value) { return constant(Tensor::from_matrix(value)); }
    Var watch(Tensor value) { return constant(std::move(value)); }

    const Tensor& value(Var v) const { return nodes_[static_cast<size_t>(v.idx)].value; }

    /// Gradient of the backward() root with respect to v, as a 2-D matrix
    /// (zeros when no gradient reached v).
    Matrix grad_of(Var v) const;

    /// Reverse pass from a scalar root. Single use; a second call throws.
    void backward(Var root);

    bool consumed() const { return consumed_; }
    size_t size() const { return nodes_.size(); }

    // Internal: used by the operation builders.
    Var emplace(Tensor value, std::function<void(Tape&)> back);
    void set_back(Var v, std::function<void(Tape&)> back);
    Tensor& node(int idx) { return nodes_[static_cast<size_t>(idx)].value; }

private:
    struct Node {
        Tensor value;
        std::function<void(Tape&)> back;  // empty for leaves
    };
    std::vector<Node> nodes_;
    bool consumed_ = false;
};

// ---------------------------------------------------------------------------
// Primitive operations. All validate shapes and record exact backward rules.
// ---------------------------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, Scalar c);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var relu(Var a);
Var leaky_relu(Var a, Scalar slope);

/// y = x ⊕ b with the 1×cols row vector b added to every row of x.
Var add_row_vector(Var x, Var b);

/// Softmax over all entries, with max-subtraction for stability.
Var softmax(Var v);

/// Row-wise softmax (each row normalized independently).
Var row_softmax(Var x);

/// Row-wise softmax restricted to entries where mask != 0; masked-out
/// entries are exactly zero. Throws if some row has an empty support.
Var masked_row_softmax(Var x, Var mask);

/// Per-row normalization over the last dimension:
/// out = γ ⊙ (x − μ)/max(σ, eps) + β with population σ, row-wise stats.
Var layer_norm(Var x, Var gamma, Var beta, Scalar eps = 1e-5);

/// Standardizes over all entries of x (single mean/σ for the whole matrix).
Var normalize_entries(Var x, Scalar eps = 1e-5);

/// out = s · x where s is a 1×1 variable.
Var mul_scalar(Var x, Var s);
/// out = x + m where m is a 1×1 variable.
Var add_scalar(Var x, Var m);

Var vstack(const std::vector<Var>& parts);
Var hstack(const std::vector<Var>& parts);
Var slice_rows(Var x, Eigen::Index first, Eigen::Index count);

Var sum_all(Var x);
Var mean_all(Var x);

/// Mean elementwise Huber loss against a fixed target.
Var huber_loss(Var pred, const Tensor& target, Scalar delta);

/// y = x·W (+ b broadcast per row).
Var linear(Var x, Var w);
Var linear(Var x, Var w, Var b);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Scalar c, Var a) { return scale(a, c); }
inline Var operator*(Var a, Var b) { return hadamard(a, b); }

}  // namespace netsight
