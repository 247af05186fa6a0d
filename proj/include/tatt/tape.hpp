// Reverse-mode differentiation over Matrix values.
//
// A Tape records every primitive in execution order together with a snapshot
// of its output. Node indices are a topological order (parents always precede
// children), so backward() is a single reverse sweep. Leaves are either
// constants or variables; only variables (and everything downstream of them)
// carry gradients.
//
// A tape is single-owner. Distinct tapes share no state.
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "tatt/matrix.hpp"

namespace tatt {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    const Matrix& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    std::size_t id() const noexcept { return id_; }
    Tape* tape() const noexcept { return tape_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

using Inputs = std::span<const Matrix* const>;
using InputGrads = std::span<Matrix* const>;

/// Computes a node's output from its parents' values.
using ForwardFn = std::function<Matrix(Inputs)>;

/// Adds d(loss)/d(input) into each non-null input gradient, given the
/// node's inputs, its output and d(loss)/d(output).
using BackwardFn = std::function<void(Inputs, const Matrix& output, const Matrix& grad_out, InputGrads)>;

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf holding a copy of value; never receives a gradient.
    Var constant(Matrix value);

    /// Leaf referencing external storage without copying. The referenced
    /// matrix must outlive the tape and must not change while it is in use.
    Var constant_ref(const Matrix& value);

    /// Trainable leaf referencing external storage; its gradient is
    /// available through grad() after backward().
    Var variable(const Matrix& value);

    /// Runs forward once and records the node. Throws NumericError if the
    /// output is not finite.
    Var record(std::vector<Var> parents, ForwardFn forward, BackwardFn backward);

    /// Reverse accumulation from a 1x1 loss node. May be called once per tape.
    void backward(Var loss);

    /// Gradient of the last backward() loss w.r.t. v. Zero for nodes the loss
    /// does not depend on.
    const Matrix& grad(Var v);

    /// Recomputes every recorded node from its parents and reports whether
    /// each result equals the stored snapshot bit-for-bit.
    bool replay_matches() const;

    std::size_t size() const noexcept { return nodes_.size(); }

    const Matrix& value(std::size_t id) const { return nodes_[id].value(); }

private:
    struct Node {
        Matrix owned;
        const Matrix* external = nullptr;
        std::vector<std::size_t> parents;
        ForwardFn forward;
        BackwardFn backward;
        bool requires_grad = false;
        Matrix grad;

        const Matrix& value() const { return external != nullptr ? *external : owned; }
    };

    Var push(Node node);
    void check_owner(Var v) const;

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

// Differentiable primitives. All arguments must live on the same tape.

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
/// Elementwise product.
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
/// a / s where s is a 1x1 node.
Var divide_by_scalar(Var a, Var s);
/// Adds a 1 x cols row vector to every row of a.
Var add_row(Var a, Var bias);
/// Multiplies row i of a by factors[i].
Var scale_rows(Var a, std::vector<double> factors);
Var softmax_rows(Var a);
/// gain and bias are 1 x cols nodes.
Var layer_norm(Var x, Var gain, Var bias, double eps);
Var gelu(Var a);
/// Embedding lookup: output row i = table row indices[i].
Var gather_rows(Var table, std::vector<std::size_t> indices);
Var row_slice(Var a, std::size_t begin, std::size_t count);
Var col_slice(Var a, std::size_t begin, std::size_t count);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
/// 1x1 node holding the Frobenius norm.
Var frobenius_norm(Var a);
/// 1x1 sum of all entries.
Var sum(Var a);
/// Mean over rows of -log softmax(logits)[row, labels[row]]; 1x1.
Var cross_entropy(Var logits, std::vector<std::size_t> labels);

}  // namespace tatt
