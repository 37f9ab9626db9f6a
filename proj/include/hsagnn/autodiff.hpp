#pragma once

// Reverse-mode differentiation over a linear tape of Tensor-valued nodes.
//
// Every op appends a node holding its forward value and a closure that
// pushes the node's gradient into its inputs. Nodes are appended in
// evaluation order, so a single reverse sweep over the tape is a valid
// topological traversal and gradients accumulate additively on fan-out.
// A Tape is confined to one thread and one training step.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hsagnn/tensor.hpp"

namespace hsagnn::ad {

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Tensor& grad() const;
  bool requires_grad() const;
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Trainable leaf; its gradient is populated by backward().
  Var parameter(Tensor value);
  /// Non-trainable leaf.
  Var constant(Tensor value);

  /// Appends an op node. requires_grad is inherited from the inputs.
  Var push(Tensor value, bool requires_grad, Backward backward);

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer for accumulation; allocated zero on first use.
  Tensor& grad_buffer(std::size_t id);
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

// Differentiable ops. All inputs must live on the same tape.

Var matmul(Var a, Var b);             // a·b
Var matmul_nt(Var a, Var b);          // a·bᵀ
Var add(Var a, Var b);                // same shape
Var sub(Var a, Var b);                // same shape
Var scale(Var a, double factor);
Var bias_add(Var a, Var bias);        // bias 1×cols broadcast over rows
Var tanh(Var a);
Var sigmoid(Var a);
Var hadamard_square(Var a);
Var mean_reduce(Var a);               // -> 1×1
Var sum_reduce(Var a);                // -> 1×1

/// Row-wise softmax; mask is rows×cols or 1×cols (broadcast), nonzero = excluded.
/// Masked entries get exactly 0. Throws if a row has every entry masked.
Var masked_softmax(Var logits, std::span<const std::uint8_t> mask);

/// Mean binary cross-entropy of probabilities p (n×1 or 1×n) against 0/1 labels.
/// p is clamped to [1e-7, 1-1e-7].
Var bce_loss(Var p, std::span<const double> labels);

/// Selects rows by index (repeats allowed); gradient scatters back additively.
Var gather_rows(Var a, std::span<const std::size_t> index);
Var concat_cols(std::span<const Var> parts);

// Grouped ops over consecutive blocks of `group` rows (one block per tuple).

/// For each block: out[i, j] = q_i · k_j  (rows×group output).
Var group_matmul_nt(Var q, Var k, std::size_t group);
/// For each block: out_i = Σ_j alpha[i, j] · v_j  (alpha rows×group).
Var group_matmul(Var alpha, Var v, std::size_t group);
/// Per-block mean of a column vector: (B·group)×1 -> B×1.
Var group_mean(Var a, std::size_t group);
/// Per-block minimum of a column vector; ties route gradient to the first argmin.
Var group_min(Var a, std::size_t group);

/// Parameterized scalar function used for gradient verification.
using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Central differences against the reverse sweep, per coordinate of every
/// parameter. Relative error uses max(|analytic|, |numeric|, 1e-8).
GradCheckResult finite_diff_check_detailed(const ScalarFn& f, std::vector<Tensor> params,
                                           double eps = 1e-5);
double finite_diff_check(const ScalarFn& f, std::vector<Tensor> params, double eps = 1e-5);

}  // namespace hsagnn::ad
