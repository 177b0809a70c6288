#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "kbqa/common.hpp"

namespace kbqa {

// Dense row-major tensor of rank 0..2. Values are immutable once the tensor
// is on a tape; elsewhere it is an ordinary value type.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<Real> values);

    static Tensor scalar(Real v);
    static Tensor vector(std::vector<Real> v);
    static Tensor matrix(std::size_t rows, std::size_t cols);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return values_.size(); }

    // Rank-2 accessors; rank-1 tensors behave as a single column.
    std::size_t rows() const { return shape_.empty() ? 1 : shape_[0]; }
    std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

    Real* data() { return values_.data(); }
    const Real* data() const { return values_.data(); }
    Real& operator[](std::size_t i) { return values_[i]; }
    Real operator[](std::size_t i) const { return values_[i]; }
    Real& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
    Real at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;

    bool requires_grad = false;

private:
    std::vector<std::size_t> shape_;
    std::vector<Real> values_;
};

// Value-level kernels shared by the tape ops and direct callers.
Tensor softmax(const Tensor& v);
Tensor sigmoid(const Tensor& x);
Real kl_divergence(const Tensor& p, const Tensor& q);

// q entries are clamped below at this value before the log in KL terms.
inline constexpr Real kKlClamp = static_cast<Real>(1e-12);

using TensorId = std::int32_t;

// Reverse-mode tape. Ops compute values eagerly and record an adjoint
// closure; backward() replays closures in exact reverse execution order.
// Single-owner: one tape must not be shared between concurrent executions.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaves. Gradients are collected only for leaves created via leaf();
    // constant() marks inputs that never receive adjoints (e.g. frozen
    // teacher distributions).
    TensorId leaf(Tensor value);
    TensorId constant(Tensor value);

    // -- elementwise / linear algebra -------------------------------------
    TensorId add(TensorId a, TensorId b);
    TensorId sub(TensorId a, TensorId b);
    TensorId mul(TensorId a, TensorId b);
    TensorId scale(TensorId a, Real c);
    TensorId matmul(TensorId a, TensorId b);     // (m,k)x(k,n)
    TensorId matmul_nt(TensorId a, TensorId b);  // (m,k)x(n,k)^T
    TensorId matvec(TensorId m, TensorId v);     // (m,k)x(k)
    TensorId inner(TensorId a, TensorId b);      // dot -> scalar
    TensorId sum(TensorId a);                    // -> scalar
    TensorId affine(TensorId w, TensorId x, TensorId b);  // Wx + b

    // -- shape ops ---------------------------------------------------------
    TensorId concat(std::span<const TensorId> parts);  // rank-1 concat
    TensorId concat_cols(TensorId a, TensorId b);
    TensorId row(TensorId m, std::size_t r);
    TensorId stack_rows(std::span<const TensorId> rows);

    // -- indexed ops over graph structure -----------------------------------
    TensorId gather_rows(TensorId m, std::vector<std::int64_t> idx);
    TensorId scatter_add_rows(TensorId m, std::vector<std::int64_t> idx, std::size_t out_rows);
    TensorId gather(TensorId v, std::vector<std::int64_t> idx);

    // -- row broadcasts ------------------------------------------------------
    TensorId rowwise_mul(TensorId m, TensorId v);        // each row ⊙ v
    TensorId add_rowwise(TensorId m, TensorId v);        // each row + v
    TensorId scale_rows(TensorId m, TensorId w);         // row i scaled by w[i]
    TensorId row_sum(TensorId m);                        // per-row sums -> vector
    TensorId weighted_row_sum(TensorId m, TensorId w);   // Σ_i w[i]·row_i

    // -- nonlinearities / losses ----------------------------------------------
    TensorId sigmoid_op(TensorId x);
    TensorId tanh_op(TensorId x);
    TensorId softmax_op(TensorId v);
    // Softmax over positions with mask=1; masked entries are exactly 0.
    TensorId masked_softmax(TensorId v, std::vector<std::uint8_t> mask);
    TensorId kl_divergence_op(TensorId p, TensorId q);

    const Tensor& value(TensorId id) const { return values_[static_cast<std::size_t>(id)]; }
    std::size_t node_count() const { return values_.size(); }

    // Seeds the loss adjoint with 1 and replays the tape in reverse. Throws
    // if loss is not scalar or if adjoints were already computed.
    void backward(TensorId loss);
    bool backward_done() const { return backward_done_; }
    const Tensor& grad(TensorId id) const;

private:
    struct Node {
        std::function<void()> back;  // empty for leaves/constants
    };

    TensorId push(Tensor value, std::function<void()> back);
    Tensor& g(TensorId id) { return grads_[static_cast<std::size_t>(id)]; }
    const Tensor& v(TensorId id) const { return values_[static_cast<std::size_t>(id)]; }

    std::vector<Tensor> values_;
    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    bool backward_done_ = false;
};

}  // namespace kbqa
