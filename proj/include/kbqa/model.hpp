#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "kbqa/tensor.hpp"

namespace kbqa {

// All learnable tensors, addressable by name for checkpointing, gradient
// checks and the optimizer. Iteration order is insertion order.
class ModelParameters {
public:
    Tensor& add(const std::string& name, Tensor init);
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const;

    std::size_t count() const { return entries_.size(); }
    const std::string& name(std::size_t i) const { return entries_[i].first; }
    Tensor& tensor(std::size_t i) { return entries_[i].second; }
    const Tensor& tensor(std::size_t i) const { return entries_[i].second; }

    const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }

private:
    std::vector<std::pair<std::string, Tensor>> entries_;
    std::map<std::string, std::size_t> index_;
};

// Parameter leaves registered on one tape. Valid only while the tape lives.
struct Binding {
    std::vector<std::pair<std::string, TensorId>> entries;

    TensorId id(const std::string& name) const;
};

Binding bind_parameters(Tape& tape, const ModelParameters& params);

// Named adjoint set for `loss`. Parameters that never fed the loss get
// zero tensors of their own shape.
std::map<std::string, Tensor> gradient(Tape& tape, TensorId loss, const Binding& binding);

// Accumulates per-example gradients across a batch.
class GradientBuffer {
public:
    explicit GradientBuffer(const ModelParameters& params);
    void accumulate(const std::map<std::string, Tensor>& grads);
    void scale(Real factor);
    void reset();
    Real global_norm() const;
    void clip_global_norm(Real max_norm);

    const std::map<std::string, Tensor>& grads() const { return grads_; }

private:
    std::map<std::string, Tensor> grads_;
};

// Uniform init helpers; all randomness flows through the caller's Rng.
Tensor uniform_tensor(std::vector<std::size_t> shape, Real lo, Real hi, Rng& rng);
// Uniform with limit sqrt(6/(fan_in+fan_out)), the usual choice for maps.
Tensor glorot_tensor(std::size_t fan_out, std::size_t fan_in, Rng& rng);

}  // namespace kbqa
