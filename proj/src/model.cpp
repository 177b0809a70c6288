#include "kbqa/model.hpp"

#include <cmath>
#include <stdexcept>

namespace kbqa {

Tensor& ModelParameters::add(const std::string& name, Tensor init) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    init.requires_grad = true;
    index_[name] = entries_.size();
    entries_.emplace_back(name, std::move(init));
    return entries_.back().second;
}

Tensor& ModelParameters::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("unknown parameter: " + name);
    return entries_[it->second].second;
}

const Tensor& ModelParameters::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("unknown parameter: " + name);
    return entries_[it->second].second;
}

bool ModelParameters::has(const std::string& name) const { return index_.count(name) != 0; }

TensorId Binding::id(const std::string& name) const {
    for (const auto& [n, tid] : entries) {
        if (n == name) return tid;
    }
    throw std::invalid_argument("parameter not bound: " + name);
}

Binding bind_parameters(Tape& tape, const ModelParameters& params) {
    Binding b;
    b.entries.reserve(params.count());
    for (const auto& [name, tensor] : params.entries()) {
        b.entries.emplace_back(name, tape.leaf(tensor));
    }
    return b;
}

std::map<std::string, Tensor> gradient(Tape& tape, TensorId loss, const Binding& binding) {
    if (!tape.backward_done()) tape.backward(loss);
    std::map<std::string, Tensor> out;
    for (const auto& [name, tid] : binding.entries) {
        out.emplace(name, tape.grad(tid));
    }
    return out;
}

GradientBuffer::GradientBuffer(const ModelParameters& params) {
    for (const auto& [name, tensor] : params.entries()) {
        grads_.emplace(name, Tensor(tensor.shape()));
    }
}

void GradientBuffer::accumulate(const std::map<std::string, Tensor>& grads) {
    for (const auto& [name, g] : grads) {
        Tensor& acc = grads_.at(name);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
    }
}

void GradientBuffer::scale(Real factor) {
    for (auto& [name, g] : grads_) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= factor;
    }
}

void GradientBuffer::reset() {
    for (auto& [name, g] : grads_) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = Real(0);
    }
}

Real GradientBuffer::global_norm() const {
    Real sq = 0;
    for (const auto& [name, g] : grads_) {
        for (std::size_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
    }
    return std::sqrt(sq);
}

void GradientBuffer::clip_global_norm(Real max_norm) {
    Real norm = global_norm();
    if (norm > max_norm && norm > Real(0)) scale(max_norm / norm);
}

Tensor uniform_tensor(std::vector<std::size_t> shape, Real lo, Real hi, Rng& rng) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<Real>(rng.uniform(lo, hi));
    }
    return t;
}

Tensor glorot_tensor(std::size_t fan_out, std::size_t fan_in, Rng& rng) {
    Real limit = static_cast<Real>(std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
    return uniform_tensor({fan_out, fan_in}, -limit, limit, rng);
}

}  // namespace kbqa
