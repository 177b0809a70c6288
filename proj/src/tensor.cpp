#include "kbqa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace kbqa {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

[[noreturn]] void bad_arg(const std::string& msg) { throw std::invalid_argument(msg); }

void require(bool cond, const char* msg) {
    if (!cond) bad_arg(msg);
}

Real stable_sigmoid(Real x) {
    if (x >= 0) {
        return Real(1) / (Real(1) + std::exp(-x));
    }
    Real e = std::exp(x);
    return e / (Real(1) + e);
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), values_(shape_product(shape_), Real(0)) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<Real> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    if (shape_product(shape_) != values_.size()) {
        bad_arg("tensor shape does not match value count");
    }
}

Tensor Tensor::scalar(Real v) { return Tensor({}, {v}); }

Tensor Tensor::vector(std::vector<Real> v) {
    std::size_t n = v.size();
    return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }

bool Tensor::all_finite() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](Real v) { return std::isfinite(v); });
}

Tensor softmax(const Tensor& v) {
    require(v.size() > 0, "softmax: empty input");
    Tensor out(v.shape());
    Real mx = v[0];
    for (std::size_t i = 1; i < v.size(); ++i) mx = std::max(mx, v[i]);
    Real z = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        z += out[i];
    }
    for (std::size_t i = 0; i < v.size(); ++i) out[i] /= z;
    return out;
}

Tensor sigmoid(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = stable_sigmoid(x[i]);
    return out;
}

Real kl_divergence(const Tensor& p, const Tensor& q) {
    if (p.size() != q.size()) bad_arg("kl_divergence: length mismatch");
    Real acc = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == Real(0)) continue;  // 0·ln 0 := 0
        acc += p[i] * (std::log(p[i]) - std::log(std::max(q[i], kKlClamp)));
    }
    return acc;
}

TensorId Tape::push(Tensor value, std::function<void()> back) {
    values_.push_back(std::move(value));
    nodes_.push_back(Node{std::move(back)});
    return static_cast<TensorId>(values_.size() - 1);
}

TensorId Tape::leaf(Tensor value) { return push(std::move(value), {}); }

TensorId Tape::constant(Tensor value) {
    value.requires_grad = false;
    return push(std::move(value), {});
}

const Tensor& Tape::grad(TensorId id) const {
    if (!backward_done_) throw std::logic_error("grad() before backward()");
    return grads_[static_cast<std::size_t>(id)];
}

void Tape::backward(TensorId loss) {
    if (backward_done_) {
        throw std::logic_error("backward() called twice on one tape; re-record first");
    }
    if (v(loss).rank() != 0) bad_arg("backward: loss must be scalar");
    backward_done_ = true;
    grads_.clear();
    grads_.reserve(values_.size());
    for (const Tensor& t : values_) grads_.emplace_back(t.shape());
    grads_[static_cast<std::size_t>(loss)][0] = Real(1);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        if (nodes_[i].back) nodes_[i].back();
    }
}

// ---------------------------------------------------------------------------
// elementwise / linear algebra

TensorId Tape::add(TensorId a, TensorId b) {
    require(v(a).same_shape(v(b)), "add: shape mismatch");
    Tensor out = v(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v(b)[i];
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, a, b] {
        const Tensor& go = g(id);
        for (std::size_t i = 0; i < go.size(); ++i) {
            g(a)[i] += go[i];
            g(b)[i] += go[i];
        }
    };
    return id;
}

TensorId Tape::sub(TensorId a, TensorId b) {
    require(v(a).same_shape(v(b)), "sub: shape mismatch");
    Tensor out = v(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= v(b)[i];
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, a, b] {
        const Tensor& go = g(id);
        for (std::size_t i = 0; i < go.size(); ++i) {
            g(a)[i] += go[i];
            g(b)[i] -= go[i];
        }
    };
    return id;
}

TensorId Tape::mul(TensorId a, TensorId b) {
    require(v(a).same_shape(v(b)), "mul: shape mismatch");
    Tensor out = v(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= v(b)[i];
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, a, b] {
        const Tensor& go = g(id);
        for (std::size_t i = 0; i < go.size(); ++i) {
            g(a)[i] += go[i] * v(b)[i];
            g(b)[i] += go[i] * v(a)[i];
        }
    };
    return id;
}

TensorId Tape::scale(TensorId a, Real c) {
    Tensor out = v(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, a, c] {
        const Tensor& go = g(id);
        for (std::size_t i = 0; i < go.size(); ++i) g(a)[i] += go[i] * c;
    };
    return id;
}

TensorId Tape::matmul(TensorId a, TensorId b) {
    const Tensor& A = v(a);
    const Tensor& B = v(b);
    require(A.rank() == 2 && B.rank() == 2 && A.cols() == B.rows(), "matmul: shape mismatch");
    std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const Real* arow = A.data() + i * k;
        Real* orow = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            Real aip = arow[p];
            const Real* brow = B.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, a, b, m, k, n] {
        const Tensor& go = g(id);
        const Tensor& A2 = v(a);
        const Tensor& B2 = v(b);
        // dA = dO B^T ; dB = A^T dO
        for (std::size_t i = 0; i < m; ++i) {
            const Real* grow = go.data() + i * n;
            const Real* arow = A2.data() + i * k;
            Real* darow = g(a).data() + i * k;
            for (std::size_t p = 0; p < k; ++p) {
                const Real* brow = B2.data() + p * n;
                Real* dbrow = g(b).data() + p * n;
                Real acc = 0;
                Real aip = arow[p];
                for (std::size_t j = 0; j < n; ++j) {
                    acc += grow[j] * brow[j];
                    dbrow[j] += aip * grow[j];
                }
                darow[p] += acc;
            }
        }
    };
    return id;
}

TensorId Tape::matmul_nt(TensorId a, TensorId b) {
    const Tensor& A = v(a);
    const Tensor& B = v(b);
    require(A.rank() == 2 && B.rank() == 2 && A.cols() == B.cols(), "matmul_nt: shape mismatch");
    std::size_t m = A.rows(), k = A.cols(), n = B.rows();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const Real* arow = A.data() + i * k;
        Real* orow = out.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const Real* brow = B.data() + j * k;
            Real acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            orow[j] = acc;
        }
    }
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, a, b, m, k, n] {
        const Tensor& go = g(id);
        const Tensor& A2 = v(a);
        const Tensor& B2 = v(b);
        // O = A B^T : dA = dO B ; dB = dO^T A
        for (std::size_t i = 0; i < m; ++i) {
            const Real* grow = go.data() + i * n;
            const Real* arow = A2.data() + i * k;
            Real* darow = g(a).data() + i * k;
            for (std::size_t j = 0; j < n; ++j) {
                Real gij = grow[j];
                if (gij == Real(0)) continue;
                const Real* brow = B2.data() + j * k;
                Real* dbrow = g(b).data() + j * k;
                for (std::size_t p = 0; p < k; ++p) {
                    darow[p] += gij * brow[p];
                    dbrow[p] += gij * arow[p];
                }
            }
        }
    };
    return id;
}

TensorId Tape::matvec(TensorId m, TensorId x) {
    const Tensor& M = v(m);
    const Tensor& X = v(x);
    require(M.rank() == 2 && X.rank() == 1 && M.cols() == X.size(), "matvec: shape mismatch");
    std::size_t r = M.rows(), c = M.cols();
    Tensor out({r});
    for (std::size_t i = 0; i < r; ++i) {
        Real acc = 0;
        for (std::size_t j = 0; j < c; ++j) acc += M.at(i, j) * X[j];
        out[i] = acc;
    }
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, m, x, r, c] {
        const Tensor& go = g(id);
        for (std::size_t i = 0; i < r; ++i) {
            Real gi = go[i];
            for (std::size_t j = 0; j < c; ++j) {
                g(m).at(i, j) += gi * v(x)[j];
                g(x)[j] += gi * v(m).at(i, j);
            }
        }
    };
    return id;
}

TensorId Tape::inner(TensorId a, TensorId b) {
    require(v(a).size() == v(b).size(), "inner: length mismatch");
    Real acc = 0;
    for (std::size_t i = 0; i < v(a).size(); ++i) acc += v(a)[i] * v(b)[i];
    TensorId id = push(Tensor::scalar(acc), {});
    nodes_.back().back = [this, id, a, b] {
        Real go = g(id)[0];
        for (std::size_t i = 0; i < v(a).size(); ++i) {
            g(a)[i] += go * v(b)[i];
            g(b)[i] += go * v(a)[i];
        }
    };
    return id;
}

TensorId Tape::sum(TensorId a) {
    Real acc = 0;
    for (std::size_t i = 0; i < v(a).size(); ++i) acc += v(a)[i];
    TensorId id = push(Tensor::scalar(acc), {});
    nodes_.back().back = [this, id, a] {
        Real go = g(id)[0];
        for (std::size_t i = 0; i < v(a).size(); ++i) g(a)[i] += go;
    };
    return id;
}

TensorId Tape::affine(TensorId w, TensorId x, TensorId b) { return add(matvec(w, x), b); }

// ---------------------------------------------------------------------------
// shape ops

TensorId Tape::concat(std::span<const TensorId> parts) {
    require(!parts.empty(), "concat: no parts");
    std::size_t total = 0;
    for (TensorId p : parts) {
        require(v(p).rank() == 1, "concat: rank-1 parts required");
        total += v(p).size();
    }
    Tensor out({total});
    std::size_t off = 0;
    for (TensorId p : parts) {
        for (std::size_t i = 0; i < v(p).size(); ++i) out[off + i] = v(p)[i];
        off += v(p).size();
    }
    std::vector<TensorId> own(parts.begin(), parts.end());
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, own = std::move(own)] {
        const Tensor& go = g(id);
        std::size_t off2 = 0;
        for (TensorId p : own) {
            for (std::size_t i = 0; i < v(p).size(); ++i) g(p)[i] += go[off2 + i];
            off2 += v(p).size();
        }
    };
    return id;
}

TensorId Tape::concat_cols(TensorId a, TensorId b) {
    const Tensor& A = v(a);
    const Tensor& B = v(b);
    require(A.rank() == 2 && B.rank() == 2 && A.rows() == B.rows(), "concat_cols: shape mismatch");
    std::size_t r = A.rows(), ca = A.cols(), cb = B.cols();
    Tensor out({r, ca + cb});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < ca; ++j) out.at(i, j) = A.at(i, j);
        for (std::size_t j = 0; j < cb; ++j) out.at(i, ca + j) = B.at(i, j);
    }
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, a, b, r, ca, cb] {
        const Tensor& go = g(id);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < ca; ++j) g(a).at(i, j) += go.at(i, j);
            for (std::size_t j = 0; j < cb; ++j) g(b).at(i, j) += go.at(i, ca + j);
        }
    };
    return id;
}

TensorId Tape::row(TensorId m, std::size_t r) {
    const Tensor& M = v(m);
    require(M.rank() == 2 && r < M.rows(), "row: out of range");
    std::size_t c = M.cols();
    Tensor out({c});
    for (std::size_t j = 0; j < c; ++j) out[j] = M.at(r, j);
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, m, r, c] {
        const Tensor& go = g(id);
        for (std::size_t j = 0; j < c; ++j) g(m).at(r, j) += go[j];
    };
    return id;
}

TensorId Tape::stack_rows(std::span<const TensorId> rows) {
    require(!rows.empty(), "stack_rows: no rows");
    std::size_t c = v(rows[0]).size();
    for (TensorId r : rows) {
        require(v(r).rank() == 1 && v(r).size() == c, "stack_rows: row shape mismatch");
    }
    Tensor out({rows.size(), c});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) = v(rows[i])[j];
    }
    std::vector<TensorId> own(rows.begin(), rows.end());
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, own = std::move(own), c] {
        const Tensor& go = g(id);
        for (std::size_t i = 0; i < own.size(); ++i) {
            for (std::size_t j = 0; j < c; ++j) g(own[i])[j] += go.at(i, j);
        }
    };
    return id;
}

// ---------------------------------------------------------------------------
// indexed ops

TensorId Tape::gather_rows(TensorId m, std::vector<std::int64_t> idx) {
    const Tensor& M = v(m);
    require(M.rank() == 2, "gather_rows: matrix required");
    std::size_t c = M.cols();
    Tensor out({idx.size(), c});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        require(idx[i] >= 0 && static_cast<std::size_t>(idx[i]) < M.rows(),
                "gather_rows: index out of range");
        const Real* src = M.data() + static_cast<std::size_t>(idx[i]) * c;
        Real* dst = out.data() + i * c;
        for (std::size_t j = 0; j < c; ++j) dst[j] = src[j];
    }
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, m, idx = std::move(idx), c] {
        const Tensor& go = g(id);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const Real* grow = go.data() + i * c;
            Real* dst = g(m).data() + static_cast<std::size_t>(idx[i]) * c;
            for (std::size_t j = 0; j < c; ++j) dst[j] += grow[j];
        }
    };
    return id;
}

TensorId Tape::scatter_add_rows(TensorId m, std::vector<std::int64_t> idx, std::size_t out_rows) {
    const Tensor& M = v(m);
    require(M.rank() == 2 && M.rows() == idx.size(), "scatter_add_rows: shape mismatch");
    std::size_t c = M.cols();
    Tensor out({out_rows, c});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        require(idx[i] >= 0 && static_cast<std::size_t>(idx[i]) < out_rows,
                "scatter_add_rows: index out of range");
        const Real* src = M.data() + i * c;
        Real* dst = out.data() + static_cast<std::size_t>(idx[i]) * c;
        for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, m, idx = std::move(idx), c] {
        const Tensor& go = g(id);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const Real* grow = go.data() + static_cast<std::size_t>(idx[i]) * c;
            Real* dst = g(m).data() + i * c;
            for (std::size_t j = 0; j < c; ++j) dst[j] += grow[j];
        }
    };
    return id;
}

TensorId Tape::gather(TensorId vct, std::vector<std::int64_t> idx) {
    const Tensor& V = v(vct);
    require(V.rank() == 1, "gather: vector required");
    Tensor out({idx.size()});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        require(idx[i] >= 0 && static_cast<std::size_t>(idx[i]) < V.size(),
                "gather: index out of range");
        out[i] = V[static_cast<std::size_t>(idx[i])];
    }
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, vct, idx = std::move(idx)] {
        const Tensor& go = g(id);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            g(vct)[static_cast<std::size_t>(idx[i])] += go[i];
        }
    };
    return id;
}

// ---------------------------------------------------------------------------
// row broadcasts

TensorId Tape::rowwise_mul(TensorId m, TensorId x) {
    const Tensor& M = v(m);
    const Tensor& X = v(x);
    require(M.rank() == 2 && X.rank() == 1 && M.cols() == X.size(), "rowwise_mul: shape mismatch");
    std::size_t r = M.rows(), c = M.cols();
    Tensor out({r, c});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) = M.at(i, j) * X[j];
    }
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, m, x, r, c] {
        const Tensor& go = g(id);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                g(m).at(i, j) += go.at(i, j) * v(x)[j];
                g(x)[j] += go.at(i, j) * v(m).at(i, j);
            }
        }
    };
    return id;
}

TensorId Tape::add_rowwise(TensorId m, TensorId x) {
    const Tensor& M = v(m);
    const Tensor& X = v(x);
    require(M.rank() == 2 && X.rank() == 1 && M.cols() == X.size(), "add_rowwise: shape mismatch");
    std::size_t r = M.rows(), c = M.cols();
    Tensor out({r, c});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) = M.at(i, j) + X[j];
    }
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, m, x, r, c] {
        const Tensor& go = g(id);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                g(m).at(i, j) += go.at(i, j);
                g(x)[j] += go.at(i, j);
            }
        }
    };
    return id;
}

TensorId Tape::scale_rows(TensorId m, TensorId w) {
    const Tensor& M = v(m);
    const Tensor& W = v(w);
    require(M.rank() == 2 && W.rank() == 1 && M.rows() == W.size(), "scale_rows: shape mismatch");
    std::size_t r = M.rows(), c = M.cols();
    Tensor out({r, c});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) = M.at(i, j) * W[i];
    }
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, m, w, r, c] {
        const Tensor& go = g(id);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                g(m).at(i, j) += go.at(i, j) * v(w)[i];
                g(w)[i] += go.at(i, j) * v(m).at(i, j);
            }
        }
    };
    return id;
}

TensorId Tape::row_sum(TensorId m) {
    const Tensor& M = v(m);
    require(M.rank() == 2, "row_sum: matrix required");
    std::size_t r = M.rows(), c = M.cols();
    Tensor out({r});
    for (std::size_t i = 0; i < r; ++i) {
        Real acc = 0;
        for (std::size_t j = 0; j < c; ++j) acc += M.at(i, j);
        out[i] = acc;
    }
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, m, r, c] {
        const Tensor& go = g(id);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) g(m).at(i, j) += go[i];
        }
    };
    return id;
}

TensorId Tape::weighted_row_sum(TensorId m, TensorId w) {
    const Tensor& M = v(m);
    const Tensor& W = v(w);
    require(M.rank() == 2 && W.rank() == 1 && M.rows() == W.size(),
            "weighted_row_sum: shape mismatch");
    std::size_t r = M.rows(), c = M.cols();
    Tensor out({c});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out[j] += W[i] * M.at(i, j);
    }
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, m, w, r, c] {
        const Tensor& go = g(id);
        for (std::size_t i = 0; i < r; ++i) {
            Real acc = 0;
            for (std::size_t j = 0; j < c; ++j) {
                g(m).at(i, j) += go[j] * v(w)[i];
                acc += go[j] * v(m).at(i, j);
            }
            g(w)[i] += acc;
        }
    };
    return id;
}

// ---------------------------------------------------------------------------
// nonlinearities / losses

TensorId Tape::sigmoid_op(TensorId x) {
    Tensor out(v(x).shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(v(x)[i]);
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, x] {
        const Tensor& go = g(id);
        const Tensor& o = v(id);
        for (std::size_t i = 0; i < go.size(); ++i) {
            g(x)[i] += go[i] * o[i] * (Real(1) - o[i]);
        }
    };
    return id;
}

TensorId Tape::tanh_op(TensorId x) {
    Tensor out(v(x).shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(v(x)[i]);
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, x] {
        const Tensor& go = g(id);
        const Tensor& o = v(id);
        for (std::size_t i = 0; i < go.size(); ++i) {
            g(x)[i] += go[i] * (Real(1) - o[i] * o[i]);
        }
    };
    return id;
}

TensorId Tape::softmax_op(TensorId x) {
    require(v(x).rank() == 1, "softmax: vector required");
    TensorId id = push(softmax(v(x)), {});
    nodes_.back().back = [this, id, x] {
        const Tensor& go = g(id);
        const Tensor& o = v(id);
        Real dot = 0;
        for (std::size_t i = 0; i < o.size(); ++i) dot += go[i] * o[i];
        for (std::size_t i = 0; i < o.size(); ++i) g(x)[i] += o[i] * (go[i] - dot);
    };
    return id;
}

TensorId Tape::masked_softmax(TensorId x, std::vector<std::uint8_t> mask) {
    const Tensor& X = v(x);
    require(X.rank() == 1 && X.size() == mask.size(), "masked_softmax: shape mismatch");
    bool any = std::any_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; });
    require(any, "masked_softmax: empty mask");
    Tensor out(X.shape());
    Real mx = -std::numeric_limits<Real>::infinity();
    for (std::size_t i = 0; i < X.size(); ++i) {
        if (mask[i]) mx = std::max(mx, X[i]);
    }
    Real z = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        if (mask[i]) {
            out[i] = std::exp(X[i] - mx);
            z += out[i];
        }
    }
    for (std::size_t i = 0; i < X.size(); ++i) out[i] = mask[i] ? out[i] / z : Real(0);
    TensorId id = push(std::move(out), {});
    nodes_.back().back = [this, id, x, mask = std::move(mask)] {
        const Tensor& go = g(id);
        const Tensor& o = v(id);
        Real dot = 0;
        for (std::size_t i = 0; i < o.size(); ++i) {
            if (mask[i]) dot += go[i] * o[i];
        }
        for (std::size_t i = 0; i < o.size(); ++i) {
            if (mask[i]) g(x)[i] += o[i] * (go[i] - dot);
        }
    };
    return id;
}

TensorId Tape::kl_divergence_op(TensorId p, TensorId q) {
    TensorId id = push(Tensor::scalar(kl_divergence(v(p), v(q))), {});
    nodes_.back().back = [this, id, p, q] {
        Real go = g(id)[0];
        const Tensor& P = v(p);
        const Tensor& Q = v(q);
        for (std::size_t i = 0; i < P.size(); ++i) {
            Real qc = std::max(Q[i], kKlClamp);
            if (P[i] != Real(0)) {
                g(p)[i] += go * (std::log(P[i]) + Real(1) - std::log(qc));
            }
            if (Q[i] > kKlClamp) g(q)[i] += go * (-P[i] / qc);
        }
    };
    return id;
}

}  // namespace kbqa
