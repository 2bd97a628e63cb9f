#pragma once

// Reverse-mode autodiff over dense tensors. The graph is a DAG of
// shared_ptr nodes built by the free functions below; backward() walks it
// once in reverse topological order and accumulates adjoints additively,
// which is what makes Siamese weight sharing work: both legs reference the
// same parameter leaves, so their gradients add up.
//
// No broadcasting anywhere; every shape is explicit.

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "convrank/rng.hpp"
#include "convrank/tensor.hpp"

namespace convrank::ag {

template <typename T>
struct NodeT;

template <typename T>
using NodePtr = std::shared_ptr<NodeT<T>>;

template <typename T>
struct NodeT {
    TensorT<T> value;
    TensorT<T> grad;  // allocated on first touch during backward
    bool requires_grad = false;
    std::vector<NodePtr<T>> parents;
    std::function<void(NodeT<T>&)> push_grad;  // distributes this->grad to parents
};

using Node = NodePtr<float>;

namespace detail {

template <typename T>
void ensure_grad(NodeT<T>& n) {
    if (n.grad.empty()) n.grad = TensorT<T>(n.value.shape());
}

template <typename T>
NodePtr<T> make_node(TensorT<T> value, std::vector<NodePtr<T>> parents,
                     std::function<void(NodeT<T>&)> push) {
    auto n = std::make_shared<NodeT<T>>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents) n->requires_grad = n->requires_grad || p->requires_grad;
    if (n->requires_grad) n->push_grad = std::move(push);
    return n;
}

template <typename T>
void require_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                             b.shape_str());
    }
}

// C = A[m x k] . B[k x n], accumulated in double.
template <typename T>
TensorT<T> mm_nn(const TensorT<T>& a, const TensorT<T>& b) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    TensorT<T> c({m, n});
    std::vector<double> acc(n);
    for (std::size_t i = 0; i < m; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = static_cast<double>(a.at(i, p));
            const T* brow = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) acc[j] += av * static_cast<double>(brow[j]);
        }
        T* crow = c.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] = static_cast<T>(acc[j]);
    }
    return c;
}

// dst += A[m x n] . B^T where B is [k x n] -> [m x k]
template <typename T>
void add_mm_nt(TensorT<T>& dst, const TensorT<T>& a, const TensorT<T>& b) {
    const std::size_t m = a.rows(), n = a.cols(), k = b.rows();
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a.data() + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const T* brow = b.data() + l * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                acc += static_cast<double>(arow[j]) * static_cast<double>(brow[j]);
            }
            dst.at(i, l) = static_cast<T>(static_cast<double>(dst.at(i, l)) + acc);
        }
    }
}

// dst += A^T . B where A is [m x k], B is [m x n] -> [k x n]
template <typename T>
void add_mm_tn(TensorT<T>& dst, const TensorT<T>& a, const TensorT<T>& b) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> acc(n);
    for (std::size_t l = 0; l < k; ++l) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double av = static_cast<double>(a.at(i, l));
            const T* brow = b.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) acc[j] += av * static_cast<double>(brow[j]);
        }
        T* drow = dst.data() + l * n;
        for (std::size_t j = 0; j < n; ++j) {
            drow[j] = static_cast<T>(static_cast<double>(drow[j]) + acc[j]);
        }
    }
}

template <typename T>
void add_into(TensorT<T>& dst, const TensorT<T>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace detail

// Leaf holding data that receives no gradient (inputs, frozen embeddings).
template <typename T>
NodePtr<T> constant(TensorT<T> value) {
    auto n = std::make_shared<NodeT<T>>();
    n->value = std::move(value);
    return n;
}

// Leaf holding trainable data.
template <typename T>
NodePtr<T> param(TensorT<T> value) {
    auto n = std::make_shared<NodeT<T>>();
    n->value = std::move(value);
    n->requires_grad = true;
    return n;
}

template <typename T>
NodePtr<T> matmul(const NodePtr<T>& a, const NodePtr<T>& b) {
    if (a->value.rank() != 2 || b->value.rank() != 2 || a->value.cols() != b->value.rows()) {
        throw DimensionError("matmul: incompatible shapes " + a->value.shape_str() + " and " +
                             b->value.shape_str());
    }
    return detail::make_node<T>(detail::mm_nn(a->value, b->value), {a, b}, [](NodeT<T>& n) {
        NodeT<T>& a = *n.parents[0];
        NodeT<T>& b = *n.parents[1];
        if (a.requires_grad) {
            detail::ensure_grad(a);
            detail::add_mm_nt(a.grad, n.grad, b.value);  // g . b^T
        }
        if (b.requires_grad) {
            detail::ensure_grad(b);
            detail::add_mm_tn(b.grad, a.value, n.grad);  // a^T . g
        }
    });
}

template <typename T>
NodePtr<T> add(const NodePtr<T>& a, const NodePtr<T>& b) {
    detail::require_same_shape(a->value, b->value, "add");
    TensorT<T> out = a->value;
    detail::add_into(out, b->value);
    return detail::make_node<T>(std::move(out), {a, b}, [](NodeT<T>& n) {
        for (int i = 0; i < 2; ++i) {
            NodeT<T>& p = *n.parents[i];
            if (!p.requires_grad) continue;
            detail::ensure_grad(p);
            detail::add_into(p.grad, n.grad);
        }
    });
}

template <typename T>
NodePtr<T> mul(const NodePtr<T>& a, const NodePtr<T>& b) {
    detail::require_same_shape(a->value, b->value, "mul");
    TensorT<T> out(a->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * b->value[i];
    return detail::make_node<T>(std::move(out), {a, b}, [](NodeT<T>& n) {
        NodeT<T>& a = *n.parents[0];
        NodeT<T>& b = *n.parents[1];
        if (a.requires_grad) {
            detail::ensure_grad(a);
            for (std::size_t i = 0; i < n.grad.size(); ++i) a.grad[i] += n.grad[i] * b.value[i];
        }
        if (b.requires_grad) {
            detail::ensure_grad(b);
            for (std::size_t i = 0; i < n.grad.size(); ++i) b.grad[i] += n.grad[i] * a.value[i];
        }
    });
}

template <typename T>
NodePtr<T> scale(const NodePtr<T>& a, T c) {
    TensorT<T> out(a->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * c;
    return detail::make_node<T>(std::move(out), {a}, [c](NodeT<T>& n) {
        NodeT<T>& a = *n.parents[0];
        detail::ensure_grad(a);
        for (std::size_t i = 0; i < n.grad.size(); ++i) a.grad[i] += n.grad[i] * c;
    });
}

template <typename T>
NodePtr<T> tanh(const NodePtr<T>& a) {
    TensorT<T> out(a->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<T>(std::tanh(static_cast<double>(a->value[i])));
    }
    return detail::make_node<T>(std::move(out), {a}, [](NodeT<T>& n) {
        NodeT<T>& a = *n.parents[0];
        detail::ensure_grad(a);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            a.grad[i] += n.grad[i] * (T(1) - n.value[i] * n.value[i]);
        }
    });
}

template <typename T>
NodePtr<T> sigmoid(const NodePtr<T>& a) {
    TensorT<T> out(a->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = static_cast<double>(a->value[i]);
        // branch keeps exp() argument non-positive
        const double y = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        out[i] = static_cast<T>(y);
    }
    return detail::make_node<T>(std::move(out), {a}, [](NodeT<T>& n) {
        NodeT<T>& a = *n.parents[0];
        detail::ensure_grad(a);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            a.grad[i] += n.grad[i] * n.value[i] * (T(1) - n.value[i]);
        }
    });
}

// Row-wise softmax with max-shift; a rank-1 input is one row. Outputs of each
// row are nonnegative and sum to 1 (within float rounding).
template <typename T>
NodePtr<T> softmax(const NodePtr<T>& a) {
    const std::size_t rank = a->value.rank();
    if (rank != 1 && rank != 2) {
        throw DimensionError("softmax: need rank-1 or rank-2, got " + a->value.shape_str());
    }
    const std::size_t rows = rank == 1 ? 1 : a->value.shape()[0];
    const std::size_t cols = rank == 1 ? a->value.size() : a->value.shape()[1];

    TensorT<T> out(a->value.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* x = a->value.data() + r * cols;
        T* y = out.data() + r * cols;
        double mx = static_cast<double>(x[0]);
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, static_cast<double>(x[j]));
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) sum += std::exp(static_cast<double>(x[j]) - mx);
        for (std::size_t j = 0; j < cols; ++j) {
            y[j] = static_cast<T>(std::exp(static_cast<double>(x[j]) - mx) / sum);
        }
    }
    return detail::make_node<T>(std::move(out), {a}, [rows, cols](NodeT<T>& n) {
        NodeT<T>& a = *n.parents[0];
        detail::ensure_grad(a);
        for (std::size_t r = 0; r < rows; ++r) {
            const T* y = n.value.data() + r * cols;
            const T* g = n.grad.data() + r * cols;
            T* gx = a.grad.data() + r * cols;
            double dot = 0.0;
            for (std::size_t j = 0; j < cols; ++j) {
                dot += static_cast<double>(g[j]) * static_cast<double>(y[j]);
            }
            for (std::size_t j = 0; j < cols; ++j) {
                gx[j] += static_cast<T>(static_cast<double>(y[j]) *
                                        (static_cast<double>(g[j]) - dot));
            }
        }
    });
}

inline constexpr double kLogClamp = 1e-12;

// -log p[target], log clamped below kLogClamp. p must be a probability vector.
template <typename T>
NodePtr<T> cross_entropy(const NodePtr<T>& p, std::size_t target) {
    if (p->value.rank() > 2 || (p->value.rank() == 2 && p->value.rows() != 1)) {
        throw DimensionError("cross_entropy: need a probability vector, got " +
                             p->value.shape_str());
    }
    const std::size_t n = p->value.size();
    if (target >= n) {
        throw DataError("cross_entropy: target " + std::to_string(target) + " out of range for " +
                        std::to_string(n) + " classes");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += static_cast<double>(p->value[i]);
    if (std::abs(sum - 1.0) > 1e-5) {
        throw DataError("cross_entropy: input does not sum to 1 (sum = " + std::to_string(sum) +
                        ")");
    }
    const double pt = static_cast<double>(p->value[target]);
    TensorT<T> out = TensorT<T>::scalar(static_cast<T>(-std::log(std::max(pt, kLogClamp))));
    return detail::make_node<T>(std::move(out), {p}, [target, pt](NodeT<T>& n) {
        NodeT<T>& p = *n.parents[0];
        detail::ensure_grad(p);
        if (pt >= kLogClamp) {
            p.grad[target] += static_cast<T>(-static_cast<double>(n.grad[0]) / pt);
        }  // clamped region has zero slope
    });
}

// Inverted dropout: scales survivors by 1/(1-rate) at training time so
// inference is the plain forward pass. Identity (same node) when inactive.
template <typename T>
NodePtr<T> dropout(const NodePtr<T>& a, double rate, SplitMix64& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0, 1)");
    if (!training || rate == 0.0) return a;

    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    auto mask = std::make_shared<std::vector<T>>(a->value.size());
    TensorT<T> out(a->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const T m = rng.bernoulli(rate) ? T(0) : keep_scale;
        (*mask)[i] = m;
        out[i] = a->value[i] * m;
    }
    return detail::make_node<T>(std::move(out), {a}, [mask](NodeT<T>& n) {
        NodeT<T>& a = *n.parents[0];
        detail::ensure_grad(a);
        for (std::size_t i = 0; i < n.grad.size(); ++i) a.grad[i] += n.grad[i] * (*mask)[i];
    });
}

template <typename T>
NodePtr<T> transpose(const NodePtr<T>& a) {
    const std::size_t m = a->value.rows(), n = a->value.cols();
    TensorT<T> out({n, m});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a->value.at(i, j);
    }
    return detail::make_node<T>(std::move(out), {a}, [m, n](NodeT<T>& node) {
        NodeT<T>& a = *node.parents[0];
        detail::ensure_grad(a);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) a.grad.at(i, j) += node.grad.at(j, i);
        }
    });
}

template <typename T>
NodePtr<T> reshape(const NodePtr<T>& a, std::vector<std::size_t> shape) {
    TensorT<T> out(std::move(shape), a->value.values());
    return detail::make_node<T>(std::move(out), {a}, [](NodeT<T>& n) {
        NodeT<T>& a = *n.parents[0];
        detail::ensure_grad(a);
        detail::add_into(a.grad, n.grad);  // same element order
    });
}

template <typename T>
NodePtr<T> concat_cols(const NodePtr<T>& a, const NodePtr<T>& b) {
    const std::size_t m = a->value.rows(), na = a->value.cols(), nb = b->value.cols();
    if (b->value.rows() != m) {
        throw DimensionError("concat_cols: row mismatch " + a->value.shape_str() + " vs " +
                             b->value.shape_str());
    }
    TensorT<T> out({m, na + nb});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < na; ++j) out.at(i, j) = a->value.at(i, j);
        for (std::size_t j = 0; j < nb; ++j) out.at(i, na + j) = b->value.at(i, j);
    }
    return detail::make_node<T>(std::move(out), {a, b}, [m, na, nb](NodeT<T>& n) {
        NodeT<T>& a = *n.parents[0];
        NodeT<T>& b = *n.parents[1];
        if (a.requires_grad) {
            detail::ensure_grad(a);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < na; ++j) a.grad.at(i, j) += n.grad.at(i, j);
            }
        }
        if (b.requires_grad) {
            detail::ensure_grad(b);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < nb; ++j) b.grad.at(i, j) += n.grad.at(i, na + j);
            }
        }
    });
}

// Stacks rank-2 blocks with equal column counts on top of each other.
template <typename T>
NodePtr<T> concat_rows(const std::vector<NodePtr<T>>& blocks) {
    if (blocks.empty()) throw DimensionError("concat_rows: no inputs");
    const std::size_t cols = blocks[0]->value.cols();
    std::size_t rows = 0;
    for (const auto& b : blocks) {
        if (b->value.cols() != cols) {
            throw DimensionError("concat_rows: column mismatch " + b->value.shape_str());
        }
        rows += b->value.rows();
    }
    TensorT<T> out({rows, cols});
    std::size_t r = 0;
    for (const auto& b : blocks) {
        std::copy(b->value.data(), b->value.data() + b->value.size(), out.data() + r * cols);
        r += b->value.rows();
    }
    return detail::make_node<T>(std::move(out), blocks, [cols](NodeT<T>& n) {
        std::size_t r = 0;
        for (const auto& bp : n.parents) {
            NodeT<T>& b = *bp;
            const std::size_t sz = b.value.size();
            if (b.requires_grad) {
                detail::ensure_grad(b);
                const T* g = n.grad.data() + r * cols;
                for (std::size_t i = 0; i < sz; ++i) b.grad[i] += g[i];
            }
            r += b.value.rows();
        }
    });
}

template <typename T>
NodePtr<T> slice_cols(const NodePtr<T>& a, std::size_t start, std::size_t len) {
    const std::size_t m = a->value.rows(), n = a->value.cols();
    if (start + len > n || len == 0) {
        throw DimensionError("slice_cols: range [" + std::to_string(start) + ", " +
                             std::to_string(start + len) + ") out of " + a->value.shape_str());
    }
    TensorT<T> out({m, len});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < len; ++j) out.at(i, j) = a->value.at(i, start + j);
    }
    return detail::make_node<T>(std::move(out), {a}, [m, len, start](NodeT<T>& node) {
        NodeT<T>& a = *node.parents[0];
        detail::ensure_grad(a);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < len; ++j) a.grad.at(i, start + j) += node.grad.at(i, j);
        }
    });
}

template <typename T>
NodePtr<T> sum(const NodePtr<T>& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a->value.size(); ++i) acc += static_cast<double>(a->value[i]);
    return detail::make_node<T>(TensorT<T>::scalar(static_cast<T>(acc)), {a}, [](NodeT<T>& n) {
        NodeT<T>& a = *n.parents[0];
        detail::ensure_grad(a);
        for (std::size_t i = 0; i < a.grad.size(); ++i) a.grad[i] += n.grad[0];
    });
}

// Reverse-topological sweep from a scalar loss. Gradients land on every
// reachable requires_grad leaf; shared nodes accumulate.
template <typename T>
void backward(const NodePtr<T>& loss) {
    if (loss->value.size() != 1) {
        throw DimensionError("backward: loss must be scalar, got " + loss->value.shape_str());
    }
    if (!loss->requires_grad) return;  // nothing trainable below

    std::vector<NodeT<T>*> order;
    std::unordered_set<NodeT<T>*> seen;
    struct Frame {
        NodeT<T>* n;
        std::size_t next;
    };
    std::vector<Frame> stack;
    stack.push_back({loss.get(), 0});
    seen.insert(loss.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.n->parents.size()) {
            NodeT<T>* p = f.n->parents[f.next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.n);
            stack.pop_back();
        }
    }

    detail::ensure_grad(*loss);
    loss->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodeT<T>& n = **it;
        if (n.push_grad && !n.grad.empty()) n.push_grad(n);
    }
}

}  // namespace convrank::ag
