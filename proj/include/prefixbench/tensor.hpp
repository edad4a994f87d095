#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "prefixbench/errors.hpp"

namespace pbench {

// Dense 64-bit float tensors (rank 1 or 2) recorded on a Tape for
// reverse-mode differentiation. The tape is rebuilt per forward pass;
// tensors are lightweight handles into it.

namespace detail {

inline std::size_t shape_size(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

struct Node {
    std::vector<int> shape;
    std::vector<double> store;     // owned values; empty when viewing external memory
    const double* vptr = nullptr;  // points at store or at external read-only data
    std::size_t size = 0;
    std::vector<double> grad;      // allocated lazily during backward
    bool requires_grad = false;
    std::function<void(Node&)> backprop;  // scatters this node's grad into parents

    const double* v() const { return vptr; }
    double* g() {
        if (grad.empty()) grad.assign(size, 0.0);
        return grad.data();
    }
    bool touched() const { return !grad.empty(); }
};

}  // namespace detail

class Tape;

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(detail::Node* n) : n_(n) {}

    bool valid() const { return n_ != nullptr; }
    const std::vector<int>& shape() const { return n_->shape; }
    std::size_t size() const { return n_->size; }
    int rows() const { return n_->shape.size() == 2 ? n_->shape[0] : 1; }
    int cols() const { return n_->shape.back(); }
    bool requires_grad() const { return n_->requires_grad; }

    const double* data() const { return n_->v(); }
    double operator[](std::size_t i) const { return n_->v()[i]; }
    double at(int r, int c) const { return n_->v()[static_cast<std::size_t>(r) * cols() + c]; }
    double scalar() const {
        if (size() != 1) throw ContractError("scalar() on tensor of shape " + detail::shape_str(shape()));
        return n_->v()[0];
    }
    std::vector<double> values() const { return {n_->v(), n_->v() + size()}; }

    // gradient after Tape::backward; zeros if the node was never touched
    std::vector<double> grad() const {
        if (!n_->touched()) return std::vector<double>(size(), 0.0);
        return n_->grad;
    }

    detail::Node* node() const { return n_; }

private:
    detail::Node* n_ = nullptr;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::size_t node_count() const { return nodes_.size(); }

    // ---- leaves -----------------------------------------------------------

    // Leaf viewing external read-only memory (weights). No copy. Tracked
    // leaves can be enumerated afterwards to collect parameter gradients.
    Tensor leaf_view(std::vector<int> shape, const double* data, bool requires_grad) {
        detail::Node* n = new_node(std::move(shape), requires_grad);
        n->vptr = data;
        if (requires_grad) external_leaves_.push_back(n);
        return Tensor(n);
    }

    // Gradient-tracked leaf_view nodes, keyed by the external data pointer.
    const std::vector<detail::Node*>& external_leaves() const { return external_leaves_; }

    Tensor leaf(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
        const std::size_t sz = detail::shape_size(shape);
        if (data.size() != sz)
            throw ShapeError("leaf data length " + std::to_string(data.size()) + " != shape " +
                             detail::shape_str(shape));
        detail::Node* n = new_node(std::move(shape), requires_grad);
        n->store = std::move(data);
        n->vptr = n->store.data();
        return Tensor(n);
    }

    Tensor constant(std::vector<int> shape, std::vector<double> data) {
        return leaf(std::move(shape), std::move(data), false);
    }

    Tensor scalar_const(double v) { return constant({1}, {v}); }

    // ---- elementwise ------------------------------------------------------

    Tensor add(Tensor a, Tensor b) {
        require_same_shape("add", a, b);
        detail::Node* n = alloc_like(a);
        const double *pa = a.data(), *pb = b.data();
        double* out = n->store.data();
        for (std::size_t i = 0; i < n->size; ++i) out[i] = pa[i] + pb[i];
        set_grad(n, {a, b}, [na = a.node(), nb = b.node()](detail::Node& self) {
            const double* g = self.grad.data();
            if (na->requires_grad) {
                double* ga = na->g();
                for (std::size_t i = 0; i < self.size; ++i) ga[i] += g[i];
            }
            if (nb->requires_grad) {
                double* gb = nb->g();
                for (std::size_t i = 0; i < self.size; ++i) gb[i] += g[i];
            }
        });
        return Tensor(n);
    }

    Tensor sub(Tensor a, Tensor b) {
        require_same_shape("sub", a, b);
        detail::Node* n = alloc_like(a);
        const double *pa = a.data(), *pb = b.data();
        double* out = n->store.data();
        for (std::size_t i = 0; i < n->size; ++i) out[i] = pa[i] - pb[i];
        set_grad(n, {a, b}, [na = a.node(), nb = b.node()](detail::Node& self) {
            const double* g = self.grad.data();
            if (na->requires_grad) {
                double* ga = na->g();
                for (std::size_t i = 0; i < self.size; ++i) ga[i] += g[i];
            }
            if (nb->requires_grad) {
                double* gb = nb->g();
                for (std::size_t i = 0; i < self.size; ++i) gb[i] -= g[i];
            }
        });
        return Tensor(n);
    }

    Tensor mul(Tensor a, Tensor b) {
        require_same_shape("mul", a, b);
        detail::Node* n = alloc_like(a);
        const double *pa = a.data(), *pb = b.data();
        double* out = n->store.data();
        for (std::size_t i = 0; i < n->size; ++i) out[i] = pa[i] * pb[i];
        set_grad(n, {a, b}, [na = a.node(), nb = b.node()](detail::Node& self) {
            const double* g = self.grad.data();
            if (na->requires_grad) {
                double* ga = na->g();
                const double* vb = nb->v();
                for (std::size_t i = 0; i < self.size; ++i) ga[i] += g[i] * vb[i];
            }
            if (nb->requires_grad) {
                double* gb = nb->g();
                const double* va = na->v();
                for (std::size_t i = 0; i < self.size; ++i) gb[i] += g[i] * va[i];
            }
        });
        return Tensor(n);
    }

    Tensor scale(Tensor a, double s) {
        detail::Node* n = alloc_like(a);
        const double* pa = a.data();
        double* out = n->store.data();
        for (std::size_t i = 0; i < n->size; ++i) out[i] = pa[i] * s;
        set_grad(n, {a}, [na = a.node(), s](detail::Node& self) {
            if (!na->requires_grad) return;
            double* ga = na->g();
            const double* g = self.grad.data();
            for (std::size_t i = 0; i < self.size; ++i) ga[i] += g[i] * s;
        });
        return Tensor(n);
    }

    Tensor relu(Tensor a) {
        detail::Node* n = alloc_like(a);
        const double* pa = a.data();
        double* out = n->store.data();
        for (std::size_t i = 0; i < n->size; ++i) out[i] = pa[i] > 0.0 ? pa[i] : 0.0;
        set_grad(n, {a}, [na = a.node()](detail::Node& self) {
            if (!na->requires_grad) return;
            double* ga = na->g();
            const double* g = self.grad.data();
            const double* va = na->v();
            for (std::size_t i = 0; i < self.size; ++i)
                if (va[i] > 0.0) ga[i] += g[i];
        });
        return Tensor(n);
    }

    // a: [m,n], row: [n]; broadcast-add over rows
    Tensor add_rowvec(Tensor a, Tensor row) {
        if (a.cols() != row.cols() || row.size() != static_cast<std::size_t>(row.cols()))
            throw ShapeError("add_rowvec " + detail::shape_str(a.shape()) + " vs " +
                             detail::shape_str(row.shape()));
        detail::Node* n = alloc_like(a);
        const int m = a.rows(), c = a.cols();
        const double *pa = a.data(), *pr = row.data();
        double* out = n->store.data();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < c; ++j) out[i * c + j] = pa[i * c + j] + pr[j];
        set_grad(n, {a, row}, [na = a.node(), nr = row.node(), m, c](detail::Node& self) {
            const double* g = self.grad.data();
            if (na->requires_grad) {
                double* ga = na->g();
                for (std::size_t i = 0; i < self.size; ++i) ga[i] += g[i];
            }
            if (nr->requires_grad) {
                double* gr = nr->g();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < c; ++j) gr[j] += g[i * c + j];
            }
        });
        return Tensor(n);
    }

    // ---- matrix products --------------------------------------------------

    // [m,k] x [k,n] -> [m,n]
    Tensor matmul(Tensor a, Tensor b) {
        require_2d("matmul", a);
        require_2d("matmul", b);
        if (a.cols() != b.rows())
            throw ShapeError("matmul inner dimensions disagree: " + detail::shape_str(a.shape()) +
                             " x " + detail::shape_str(b.shape()));
        const int m = a.rows(), k = a.cols(), nn = b.cols();
        detail::Node* n = new_node({m, nn}, a.requires_grad() || b.requires_grad());
        n->store.assign(n->size, 0.0);
        n->vptr = n->store.data();
        mm(a.data(), b.data(), n->store.data(), m, k, nn);
        set_grad(n, {a, b}, [na = a.node(), nb = b.node(), m, k, nn](detail::Node& self) {
            const double* g = self.grad.data();
            if (na->requires_grad) mm_nt_acc(g, nb->v(), na->g(), m, nn, k);        // dA += G B^T
            if (nb->requires_grad) mm_tn_acc(na->v(), g, nb->g(), k, m, nn);        // dB += A^T G
        });
        return Tensor(n);
    }

    // [m,k] x [n,k]^T -> [m,n]
    Tensor matmul_nt(Tensor a, Tensor b) {
        require_2d("matmul_nt", a);
        require_2d("matmul_nt", b);
        if (a.cols() != b.cols())
            throw ShapeError("matmul_nt inner dimensions disagree: " + detail::shape_str(a.shape()) +
                             " x " + detail::shape_str(b.shape()) + "^T");
        const int m = a.rows(), k = a.cols(), nn = b.rows();
        detail::Node* n = new_node({m, nn}, a.requires_grad() || b.requires_grad());
        n->store.assign(n->size, 0.0);
        n->vptr = n->store.data();
        // C[i][j] = sum_k A[i][k] B[j][k]
        const double *pa = a.data(), *pb = b.data();
        double* out = n->store.data();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < nn; ++j) {
                double acc = 0.0;
                const double *ra = pa + i * k, *rb = pb + j * k;
                for (int t = 0; t < k; ++t) acc += ra[t] * rb[t];
                out[i * nn + j] = acc;
            }
        set_grad(n, {a, b}, [na = a.node(), nb = b.node(), m, k, nn](detail::Node& self) {
            const double* g = self.grad.data();
            if (na->requires_grad) mm_acc(g, nb->v(), na->g(), m, nn, k);     // dA += G B
            if (nb->requires_grad) mm_tn_acc(g, na->v(), nb->g(), nn, m, k);  // dB += G^T A
        });
        return Tensor(n);
    }

    // ---- softmax family ----------------------------------------------------

    // axis 1 (or the only axis of a 1-d tensor): per row; axis 0: per column
    Tensor softmax(Tensor a, int axis) {
        check_softmax_axis(a, axis);
        detail::Node* n = alloc_like(a);
        const int m = a.rows(), c = a.cols();
        const bool by_row = (a.shape().size() == 1) || axis == 1;
        const double* pa = a.data();
        double* out = n->store.data();
        const int outer = by_row ? m : c;
        const int inner = by_row ? c : m;
        const int ostride = by_row ? c : 1;
        const int istride = by_row ? 1 : c;
        for (int i = 0; i < outer; ++i) {
            const double* x = pa + i * ostride;
            double* y = out + i * ostride;
            double mx = x[0];
            for (int j = 1; j < inner; ++j) mx = std::max(mx, x[j * istride]);
            double z = 0.0;
            for (int j = 0; j < inner; ++j) z += std::exp(x[j * istride] - mx);
            for (int j = 0; j < inner; ++j) y[j * istride] = std::exp(x[j * istride] - mx) / z;
        }
        set_grad(n, {a}, [na = a.node(), outer, inner, ostride, istride](detail::Node& self) {
            if (!na->requires_grad) return;
            double* ga = na->g();
            const double* g = self.grad.data();
            const double* y = self.v();
            for (int i = 0; i < outer; ++i) {
                double dotv = 0.0;
                for (int j = 0; j < inner; ++j) {
                    const std::size_t idx = i * ostride + j * istride;
                    dotv += g[idx] * y[idx];
                }
                for (int j = 0; j < inner; ++j) {
                    const std::size_t idx = i * ostride + j * istride;
                    ga[idx] += y[idx] * (g[idx] - dotv);
                }
            }
        });
        return Tensor(n);
    }

    Tensor log_softmax_rows(Tensor a) {
        detail::Node* n = alloc_like(a);
        const int m = a.rows(), c = a.cols();
        const double* pa = a.data();
        double* out = n->store.data();
        for (int i = 0; i < m; ++i) {
            const double* x = pa + i * c;
            double* y = out + i * c;
            double mx = x[0];
            for (int j = 1; j < c; ++j) mx = std::max(mx, x[j]);
            double z = 0.0;
            for (int j = 0; j < c; ++j) z += std::exp(x[j] - mx);
            const double lz = mx + std::log(z);
            for (int j = 0; j < c; ++j) y[j] = x[j] - lz;
        }
        set_grad(n, {a}, [na = a.node(), m, c](detail::Node& self) {
            if (!na->requires_grad) return;
            double* ga = na->g();
            const double* g = self.grad.data();
            const double* y = self.v();
            for (int i = 0; i < m; ++i) {
                double gs = 0.0;
                for (int j = 0; j < c; ++j) gs += g[i * c + j];
                for (int j = 0; j < c; ++j) ga[i * c + j] += g[i * c + j] - std::exp(y[i * c + j]) * gs;
            }
        });
        return Tensor(n);
    }

    // per-row layer norm with affine gain/bias, eps inside the sqrt
    Tensor layer_norm_rows(Tensor a, Tensor gain, Tensor bias, double eps = 1e-5) {
        const int m = a.rows(), c = a.cols();
        if (gain.size() != static_cast<std::size_t>(c) || bias.size() != static_cast<std::size_t>(c))
            throw ShapeError("layer_norm_rows gain/bias length mismatch vs " +
                             detail::shape_str(a.shape()));
        detail::Node* n = alloc_like(a);
        const double *pa = a.data(), *pg = gain.data(), *pb = bias.data();
        double* out = n->store.data();
        // cache xhat and inv sigma per row for backward
        auto cache = std::make_shared<std::vector<double>>(static_cast<std::size_t>(m) * c + m);
        double* xhat = cache->data();
        double* isig = cache->data() + static_cast<std::size_t>(m) * c;
        for (int i = 0; i < m; ++i) {
            const double* x = pa + i * c;
            double mu = 0.0;
            for (int j = 0; j < c; ++j) mu += x[j];
            mu /= c;
            double var = 0.0;
            for (int j = 0; j < c; ++j) var += (x[j] - mu) * (x[j] - mu);
            var /= c;
            const double is = 1.0 / std::sqrt(var + eps);
            isig[i] = is;
            for (int j = 0; j < c; ++j) {
                xhat[i * c + j] = (x[j] - mu) * is;
                out[i * c + j] = pg[j] * xhat[i * c + j] + pb[j];
            }
        }
        set_grad(n, {a, gain, bias},
                 [na = a.node(), ng = gain.node(), nb = bias.node(), m, c, cache](detail::Node& self) {
                     const double* g = self.grad.data();
                     const double* xhat = cache->data();
                     const double* isig = cache->data() + static_cast<std::size_t>(m) * c;
                     if (ng->requires_grad) {
                         double* gg = ng->g();
                         for (int i = 0; i < m; ++i)
                             for (int j = 0; j < c; ++j) gg[j] += g[i * c + j] * xhat[i * c + j];
                     }
                     if (nb->requires_grad) {
                         double* gb = nb->g();
                         for (int i = 0; i < m; ++i)
                             for (int j = 0; j < c; ++j) gb[j] += g[i * c + j];
                     }
                     if (na->requires_grad) {
                         double* ga = na->g();
                         const double* pg = ng->v();
                         for (int i = 0; i < m; ++i) {
                             double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                             for (int j = 0; j < c; ++j) {
                                 const double dxh = g[i * c + j] * pg[j];
                                 mean_dxh += dxh;
                                 mean_dxh_xh += dxh * xhat[i * c + j];
                             }
                             mean_dxh /= c;
                             mean_dxh_xh /= c;
                             for (int j = 0; j < c; ++j) {
                                 const double dxh = g[i * c + j] * pg[j];
                                 ga[i * c + j] +=
                                     isig[i] * (dxh - mean_dxh - xhat[i * c + j] * mean_dxh_xh);
                             }
                         }
                     }
                 });
        return Tensor(n);
    }

    // ---- slicing / assembly -------------------------------------------------

    Tensor slice_rows(Tensor a, int start, int len) {
        require_2d("slice_rows", a);
        if (start < 0 || len < 1 || start + len > a.rows())
            throw ShapeError("slice_rows out of range on " + detail::shape_str(a.shape()));
        const int c = a.cols();
        detail::Node* n = new_node({len, c}, a.requires_grad());
        n->store.assign(a.data() + static_cast<std::size_t>(start) * c,
                        a.data() + static_cast<std::size_t>(start + len) * c);
        n->vptr = n->store.data();
        set_grad(n, {a}, [na = a.node(), start, c](detail::Node& self) {
            if (!na->requires_grad) return;
            double* ga = na->g() + static_cast<std::size_t>(start) * c;
            const double* g = self.grad.data();
            for (std::size_t i = 0; i < self.size; ++i) ga[i] += g[i];
        });
        return Tensor(n);
    }

    Tensor slice_cols(Tensor a, int start, int len) {
        require_2d("slice_cols", a);
        if (start < 0 || len < 1 || start + len > a.cols())
            throw ShapeError("slice_cols out of range on " + detail::shape_str(a.shape()));
        const int m = a.rows(), c = a.cols();
        detail::Node* n = new_node({m, len}, a.requires_grad());
        n->store.resize(n->size);
        n->vptr = n->store.data();
        const double* pa = a.data();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < len; ++j) n->store[i * len + j] = pa[i * c + start + j];
        set_grad(n, {a}, [na = a.node(), start, len, m, c](detail::Node& self) {
            if (!na->requires_grad) return;
            double* ga = na->g();
            const double* g = self.grad.data();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < len; ++j) ga[i * c + start + j] += g[i * len + j];
        });
        return Tensor(n);
    }

    Tensor concat_rows(const std::vector<Tensor>& parts) {
        if (parts.empty()) throw ContractError("concat_rows on empty list");
        const int c = parts[0].cols();
        int m = 0;
        bool rg = false;
        for (const Tensor& p : parts) {
            if (p.cols() != c) throw ShapeError("concat_rows column mismatch");
            m += p.rows();
            rg = rg || p.requires_grad();
        }
        detail::Node* n = new_node({m, c}, rg);
        n->store.resize(n->size);
        n->vptr = n->store.data();
        std::size_t off = 0;
        for (const Tensor& p : parts) {
            std::copy(p.data(), p.data() + p.size(), n->store.begin() + off);
            off += p.size();
        }
        std::vector<detail::Node*> pn;
        pn.reserve(parts.size());
        for (const Tensor& p : parts) pn.push_back(p.node());
        set_grad(n, parts, [pn](detail::Node& self) {
            const double* g = self.grad.data();
            std::size_t off = 0;
            for (detail::Node* p : pn) {
                if (p->requires_grad) {
                    double* gp = p->g();
                    for (std::size_t i = 0; i < p->size; ++i) gp[i] += g[off + i];
                }
                off += p->size;
            }
        });
        return Tensor(n);
    }

    Tensor concat_cols(const std::vector<Tensor>& parts) {
        if (parts.empty()) throw ContractError("concat_cols on empty list");
        const int m = parts[0].rows();
        int c = 0;
        bool rg = false;
        for (const Tensor& p : parts) {
            if (p.rows() != m) throw ShapeError("concat_cols row mismatch");
            c += p.cols();
            rg = rg || p.requires_grad();
        }
        detail::Node* n = new_node({m, c}, rg);
        n->store.resize(n->size);
        n->vptr = n->store.data();
        int coff = 0;
        for (const Tensor& p : parts) {
            const int pc = p.cols();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < pc; ++j) n->store[i * c + coff + j] = p.at(i, j);
            coff += pc;
        }
        std::vector<detail::Node*> pn;
        std::vector<int> widths;
        for (const Tensor& p : parts) {
            pn.push_back(p.node());
            widths.push_back(p.cols());
        }
        set_grad(n, parts, [pn, widths, m, c](detail::Node& self) {
            const double* g = self.grad.data();
            int coff = 0;
            for (std::size_t k = 0; k < pn.size(); ++k) {
                const int pc = widths[k];
                if (pn[k]->requires_grad) {
                    double* gp = pn[k]->g();
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < pc; ++j) gp[i * pc + j] += g[i * c + coff + j];
                }
                coff += pc;
            }
        });
        return Tensor(n);
    }

    // gather rows of a [v,c] table by index; grad scatter-adds into the table
    Tensor gather_rows(Tensor table, const std::vector<int>& idx) {
        require_2d("gather_rows", table);
        const int c = table.cols(), v = table.rows();
        for (int i : idx)
            if (i < 0 || i >= v) throw ContractError("gather_rows index out of range");
        detail::Node* n = new_node({static_cast<int>(idx.size()), c}, table.requires_grad());
        n->store.resize(n->size);
        n->vptr = n->store.data();
        const double* pt = table.data();
        for (std::size_t r = 0; r < idx.size(); ++r)
            std::copy(pt + static_cast<std::size_t>(idx[r]) * c,
                      pt + static_cast<std::size_t>(idx[r] + 1) * c, n->store.begin() + r * c);
        set_grad(n, {table}, [nt = table.node(), idx, c](detail::Node& self) {
            if (!nt->requires_grad) return;
            double* gt = nt->g();
            const double* g = self.grad.data();
            for (std::size_t r = 0; r < idx.size(); ++r)
                for (int j = 0; j < c; ++j) gt[static_cast<std::size_t>(idx[r]) * c + j] += g[r * c + j];
        });
        return Tensor(n);
    }

    // mean over rows: [m,c] -> [1,c]
    Tensor mean_rows(Tensor a) {
        require_2d("mean_rows", a);
        const int m = a.rows(), c = a.cols();
        detail::Node* n = new_node({1, c}, a.requires_grad());
        n->store.assign(static_cast<std::size_t>(c), 0.0);
        n->vptr = n->store.data();
        const double* pa = a.data();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < c; ++j) n->store[j] += pa[i * c + j];
        for (int j = 0; j < c; ++j) n->store[j] /= m;
        set_grad(n, {a}, [na = a.node(), m, c](detail::Node& self) {
            if (!na->requires_grad) return;
            double* ga = na->g();
            const double* g = self.grad.data();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < c; ++j) ga[i * c + j] += g[j] / m;
        });
        return Tensor(n);
    }

    // ---- reductions ---------------------------------------------------------

    Tensor sum(Tensor a) {
        detail::Node* n = new_node({1}, a.requires_grad());
        double acc = 0.0;
        const double* pa = a.data();
        for (std::size_t i = 0; i < a.size(); ++i) acc += pa[i];
        n->store = {acc};
        n->vptr = n->store.data();
        set_grad(n, {a}, [na = a.node()](detail::Node& self) {
            if (!na->requires_grad) return;
            double* ga = na->g();
            const double g = self.grad[0];
            for (std::size_t i = 0; i < na->size; ++i) ga[i] += g;
        });
        return Tensor(n);
    }

    Tensor mean_all(Tensor a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

    Tensor dot(Tensor a, Tensor b) {
        if (a.size() != b.size())
            throw ShapeError("dot size mismatch " + detail::shape_str(a.shape()) + " vs " +
                             detail::shape_str(b.shape()));
        detail::Node* n = new_node({1}, a.requires_grad() || b.requires_grad());
        double acc = 0.0;
        const double *pa = a.data(), *pb = b.data();
        for (std::size_t i = 0; i < a.size(); ++i) acc += pa[i] * pb[i];
        n->store = {acc};
        n->vptr = n->store.data();
        set_grad(n, {a, b}, [na = a.node(), nb = b.node()](detail::Node& self) {
            const double g = self.grad[0];
            if (na->requires_grad) {
                double* ga = na->g();
                const double* vb = nb->v();
                for (std::size_t i = 0; i < na->size; ++i) ga[i] += g * vb[i];
            }
            if (nb->requires_grad) {
                double* gb = nb->g();
                const double* va = na->v();
                for (std::size_t i = 0; i < nb->size; ++i) gb[i] += g * va[i];
            }
        });
        return Tensor(n);
    }

    // dot(a,b) / (|a| |b|); zero-norm input is a hard error (dead feature tap)
    Tensor cosine_similarity(Tensor a, Tensor b) {
        if (a.size() != b.size())
            throw ShapeError("cosine_similarity size mismatch " + detail::shape_str(a.shape()) +
                             " vs " + detail::shape_str(b.shape()));
        const double *pa = a.data(), *pb = b.data();
        double s = 0.0, qa = 0.0, qb = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            s += pa[i] * pb[i];
            qa += pa[i] * pa[i];
            qb += pb[i] * pb[i];
        }
        if (qa == 0.0 || qb == 0.0)
            throw DegenerateInputError("cosine_similarity on zero-norm input");
        // sqrt(qa*qb) rather than sqrt(qa)*sqrt(qb): exact when qa == qb, so
        // cosine of a vector with an identical copy is exactly 1.0
        const double denom = std::sqrt(qa * qb);
        const double na_ = std::sqrt(qa), nb_ = std::sqrt(qb);
        const double c = s / denom;
        detail::Node* n = new_node({1}, a.requires_grad() || b.requires_grad());
        n->store = {c};
        n->vptr = n->store.data();
        set_grad(n, {a, b}, [xa = a.node(), xb = b.node(), na_, nb_, c](detail::Node& self) {
            const double g = self.grad[0];
            const double *va = xa->v(), *vb = xb->v();
            if (xa->requires_grad) {
                double* ga = xa->g();
                const double k1 = 1.0 / (na_ * nb_), k2 = c / (na_ * na_);
                for (std::size_t i = 0; i < xa->size; ++i) ga[i] += g * (vb[i] * k1 - va[i] * k2);
            }
            if (xb->requires_grad) {
                double* gb = xb->g();
                const double k1 = 1.0 / (na_ * nb_), k2 = c / (nb_ * nb_);
                for (std::size_t i = 0; i < xb->size; ++i) gb[i] += g * (va[i] * k1 - vb[i] * k2);
            }
        });
        return Tensor(n);
    }

    // select one element by flat index -> scalar
    Tensor pick(Tensor a, std::size_t flat_index) {
        if (flat_index >= a.size()) throw ContractError("pick index out of range");
        detail::Node* n = new_node({1}, a.requires_grad());
        n->store = {a.data()[flat_index]};
        n->vptr = n->store.data();
        set_grad(n, {a}, [na = a.node(), flat_index](detail::Node& self) {
            if (!na->requires_grad) return;
            na->g()[flat_index] += self.grad[0];
        });
        return Tensor(n);
    }

    // ---- backward -----------------------------------------------------------

    void backward(Tensor loss) {
        if (loss.size() != 1)
            throw ContractError("backward requires a scalar loss, got shape " +
                                detail::shape_str(loss.shape()));
        loss.node()->g()[0] = 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            detail::Node& n = **it;
            if (n.requires_grad && n.touched() && n.backprop) n.backprop(n);
        }
    }

private:
    std::vector<std::unique_ptr<detail::Node>> nodes_;
    std::vector<detail::Node*> external_leaves_;

    detail::Node* new_node(std::vector<int> shape, bool requires_grad) {
        auto n = std::make_unique<detail::Node>();
        n->shape = std::move(shape);
        n->size = detail::shape_size(n->shape);
        n->requires_grad = requires_grad;
        nodes_.push_back(std::move(n));
        return nodes_.back().get();
    }

    detail::Node* alloc_like(Tensor a, bool rg_from_inputs = true) {
        detail::Node* n = new_node(a.shape(), rg_from_inputs && a.requires_grad());
        n->store.resize(n->size);
        n->vptr = n->store.data();
        return n;
    }

    template <typename F>
    void set_grad(detail::Node* n, const std::vector<Tensor>& inputs, F&& fn) {
        bool rg = false;
        for (const Tensor& t : inputs) rg = rg || t.requires_grad();
        n->requires_grad = rg;
        if (rg) n->backprop = std::forward<F>(fn);
    }

    static void require_2d(const char* op, Tensor a) {
        if (a.shape().size() != 2)
            throw ShapeError(std::string(op) + " requires rank-2 tensor, got " +
                             detail::shape_str(a.shape()));
    }

    static void require_same_shape(const char* op, Tensor a, Tensor b) {
        if (a.shape() != b.shape())
            throw ShapeError(std::string(op) + " shape mismatch " + detail::shape_str(a.shape()) +
                             " vs " + detail::shape_str(b.shape()));
    }

    static void check_softmax_axis(Tensor a, int axis) {
        const int rank = static_cast<int>(a.shape().size());
        if (axis < 0 || axis >= rank)
            throw ShapeError("softmax axis " + std::to_string(axis) + " invalid for " +
                             detail::shape_str(a.shape()));
    }

    // C += A[m,k] B[k,n]  (plain accumulate; also used as the fresh product with C zeroed)
    static void mm(const double* a, const double* b, double* c, int m, int k, int n) {
        for (int i = 0; i < m; ++i) {
            const double* ra = a + static_cast<std::size_t>(i) * k;
            double* rc = c + static_cast<std::size_t>(i) * n;
            for (int t = 0; t < k; ++t) {
                const double av = ra[t];
                const double* rb = b + static_cast<std::size_t>(t) * n;
                for (int j = 0; j < n; ++j) rc[j] += av * rb[j];
            }
        }
    }
    static void mm_acc(const double* a, const double* b, double* c, int m, int k, int n) {
        mm(a, b, c, m, k, n);
    }
    // C += A[m,k] B[n,k]^T
    static void mm_nt_acc(const double* a, const double* b, double* c, int m, int k, int n) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                const double *ra = a + static_cast<std::size_t>(i) * k,
                             *rb = b + static_cast<std::size_t>(j) * k;
                for (int t = 0; t < k; ++t) acc += ra[t] * rb[t];
                c[static_cast<std::size_t>(i) * n + j] += acc;
            }
    }
    // C += A[k,m]^T B[k,n]
    static void mm_tn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
        for (int t = 0; t < k; ++t) {
            const double *ra = a + static_cast<std::size_t>(t) * m,
                         *rb = b + static_cast<std::size_t>(t) * n;
            for (int i = 0; i < m; ++i) {
                const double av = ra[i];
                double* rc = c + static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j) rc[j] += av * rb[j];
            }
        }
    }
};

// Max relative error between analytic and central-difference gradients of a
// scalar-valued function built on a tape from one leaf input.
inline double gradcheck(const std::function<Tensor(Tape&, Tensor)>& f, std::vector<int> shape,
                        std::vector<double> x, double h = 1e-5) {
    std::vector<double> analytic;
    {
        Tape tape;
        Tensor xt = tape.leaf(shape, x, true);
        Tensor loss = f(tape, xt);
        tape.backward(loss);
        analytic = xt.grad();
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::vector<double> xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        double fp, fm;
        {
            Tape t;
            fp = f(t, t.leaf(shape, xp, false)).scalar();
        }
        {
            Tape t;
            fm = f(t, t.leaf(shape, xm, false)).scalar();
        }
        const double fd = (fp - fm) / (2.0 * h);
        const double denom = std::max({std::abs(analytic[i]), std::abs(fd), 1e-8});
        worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
    }
    return worst;
}

}  // namespace pbench
