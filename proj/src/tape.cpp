#include "aircade/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace aircade {

namespace {

// ---- broadcasting helpers ----

Shape pad_left(const Shape& s, size_t rank) {
    Shape out(rank, 1);
    std::copy(s.begin(), s.end(), out.begin() + (rank - s.size()));
    return out;
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* what) {
    size_t rank = std::max(a.size(), b.size());
    Shape pa = pad_left(a, rank), pb = pad_left(b, rank);
    Shape out(rank);
    for (size_t i = 0; i < rank; ++i) {
        if (pa[i] == pb[i]) {
            out[i] = pa[i];
        } else if (pa[i] == 1) {
            out[i] = pb[i];
        } else if (pb[i] == 1) {
            out[i] = pa[i];
        } else {
            throw ShapeError(std::string(what) + ": cannot broadcast " + shape_str(a) +
                             " with " + shape_str(b));
        }
    }
    return out;
}

// Row-major strides; stride 0 where the (padded) dim is 1 but output is larger.
std::vector<int64_t> bcast_strides(const Shape& padded, const Shape& out) {
    std::vector<int64_t> st(out.size());
    int64_t run = 1;
    for (int i = static_cast<int>(out.size()) - 1; i >= 0; --i) {
        st[static_cast<size_t>(i)] = (padded[static_cast<size_t>(i)] == 1 && out[static_cast<size_t>(i)] != 1) ? 0 : run;
        run *= padded[static_cast<size_t>(i)];
    }
    return st;
}

// Sum g over dimensions that were broadcast to reach g.shape from target.
Tensor reduce_to_shape(const Tensor& g, const Shape& target) {
    if (g.shape == target) return g;
    Shape padded = pad_left(target, g.shape.size());
    Tensor out(target);
    std::vector<int64_t> st = bcast_strides(padded, g.shape);
    std::vector<int64_t> idx(g.shape.size(), 0);
    int64_t off = 0;
    for (size_t flat = 0; flat < g.data.size(); ++flat) {
        out.data[static_cast<size_t>(off)] += g.data[flat];
        for (int d = static_cast<int>(g.shape.size()) - 1; d >= 0; --d) {
            size_t ud = static_cast<size_t>(d);
            if (++idx[ud] < g.shape[ud]) {
                off += st[ud];
                break;
            }
            idx[ud] = 0;
            off -= st[ud] * (g.shape[ud] - 1);
        }
    }
    return out;
}

// ---- 2-D matmul kernels (accumulating) ----

// C[m,n] += alpha * A[m,k] @ B[k,n]
void mm_nn(const double* A, const double* B, double* C, int64_t m, int64_t k, int64_t n,
           double alpha) {
    for (int64_t i = 0; i < m; ++i) {
        double* c = C + i * n;
        const double* a = A + i * k;
        for (int64_t l = 0; l < k; ++l) {
            double av = alpha * a[l];
            const double* b = B + l * n;
            for (int64_t j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// C[m,n] += alpha * A[m,k] @ B[n,k]^T
void mm_nt(const double* A, const double* B, double* C, int64_t m, int64_t k, int64_t n,
           double alpha) {
    for (int64_t i = 0; i < m; ++i) {
        const double* a = A + i * k;
        double* c = C + i * n;
        for (int64_t j = 0; j < n; ++j) {
            const double* b = B + j * k;
            double acc = 0.0;
            for (int64_t l = 0; l < k; ++l) acc += a[l] * b[l];
            c[j] += alpha * acc;
        }
    }
}

// C[m,n] += alpha * A[k,m]^T @ B[k,n]
void mm_tn(const double* A, const double* B, double* C, int64_t m, int64_t k, int64_t n,
           double alpha) {
    for (int64_t l = 0; l < k; ++l) {
        const double* a = A + l * m;
        const double* b = B + l * n;
        for (int64_t i = 0; i < m; ++i) {
            double av = alpha * a[i];
            double* c = C + i * n;
            for (int64_t j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

struct BatchMap {
    Shape batch;                  // broadcast batch shape
    int64_t batches = 1;
    std::vector<int64_t> a_slice; // slice index per output batch
    std::vector<int64_t> b_slice;
};

// Resolve the batch-slice correspondence for a batched matmul.
BatchMap map_batches(const Shape& a, const Shape& b) {
    Shape ab(a.begin(), a.end() - 2), bb(b.begin(), b.end() - 2);
    BatchMap m;
    m.batch = broadcast_shape(ab.empty() ? Shape{1} : ab, bb.empty() ? Shape{1} : bb, "matmul");
    if (ab.empty() && bb.empty()) m.batch = {1};
    m.batches = shape_numel(m.batch);
    Shape pa = pad_left(ab.empty() ? Shape{1} : ab, m.batch.size());
    Shape pb = pad_left(bb.empty() ? Shape{1} : bb, m.batch.size());
    std::vector<int64_t> sa = bcast_strides(pa, m.batch), sb = bcast_strides(pb, m.batch);
    // convert element strides to slice strides
    m.a_slice.resize(static_cast<size_t>(m.batches));
    m.b_slice.resize(static_cast<size_t>(m.batches));
    std::vector<int64_t> idx(m.batch.size(), 0);
    int64_t offa = 0, offb = 0;
    for (int64_t flat = 0; flat < m.batches; ++flat) {
        m.a_slice[static_cast<size_t>(flat)] = offa;
        m.b_slice[static_cast<size_t>(flat)] = offb;
        for (int d = static_cast<int>(m.batch.size()) - 1; d >= 0; --d) {
            size_t ud = static_cast<size_t>(d);
            if (++idx[ud] < m.batch[ud]) {
                offa += sa[ud];
                offb += sb[ud];
                break;
            }
            idx[ud] = 0;
            offa -= sa[ud] * (m.batch[ud] - 1);
            offb -= sb[ud] * (m.batch[ud] - 1);
        }
    }
    return m;
}

}  // namespace

// ---- tape plumbing ----

void ComputeTape::check_open() const {
    if (consumed_) throw Error("compute tape already consumed by backward()");
}

int32_t ComputeTape::require(Var v) const {
    if (v.tape != this) throw Error("tensor not produced under this tape");
    if (v.id < 0 || static_cast<size_t>(v.id) >= nodes_.size()) {
        throw Error("invalid tape node handle");
    }
    return v.id;
}

Var ComputeTape::push(Tensor value, std::function<void(ComputeTape&, Node&)> backprop) {
    check_open();
    Node n;
    n.value = std::move(value);
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int32_t>(nodes_.size() - 1)};
}

Tensor& ComputeTape::adj(int32_t id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.adjoint.data.empty()) n.adjoint = Tensor::zeros(n.value.shape);
    return n.adjoint;
}

Var ComputeTape::constant(Tensor v) {
    return push(std::move(v), nullptr);
}

Var ComputeTape::param(Parameter& p) {
    check_open();
    auto it = param_cache_.find(&p);
    if (it != param_cache_.end()) return Var{this, it->second};
    Var v = push(p.value, nullptr);
    nodes_[static_cast<size_t>(v.id)].parameter = &p;
    param_cache_[&p] = v.id;
    return v;
}

const Tensor& ComputeTape::val(Var v) const {
    return nodes_[static_cast<size_t>(require(v))].value;
}

void ComputeTape::backward(Var loss) {
    int32_t root = require(loss);
    check_open();
    if (nodes_[static_cast<size_t>(root)].value.numel() != 1) {
        throw ShapeError("backward: loss must be scalar, got shape " +
                         shape_str(nodes_[static_cast<size_t>(root)].value.shape));
    }
    consumed_ = true;
    adj(root).data[0] = 1.0;
    for (int32_t id = static_cast<int32_t>(nodes_.size()) - 1; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.adjoint.data.empty()) continue;  // not reachable from the loss
        if (n.backprop) n.backprop(*this, n);
        if (n.parameter) {
            Tensor& g = n.parameter->grad;
            for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += n.adjoint.data[i];
        }
    }
}

// ---- primitives ----

Var ComputeTape::matmul(Var va, Var vb, double alpha) {
    int32_t ia = require(va), ib = require(vb);
    const Tensor& a = nodes_[static_cast<size_t>(ia)].value;
    const Tensor& b = nodes_[static_cast<size_t>(ib)].value;
    if (a.rank() < 2 || b.rank() < 2) {
        throw ShapeError("matmul: operands must have rank >= 2, got " + shape_str(a.shape) +
                         " and " + shape_str(b.shape));
    }
    int64_t m = a.shape[a.shape.size() - 2], k = a.shape.back();
    int64_t k2 = b.shape[b.shape.size() - 2], n = b.shape.back();
    if (k != k2) {
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape) + " x " +
                         shape_str(b.shape));
    }
    BatchMap bm = map_batches(a.shape, b.shape);
    Shape out_shape = bm.batch;
    if (a.rank() == 2 && b.rank() == 2) out_shape.clear();
    out_shape.push_back(m);
    out_shape.push_back(n);

    Tensor out(out_shape);
    for (int64_t bi = 0; bi < bm.batches; ++bi) {
        mm_nn(a.data.data() + bm.a_slice[static_cast<size_t>(bi)] * m * k,
              b.data.data() + bm.b_slice[static_cast<size_t>(bi)] * k * n,
              out.data.data() + bi * m * n, m, k, n, alpha);
    }

    auto bp = [ia, ib, m, k, n, alpha, bm](ComputeTape& t, Node& node) {
        const Tensor& A = t.nodes_[static_cast<size_t>(ia)].value;
        const Tensor& B = t.nodes_[static_cast<size_t>(ib)].value;
        Tensor& da = t.adj(ia);
        Tensor& db = t.adj(ib);
        const double* g = node.adjoint.data.data();
        for (int64_t bi = 0; bi < bm.batches; ++bi) {
            const double* gs = g + bi * m * n;
            // dA += alpha * g @ B^T ; dB += alpha * A^T @ g
            mm_nt(gs, B.data.data() + bm.b_slice[static_cast<size_t>(bi)] * k * n,
                  da.data.data() + bm.a_slice[static_cast<size_t>(bi)] * m * k, m, n, k, alpha);
            mm_tn(A.data.data() + bm.a_slice[static_cast<size_t>(bi)] * m * k, gs,
                  db.data.data() + bm.b_slice[static_cast<size_t>(bi)] * k * n, k, m, n, alpha);
        }
    };
    return push(std::move(out), bp);
}

Var ComputeTape::transpose_last2(Var vx) {
    int32_t ix = require(vx);
    const Tensor& x = nodes_[static_cast<size_t>(ix)].value;
    if (x.rank() < 2) throw ShapeError("transpose_last2: rank must be >= 2");
    Shape os = x.shape;
    std::swap(os[os.size() - 1], os[os.size() - 2]);
    int64_t r = x.shape[x.shape.size() - 2], c = x.shape.back();
    int64_t slices = x.numel() / (r * c);

    auto transpose_into = [r, c, slices](const double* src, double* dst) {
        for (int64_t s = 0; s < slices; ++s) {
            const double* in = src + s * r * c;
            double* out = dst + s * r * c;
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < c; ++j) out[j * r + i] = in[i * c + j];
        }
    };

    Tensor out(os);
    transpose_into(x.data.data(), out.data.data());
    auto bp = [ix, r, c, slices](ComputeTape& t, Node& node) {
        Tensor& dx = t.adj(ix);
        // adjoint transposes back: iterate out-of-place with swapped dims
        for (int64_t s = 0; s < slices; ++s) {
            const double* g = node.adjoint.data.data() + s * r * c;
            double* d = dx.data.data() + s * r * c;
            for (int64_t j = 0; j < c; ++j)
                for (int64_t i = 0; i < r; ++i) d[i * c + j] += g[j * r + i];
        }
    };
    return push(std::move(out), bp);
}

Var ComputeTape::softmax(Var vx, SoftmaxAxis axis) {
    int32_t ix = require(vx);
    const Tensor& x = nodes_[static_cast<size_t>(ix)].value;
    if (axis == SoftmaxAxis::second_last && x.rank() < 2) {
        throw ShapeError("softmax: rank must be >= 2 for second_last axis");
    }
    if (!x.all_finite()) throw NumericError("softmax: non-finite input");

    // Vector layout over the normalized axis: (base offset, stride, length).
    int64_t len, stride, vec_count;
    int64_t r = x.rank() >= 2 ? x.shape[x.shape.size() - 2] : 1;
    int64_t c = x.shape.back();
    int64_t mat = r * c;
    if (axis == SoftmaxAxis::last) {
        len = c;
        stride = 1;
        vec_count = x.numel() / c;
    } else {
        len = r;
        stride = c;
        vec_count = x.numel() / r;
    }

    auto vec_base = [axis, c, mat](int64_t v) {
        if (axis == SoftmaxAxis::last) return v * c;
        return (v / c) * mat + (v % c);
    };

    Tensor out(x.shape);
    for (int64_t v = 0; v < vec_count; ++v) {
        int64_t base = vec_base(v);
        const double* in = x.data.data() + base;
        double* o = out.data.data() + base;
        double mx = in[0];
        for (int64_t i = 1; i < len; ++i) mx = std::max(mx, in[i * stride]);
        double sum = 0.0;
        for (int64_t i = 0; i < len; ++i) {
            double e = std::exp(in[i * stride] - mx);
            o[i * stride] = e;
            sum += e;
        }
        double inv = 1.0 / sum;
        for (int64_t i = 0; i < len; ++i) o[i * stride] *= inv;
    }

    auto bp = [ix, len, stride, vec_count, vec_base](ComputeTape& t, Node& node) {
        Tensor& dx = t.adj(ix);
        const Tensor& y = node.value;
        for (int64_t v = 0; v < vec_count; ++v) {
            int64_t base = vec_base(v);
            const double* yv = y.data.data() + base;
            const double* g = node.adjoint.data.data() + base;
            double* d = dx.data.data() + base;
            double dot = 0.0;
            for (int64_t i = 0; i < len; ++i) dot += g[i * stride] * yv[i * stride];
            for (int64_t i = 0; i < len; ++i) {
                d[i * stride] += yv[i * stride] * (g[i * stride] - dot);
            }
        }
    };
    return push(std::move(out), bp);
}

Var ComputeTape::layer_norm(Var vx, Var vgain, Var vbias, double eps) {
    int32_t ix = require(vx), ig = require(vgain), ib = require(vbias);
    const Tensor& x = nodes_[static_cast<size_t>(ix)].value;
    const Tensor& gain = nodes_[static_cast<size_t>(ig)].value;
    const Tensor& bias = nodes_[static_cast<size_t>(ib)].value;
    int64_t d = x.shape.back();
    if (eps <= 0) throw NumericError("layer_norm: eps must be > 0");
    if (gain.shape != Shape{d} || bias.shape != Shape{d}) {
        throw ShapeError("layer_norm: gain/bias must have shape (" + std::to_string(d) +
                         "), got " + shape_str(gain.shape) + " and " + shape_str(bias.shape));
    }
    int64_t vecs = x.numel() / d;
    Tensor out(x.shape);
    Tensor xhat(x.shape);
    Tensor inv_std({std::max<int64_t>(vecs, 1)});
    for (int64_t v = 0; v < vecs; ++v) {
        const double* in = x.data.data() + v * d;
        double mu = 0.0;
        for (int64_t i = 0; i < d; ++i) mu += in[i];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (int64_t i = 0; i < d; ++i) {
            double c = in[i] - mu;
            var += c * c;
        }
        var /= static_cast<double>(d);
        double inv = 1.0 / std::sqrt(var + eps);
        inv_std.data[static_cast<size_t>(v)] = inv;
        double* xh = xhat.data.data() + v * d;
        double* o = out.data.data() + v * d;
        for (int64_t i = 0; i < d; ++i) {
            xh[i] = (in[i] - mu) * inv;
            o[i] = gain.data[static_cast<size_t>(i)] * xh[i] + bias.data[static_cast<size_t>(i)];
        }
    }

    auto bp = [ix, ig, ib, d, vecs, xhat = std::move(xhat),
               inv_std = std::move(inv_std)](ComputeTape& t, Node& node) {
        const Tensor& gain = t.nodes_[static_cast<size_t>(ig)].value;
        Tensor& dx = t.adj(ix);
        Tensor& dgain = t.adj(ig);
        Tensor& dbias = t.adj(ib);
        for (int64_t v = 0; v < vecs; ++v) {
            const double* g = node.adjoint.data.data() + v * d;
            const double* xh = xhat.data.data() + v * d;
            double inv = inv_std.data[static_cast<size_t>(v)];
            double* dxv = dx.data.data() + v * d;
            double mean_gy = 0.0, mean_gyx = 0.0;
            for (int64_t i = 0; i < d; ++i) {
                double gy = g[i] * gain.data[static_cast<size_t>(i)];
                mean_gy += gy;
                mean_gyx += gy * xh[i];
            }
            mean_gy /= static_cast<double>(d);
            mean_gyx /= static_cast<double>(d);
            for (int64_t i = 0; i < d; ++i) {
                double gy = g[i] * gain.data[static_cast<size_t>(i)];
                dxv[i] += inv * (gy - mean_gy - xh[i] * mean_gyx);
                dgain.data[static_cast<size_t>(i)] += g[i] * xh[i];
                dbias.data[static_cast<size_t>(i)] += g[i];
            }
        }
    };
    return push(std::move(out), bp);
}

namespace {
enum UnaryOp { kRelu, kTanh, kSigmoid, kAbs };
}

Var ComputeTape::relu(Var x) { return unary_elementwise(x, kRelu); }
Var ComputeTape::tanh_fn(Var x) { return unary_elementwise(x, kTanh); }
Var ComputeTape::sigmoid(Var x) { return unary_elementwise(x, kSigmoid); }
Var ComputeTape::abs_fn(Var x) { return unary_elementwise(x, kAbs); }

Var ComputeTape::unary_elementwise(Var vx, int op) {
    int32_t ix = require(vx);
    const Tensor& x = nodes_[static_cast<size_t>(ix)].value;
    Tensor out(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) {
        double v = x.data[i];
        switch (op) {
            case kRelu: out.data[i] = v > 0.0 ? v : 0.0; break;
            case kTanh: out.data[i] = std::tanh(v); break;
            case kSigmoid: out.data[i] = 1.0 / (1.0 + std::exp(-v)); break;
            case kAbs: out.data[i] = std::abs(v); break;
        }
    }
    auto bp = [ix, op](ComputeTape& tp, Node& node) {
        const Tensor& x = tp.nodes_[static_cast<size_t>(ix)].value;
        const Tensor& y = node.value;
        Tensor& dx = tp.adj(ix);
        const double* g = node.adjoint.data.data();
        for (size_t i = 0; i < dx.data.size(); ++i) {
            double der = 0.0;
            switch (op) {
                case kRelu: der = x.data[i] > 0.0 ? 1.0 : 0.0; break;  // subgradient 0 at 0
                case kTanh: der = 1.0 - y.data[i] * y.data[i]; break;
                case kSigmoid: der = y.data[i] * (1.0 - y.data[i]); break;
                case kAbs:
                    der = x.data[i] > 0.0 ? 1.0 : (x.data[i] < 0.0 ? -1.0 : 0.0);
                    break;
            }
            dx.data[i] += der * g[i];
        }
    };
    return push(std::move(out), bp);
}

Var ComputeTape::binary_elementwise(Var va, Var vb, int op) {
    int32_t ia = require(va), ib = require(vb);
    const Tensor& a = nodes_[static_cast<size_t>(ia)].value;
    const Tensor& b = nodes_[static_cast<size_t>(ib)].value;
    static const char* names[] = {"add", "sub", "hadamard", "divide"};
    Shape os = broadcast_shape(a.shape, b.shape, names[op]);
    Tensor out(os);

    auto eval = [op](double x, double y) {
        switch (op) {
            case 0: return x + y;
            case 1: return x - y;
            case 2: return x * y;
            default: return x / y;
        }
    };

    if (a.shape == b.shape) {
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = eval(a.data[i], b.data[i]);
    } else {
        std::vector<int64_t> sa = bcast_strides(pad_left(a.shape, os.size()), os);
        std::vector<int64_t> sb = bcast_strides(pad_left(b.shape, os.size()), os);
        std::vector<int64_t> idx(os.size(), 0);
        int64_t offa = 0, offb = 0;
        for (size_t flat = 0; flat < out.data.size(); ++flat) {
            out.data[flat] = eval(a.data[static_cast<size_t>(offa)], b.data[static_cast<size_t>(offb)]);
            for (int d = static_cast<int>(os.size()) - 1; d >= 0; --d) {
                size_t ud = static_cast<size_t>(d);
                if (++idx[ud] < os[ud]) {
                    offa += sa[ud];
                    offb += sb[ud];
                    break;
                }
                idx[ud] = 0;
                offa -= sa[ud] * (os[ud] - 1);
                offb -= sb[ud] * (os[ud] - 1);
            }
        }
    }

    auto bp = [ia, ib, op](ComputeTape& t, Node& node) {
        const Tensor& a = t.nodes_[static_cast<size_t>(ia)].value;
        const Tensor& b = t.nodes_[static_cast<size_t>(ib)].value;
        const Tensor& g = node.adjoint;
        Tensor ga(g.shape), gb(g.shape);
        if (op == 0 || op == 1) {
            ga = g;
            gb = g;
            if (op == 1)
                for (double& v : gb.data) v = -v;
        } else {
            // need broadcast-expanded operand values per output element
            std::vector<int64_t> sa = bcast_strides(pad_left(a.shape, g.shape.size()), g.shape);
            std::vector<int64_t> sb = bcast_strides(pad_left(b.shape, g.shape.size()), g.shape);
            std::vector<int64_t> idx(g.shape.size(), 0);
            int64_t offa = 0, offb = 0;
            for (size_t flat = 0; flat < g.data.size(); ++flat) {
                double av = a.data[static_cast<size_t>(offa)];
                double bv = b.data[static_cast<size_t>(offb)];
                if (op == 2) {
                    ga.data[flat] = g.data[flat] * bv;
                    gb.data[flat] = g.data[flat] * av;
                } else {
                    ga.data[flat] = g.data[flat] / bv;
                    gb.data[flat] = -g.data[flat] * av / (bv * bv);
                }
                for (int d = static_cast<int>(g.shape.size()) - 1; d >= 0; --d) {
                    size_t ud = static_cast<size_t>(d);
                    if (++idx[ud] < g.shape[ud]) {
                        offa += sa[ud];
                        offb += sb[ud];
                        break;
                    }
                    idx[ud] = 0;
                    offa -= sa[ud] * (g.shape[ud] - 1);
                    offb -= sb[ud] * (g.shape[ud] - 1);
                }
            }
        }
        Tensor ra = reduce_to_shape(ga, a.shape);
        Tensor rb = reduce_to_shape(gb, b.shape);
        Tensor& da = t.adj(ia);
        Tensor& db = t.adj(ib);
        for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += ra.data[i];
        for (size_t i = 0; i < db.data.size(); ++i) db.data[i] += rb.data[i];
    };
    return push(std::move(out), bp);
}

Var ComputeTape::add(Var a, Var b) { return binary_elementwise(a, b, 0); }
Var ComputeTape::sub(Var a, Var b) { return binary_elementwise(a, b, 1); }
Var ComputeTape::hadamard(Var a, Var b) { return binary_elementwise(a, b, 2); }
Var ComputeTape::divide(Var a, Var b) { return binary_elementwise(a, b, 3); }

Var ComputeTape::scale(Var vx, double c) {
    int32_t ix = require(vx);
    const Tensor& x = nodes_[static_cast<size_t>(ix)].value;
    Tensor out(x.shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = c * x.data[i];
    auto bp = [ix, c](ComputeTape& t, Node& node) {
        Tensor& dx = t.adj(ix);
        for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += c * node.adjoint.data[i];
    };
    return push(std::move(out), bp);
}

Var ComputeTape::concat_lastdim(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_lastdim: no parts");
    std::vector<int32_t> ids;
    ids.reserve(parts.size());
    for (Var p : parts) ids.push_back(require(p));
    const Tensor& first = nodes_[static_cast<size_t>(ids[0])].value;
    Shape lead(first.shape.begin(), first.shape.end() - 1);
    int64_t total_last = 0;
    std::vector<int64_t> widths;
    for (int32_t id : ids) {
        const Tensor& t = nodes_[static_cast<size_t>(id)].value;
        Shape tl(t.shape.begin(), t.shape.end() - 1);
        if (tl != lead) {
            throw ShapeError("concat_lastdim: leading shapes differ, " + shape_str(first.shape) +
                             " vs " + shape_str(t.shape));
        }
        widths.push_back(t.shape.back());
        total_last += t.shape.back();
    }
    Shape os = lead;
    os.push_back(total_last);
    int64_t rows = shape_numel(lead);
    Tensor out(os);
    int64_t col = 0;
    for (size_t p = 0; p < ids.size(); ++p) {
        const Tensor& t = nodes_[static_cast<size_t>(ids[p])].value;
        int64_t w = widths[p];
        for (int64_t r = 0; r < rows; ++r) {
            std::memcpy(out.data.data() + r * total_last + col, t.data.data() + r * w,
                        static_cast<size_t>(w) * sizeof(double));
        }
        col += w;
    }
    auto bp = [ids, widths, rows, total_last](ComputeTape& t, Node& node) {
        int64_t col = 0;
        for (size_t p = 0; p < ids.size(); ++p) {
            int64_t w = widths[p];
            Tensor& d = t.adj(ids[p]);
            for (int64_t r = 0; r < rows; ++r) {
                const double* g = node.adjoint.data.data() + r * total_last + col;
                double* dst = d.data.data() + r * w;
                for (int64_t i = 0; i < w; ++i) dst[i] += g[i];
            }
            col += w;
        }
    };
    return push(std::move(out), bp);
}

Var ComputeTape::slice_lastdim(Var vx, int64_t start, int64_t len) {
    int32_t ix = require(vx);
    const Tensor& x = nodes_[static_cast<size_t>(ix)].value;
    int64_t last = x.shape.back();
    if (start < 0 || len < 1 || start + len > last) {
        throw ShapeError("slice_lastdim: range [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") out of " + std::to_string(last));
    }
    Shape os = x.shape;
    os.back() = len;
    int64_t rows = x.numel() / last;
    Tensor out(os);
    for (int64_t r = 0; r < rows; ++r) {
        std::memcpy(out.data.data() + r * len, x.data.data() + r * last + start,
                    static_cast<size_t>(len) * sizeof(double));
    }
    auto bp = [ix, start, len, last, rows](ComputeTape& t, Node& node) {
        Tensor& dx = t.adj(ix);
        for (int64_t r = 0; r < rows; ++r) {
            const double* g = node.adjoint.data.data() + r * len;
            double* d = dx.data.data() + r * last + start;
            for (int64_t i = 0; i < len; ++i) d[i] += g[i];
        }
    };
    return push(std::move(out), bp);
}

Var ComputeTape::linear(Var x, Var w) {
    const Tensor& xt = val(x);
    const Tensor& wt = val(w);
    if (wt.rank() != 2 || xt.shape.back() != wt.shape[0]) {
        throw ShapeError("linear: input width " + shape_str(xt.shape) +
                         " incompatible with weight " + shape_str(wt.shape));
    }
    return matmul(x, w);
}

Var ComputeTape::linear(Var x, Var w, Var bias) {
    Var y = linear(x, w);
    const Tensor& bt = val(bias);
    if (bt.rank() != 1 || bt.shape[0] != val(y).shape.back()) {
        throw ShapeError("linear: bias shape " + shape_str(bt.shape) + " does not match output");
    }
    return add(y, bias);
}

Var ComputeTape::gather_rows(Var vtable, std::vector<int64_t> rows) {
    int32_t it = require(vtable);
    const Tensor& table = nodes_[static_cast<size_t>(it)].value;
    int64_t n = table.shape[0];
    int64_t row_sz = table.numel() / n;
    for (int64_t r : rows) {
        if (r < 0 || r >= n) throw ShapeError("gather_rows: index out of range");
    }
    Shape os = table.shape;
    os[0] = static_cast<int64_t>(rows.size());
    Tensor out(os);
    for (size_t i = 0; i < rows.size(); ++i) {
        std::memcpy(out.data.data() + static_cast<int64_t>(i) * row_sz,
                    table.data.data() + rows[i] * row_sz,
                    static_cast<size_t>(row_sz) * sizeof(double));
    }
    auto bp = [it, rows = std::move(rows), row_sz](ComputeTape& t, Node& node) {
        Tensor& d = t.adj(it);
        for (size_t i = 0; i < rows.size(); ++i) {
            const double* g = node.adjoint.data.data() + static_cast<int64_t>(i) * row_sz;
            double* dst = d.data.data() + rows[i] * row_sz;
            for (int64_t j = 0; j < row_sz; ++j) dst[j] += g[j];
        }
    };
    return push(std::move(out), bp);
}

Var ComputeTape::expand_axis(Var vx, int axis, int64_t count) {
    int32_t ix = require(vx);
    const Tensor& x = nodes_[static_cast<size_t>(ix)].value;
    if (axis < 0 || axis > x.rank()) throw ShapeError("expand_axis: axis out of range");
    if (count < 1) throw ShapeError("expand_axis: count must be >= 1");
    Shape os = x.shape;
    os.insert(os.begin() + axis, count);
    int64_t prefix = 1;
    for (int i = 0; i < axis; ++i) prefix *= x.shape[static_cast<size_t>(i)];
    int64_t suffix = x.numel() / prefix;
    Tensor out(os);
    for (int64_t p = 0; p < prefix; ++p) {
        const double* src = x.data.data() + p * suffix;
        for (int64_t c = 0; c < count; ++c) {
            std::memcpy(out.data.data() + (p * count + c) * suffix, src,
                        static_cast<size_t>(suffix) * sizeof(double));
        }
    }
    auto bp = [ix, prefix, suffix, count](ComputeTape& t, Node& node) {
        Tensor& d = t.adj(ix);
        for (int64_t p = 0; p < prefix; ++p) {
            double* dst = d.data.data() + p * suffix;
            for (int64_t c = 0; c < count; ++c) {
                const double* g = node.adjoint.data.data() + (p * count + c) * suffix;
                for (int64_t i = 0; i < suffix; ++i) dst[i] += g[i];
            }
        }
    };
    return push(std::move(out), bp);
}

Var ComputeTape::swap_axes01(Var vx) {
    int32_t ix = require(vx);
    const Tensor& x = nodes_[static_cast<size_t>(ix)].value;
    if (x.rank() != 3) throw ShapeError("swap_axes01: rank must be 3, got " + shape_str(x.shape));
    int64_t a = x.shape[0], b = x.shape[1], d = x.shape[2];
    Tensor out({b, a, d});
    for (int64_t i = 0; i < a; ++i)
        for (int64_t j = 0; j < b; ++j)
            std::memcpy(out.data.data() + (j * a + i) * d, x.data.data() + (i * b + j) * d,
                        static_cast<size_t>(d) * sizeof(double));
    auto bp = [ix, a, b, d](ComputeTape& t, Node& node) {
        Tensor& dx = t.adj(ix);
        for (int64_t i = 0; i < a; ++i)
            for (int64_t j = 0; j < b; ++j) {
                const double* g = node.adjoint.data.data() + (j * a + i) * d;
                double* dst = dx.data.data() + (i * b + j) * d;
                for (int64_t k = 0; k < d; ++k) dst[k] += g[k];
            }
    };
    return push(std::move(out), bp);
}

Var ComputeTape::reshape(Var vx, Shape s) {
    int32_t ix = require(vx);
    const Tensor& x = nodes_[static_cast<size_t>(ix)].value;
    if (shape_numel(s) != x.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(x.shape) + " as " + shape_str(s));
    }
    Tensor out(std::move(s), x.data);
    auto bp = [ix](ComputeTape& t, Node& node) {
        Tensor& dx = t.adj(ix);
        for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += node.adjoint.data[i];
    };
    return push(std::move(out), bp);
}

Var ComputeTape::sum_all(Var vx) {
    int32_t ix = require(vx);
    const Tensor& x = nodes_[static_cast<size_t>(ix)].value;
    double s = 0.0;
    for (double v : x.data) s += v;
    auto bp = [ix](ComputeTape& t, Node& node) {
        Tensor& dx = t.adj(ix);
        double g = node.adjoint.data[0];
        for (double& v : dx.data) v += g;
    };
    return push(Tensor::scalar(s), bp);
}

Var ComputeTape::mean_all(Var vx) {
    int64_t n = val(vx).numel();
    return scale(sum_all(vx), 1.0 / static_cast<double>(n));
}

Var ComputeTape::sum_lastdim_keepdim(Var vx) {
    int32_t ix = require(vx);
    const Tensor& x = nodes_[static_cast<size_t>(ix)].value;
    int64_t last = x.shape.back();
    int64_t rows = x.numel() / last;
    Shape os = x.shape;
    os.back() = 1;
    Tensor out(os);
    for (int64_t r = 0; r < rows; ++r) {
        double s = 0.0;
        const double* in = x.data.data() + r * last;
        for (int64_t i = 0; i < last; ++i) s += in[i];
        out.data[static_cast<size_t>(r)] = s;
    }
    auto bp = [ix, last, rows](ComputeTape& t, Node& node) {
        Tensor& dx = t.adj(ix);
        for (int64_t r = 0; r < rows; ++r) {
            double g = node.adjoint.data[static_cast<size_t>(r)];
            double* d = dx.data.data() + r * last;
            for (int64_t i = 0; i < last; ++i) d[i] += g;
        }
    };
    return push(std::move(out), bp);
}

Var ComputeTape::stack_scalars(std::span<const Var> xs) {
    if (xs.empty()) throw ShapeError("stack_scalars: empty input");
    std::vector<int32_t> ids;
    ids.reserve(xs.size());
    Tensor out({static_cast<int64_t>(xs.size())});
    for (size_t i = 0; i < xs.size(); ++i) {
        int32_t id = require(xs[i]);
        if (nodes_[static_cast<size_t>(id)].value.numel() != 1) {
            throw ShapeError("stack_scalars: element " + std::to_string(i) + " is not scalar");
        }
        out.data[i] = nodes_[static_cast<size_t>(id)].value.data[0];
        ids.push_back(id);
    }
    auto bp = [ids](ComputeTape& t, Node& node) {
        for (size_t i = 0; i < ids.size(); ++i) {
            t.adj(ids[i]).data[0] += node.adjoint.data[i];
        }
    };
    return push(std::move(out), bp);
}

}  // namespace aircade
