#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "csf/common.hpp"
#include "csf/rng.hpp"

namespace csf::ad {

/// Dense row-major tensor. Rank 2 is the working shape for all graph
/// primitives; rank 0/1 appears only in storage (checkpoints).
template <typename S>
struct TensorT {
    std::vector<int> shape;
    std::vector<S> data;

    TensorT() = default;
    TensorT(int rows, int cols, S fill = S(0))
        : shape{rows, cols}, data(static_cast<std::size_t>(rows) * cols, fill) {}

    static TensorT scalar(S v) {
        TensorT t(1, 1);
        t.data[0] = v;
        return t;
    }

    int rows() const { return shape.empty() ? 1 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    std::size_t numel() const { return data.size(); }

    S& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
    S at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

    bool same_shape(const TensorT& o) const { return rows() == o.rows() && cols() == o.cols(); }

    template <typename T>
    TensorT<T> cast() const {
        TensorT<T> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
        return out;
    }
};

using Tensor = TensorT<float>;

enum class Op {
    kLeaf,
    kMatmul,
    kAdd,
    kMul,
    kRelu,
    kGelu,
    kSoftmax,
    kLayernorm,
    kConcatRows,
    kConcatCols,
    kSliceRows,
    kSliceCols,
    kScale,
    kSum,
    kMean,
    kSse,
};

/// Define-by-run reverse-mode tape. Values are computed eagerly; backward()
/// walks the records in reverse. Graphs are rebuilt per batch and are
/// single-threaded; identical inputs give bit-identical results.
template <typename S>
class GraphT {
   public:
    using Id = int;

    Id input(TensorT<S> value, bool requires_grad = false) {
        Node n;
        n.op = Op::kLeaf;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        return push(std::move(n), /*check=*/true);
    }

    /// C = op_a(A) * op_b(B); at most one side may be transposed.
    Id matmul(Id a, Id b, bool trans_a = false, bool trans_b = false) {
        if (trans_a && trans_b) throw ShapeError("matmul: double transpose unsupported");
        const auto& A = value(a);
        const auto& B = value(b);
        const int m = trans_a ? A.cols() : A.rows();
        const int ka = trans_a ? A.rows() : A.cols();
        const int kb = trans_b ? B.cols() : B.rows();
        const int nn = trans_b ? B.rows() : B.cols();
        if (ka != kb) throw ShapeError("matmul: inner dimensions differ");
        Node n = binary(Op::kMatmul, a, b);
        n.ta = trans_a;
        n.tb = trans_b;
        n.value = TensorT<S>(m, nn);
        mm(A, trans_a, B, trans_b, n.value);
        return push(std::move(n));
    }

    /// Elementwise add; b may broadcast as a 1 x C row or 1 x 1 scalar.
    Id add(Id a, Id b) { return ewise(Op::kAdd, a, b); }

    /// Elementwise multiply with the same broadcasting rules as add.
    Id mul(Id a, Id b) { return ewise(Op::kMul, a, b); }

    Id sub(Id a, Id b) { return add(a, scale(b, S(-1))); }

    Id relu(Id a) {
        Node n = unary(Op::kRelu, a);
        n.value = value(a);
        for (auto& v : n.value.data) v = v > S(0) ? v : S(0);
        return push(std::move(n));
    }

    Id gelu(Id a) {
        Node n = unary(Op::kGelu, a);
        n.value = value(a);
        for (auto& v : n.value.data) v = gelu_fwd(v);
        return push(std::move(n));
    }

    /// Row-wise softmax with max-subtraction.
    Id softmax(Id a) {
        const auto& A = value(a);
        Node n = unary(Op::kSoftmax, a);
        n.value = TensorT<S>(A.rows(), A.cols());
        for (int r = 0; r < A.rows(); ++r) {
            S mx = A.at(r, 0);
            for (int c = 1; c < A.cols(); ++c) mx = std::max(mx, A.at(r, c));
            S sum = S(0);
            for (int c = 0; c < A.cols(); ++c) {
                const S e = std::exp(A.at(r, c) - mx);
                n.value.at(r, c) = e;
                sum += e;
            }
            for (int c = 0; c < A.cols(); ++c) n.value.at(r, c) /= sum;
        }
        return push(std::move(n));
    }

    /// Row-wise layer normalization without affine terms:
    /// y = (x - mean) / sqrt(biased_var + eps).
    Id layernorm(Id a, S eps) {
        const auto& A = value(a);
        Node n = unary(Op::kLayernorm, a);
        n.k = eps;
        n.value = TensorT<S>(A.rows(), A.cols());
        n.saved.resize(static_cast<std::size_t>(A.rows()) * 2);
        const int c = A.cols();
        for (int r = 0; r < A.rows(); ++r) {
            S mu = S(0);
            for (int j = 0; j < c; ++j) mu += A.at(r, j);
            mu /= c;
            S var = S(0);
            for (int j = 0; j < c; ++j) {
                const S d = A.at(r, j) - mu;
                var += d * d;
            }
            var /= c;
            const S inv = S(1) / std::sqrt(var + eps);
            n.saved[2 * r] = mu;
            n.saved[2 * r + 1] = inv;
            for (int j = 0; j < c; ++j) n.value.at(r, j) = (A.at(r, j) - mu) * inv;
        }
        return push(std::move(n));
    }

    Id concat_rows(Id a, Id b) {
        const auto& A = value(a);
        const auto& B = value(b);
        if (A.cols() != B.cols()) throw ShapeError("concat_rows: column mismatch");
        Node n = binary(Op::kConcatRows, a, b);
        n.value = TensorT<S>(A.rows() + B.rows(), A.cols());
        std::copy(A.data.begin(), A.data.end(), n.value.data.begin());
        std::copy(B.data.begin(), B.data.end(), n.value.data.begin() + A.data.size());
        return push(std::move(n));
    }

    Id concat_cols(Id a, Id b) {
        const auto& A = value(a);
        const auto& B = value(b);
        if (A.rows() != B.rows()) throw ShapeError("concat_cols: row mismatch");
        Node n = binary(Op::kConcatCols, a, b);
        n.value = TensorT<S>(A.rows(), A.cols() + B.cols());
        for (int r = 0; r < A.rows(); ++r) {
            for (int c = 0; c < A.cols(); ++c) n.value.at(r, c) = A.at(r, c);
            for (int c = 0; c < B.cols(); ++c) n.value.at(r, A.cols() + c) = B.at(r, c);
        }
        return push(std::move(n));
    }

    Id slice_rows(Id a, int r0, int r1) { return slice(Op::kSliceRows, a, r0, r1); }
    Id slice_cols(Id a, int c0, int c1) { return slice(Op::kSliceCols, a, c0, c1); }

    Id scale(Id a, S k) {
        Node n = unary(Op::kScale, a);
        n.k = k;
        n.value = value(a);
        for (auto& v : n.value.data) v *= k;
        return push(std::move(n));
    }

    Id sum(Id a) { return reduce(Op::kSum, a); }
    Id mean(Id a) { return reduce(Op::kMean, a); }

    /// Squared-error reduction sum((a - b)^2) -> 1x1.
    Id sse(Id a, Id b) {
        const auto& A = value(a);
        const auto& B = value(b);
        if (!A.same_shape(B)) throw ShapeError("sse: shape mismatch");
        Node n = binary(Op::kSse, a, b);
        S acc = S(0);
        for (std::size_t i = 0; i < A.data.size(); ++i) {
            const S d = A.data[i] - B.data[i];
            acc += d * d;
        }
        n.value = TensorT<S>::scalar(acc);
        return push(std::move(n));
    }

    const TensorT<S>& value(Id id) const { return nodes_[id].value; }

    bool has_grad(Id id) const { return !nodes_[id].grad.data.empty(); }

    const TensorT<S>& grad(Id id) const {
        if (!has_grad(id)) throw NumericError("grad requested before backward");
        return nodes_[id].grad;
    }

    /// Accumulates gradients of `output` into every requires_grad node.
    /// `output_grad` must match the output shape; defaults to ones for 1x1.
    void backward(Id output, TensorT<S> output_grad = {}) {
        if (output < 0 || output >= static_cast<Id>(nodes_.size()))
            throw NumericError("backward before forward");
        if (output_grad.data.empty()) {
            const auto& ov = nodes_[output].value;
            output_grad = TensorT<S>(ov.rows(), ov.cols(), S(1));
        }
        if (!output_grad.same_shape(nodes_[output].value))
            throw ShapeError("backward: output_grad shape");
        accumulate(nodes_[output], std::move(output_grad));
        for (Id id = output; id >= 0; --id) {
            Node& n = nodes_[id];
            if (!n.requires_grad || n.grad.data.empty() || n.op == Op::kLeaf) continue;
            step_backward(n);
        }
    }

    std::size_t size() const { return nodes_.size(); }

   private:
    struct Node {
        Op op = Op::kLeaf;
        Id a = -1, b = -1;
        bool ta = false, tb = false;
        S k = S(0);
        int i0 = 0, i1 = 0;
        bool requires_grad = false;
        TensorT<S> value;
        TensorT<S> grad;
        std::vector<S> saved;
    };

    std::vector<Node> nodes_;

    Node unary(Op op, Id a) {
        Node n;
        n.op = op;
        n.a = a;
        n.requires_grad = nodes_[a].requires_grad;
        return n;
    }

    Node binary(Op op, Id a, Id b) {
        Node n;
        n.op = op;
        n.a = a;
        n.b = b;
        n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
        return n;
    }

    Id push(Node n, bool check = true) {
        if (check) {
            for (S v : n.value.data)
                if (!std::isfinite(static_cast<double>(v)))
                    throw NumericError("non-finite tensor in graph op");
        }
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size() - 1);
    }

    Id ewise(Op op, Id a, Id b) {
        const auto& A = value(a);
        const auto& B = value(b);
        const bool same = A.same_shape(B);
        const bool row_bcast = B.rows() == 1 && B.cols() == A.cols();
        const bool scalar_bcast = B.numel() == 1;
        if (!same && !row_bcast && !scalar_bcast) throw ShapeError("add/mul: shape mismatch");
        Node n = binary(op, a, b);
        n.value = TensorT<S>(A.rows(), A.cols());
        for (int r = 0; r < A.rows(); ++r)
            for (int c = 0; c < A.cols(); ++c) {
                const S bv = same ? B.at(r, c) : (scalar_bcast ? B.data[0] : B.at(0, c));
                n.value.at(r, c) = op == Op::kAdd ? A.at(r, c) + bv : A.at(r, c) * bv;
            }
        return push(std::move(n));
    }

    Id slice(Op op, Id a, int i0, int i1) {
        const auto& A = value(a);
        const int lim = op == Op::kSliceRows ? A.rows() : A.cols();
        if (i0 < 0 || i1 > lim || i0 >= i1) throw ShapeError("slice: bad range");
        Node n = unary(op, a);
        n.i0 = i0;
        n.i1 = i1;
        if (op == Op::kSliceRows) {
            n.value = TensorT<S>(i1 - i0, A.cols());
            for (int r = i0; r < i1; ++r)
                for (int c = 0; c < A.cols(); ++c) n.value.at(r - i0, c) = A.at(r, c);
        } else {
            n.value = TensorT<S>(A.rows(), i1 - i0);
            for (int r = 0; r < A.rows(); ++r)
                for (int c = i0; c < i1; ++c) n.value.at(r, c - i0) = A.at(r, c);
        }
        return push(std::move(n));
    }

    Id reduce(Op op, Id a) {
        const auto& A = value(a);
        Node n = unary(op, a);
        S acc = S(0);
        for (S v : A.data) acc += v;
        if (op == Op::kMean) acc /= static_cast<S>(A.numel());
        n.value = TensorT<S>::scalar(acc);
        return push(std::move(n));
    }

    static S gelu_fwd(S x) {
        return S(0.5) * x * (S(1) + std::erf(x * S(0.70710678118654752440)));
    }

    static S gelu_bwd(S x) {
        const S phi_cdf = S(0.5) * (S(1) + std::erf(x * S(0.70710678118654752440)));
        const S phi_pdf = std::exp(S(-0.5) * x * x) * S(0.39894228040143267794);
        return phi_cdf + x * phi_pdf;
    }

    // C += / = op_a(A) * op_b(B). Three kernels: nn, nt, tn.
    static void mm(const TensorT<S>& A, bool ta, const TensorT<S>& B, bool tb, TensorT<S>& C,
                   bool accumulate = false) {
        const int m = C.rows();
        const int n = C.cols();
        if (!accumulate) std::fill(C.data.begin(), C.data.end(), S(0));
        if (!ta && !tb) {
            const int kk = A.cols();
            for (int i = 0; i < m; ++i) {
                S* crow = &C.data[static_cast<std::size_t>(i) * n];
                for (int k = 0; k < kk; ++k) {
                    const S aik = A.at(i, k);
                    if (aik == S(0)) continue;
                    const S* brow = &B.data[static_cast<std::size_t>(k) * n];
                    for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
                }
            }
        } else if (!ta && tb) {
            const int kk = A.cols();
            for (int i = 0; i < m; ++i) {
                const S* arow = &A.data[static_cast<std::size_t>(i) * kk];
                for (int j = 0; j < n; ++j) {
                    const S* brow = &B.data[static_cast<std::size_t>(j) * kk];
                    S acc = S(0);
                    for (int k = 0; k < kk; ++k) acc += arow[k] * brow[k];
                    C.data[static_cast<std::size_t>(i) * n + j] += acc;
                }
            }
        } else {  // ta && !tb
            const int kk = A.rows();
            for (int k = 0; k < kk; ++k) {
                const S* arow = &A.data[static_cast<std::size_t>(k) * m];
                const S* brow = &B.data[static_cast<std::size_t>(k) * n];
                for (int i = 0; i < m; ++i) {
                    const S aki = arow[i];
                    if (aki == S(0)) continue;
                    S* crow = &C.data[static_cast<std::size_t>(i) * n];
                    for (int j = 0; j < n; ++j) crow[j] += aki * brow[j];
                }
            }
        }
    }

    void accumulate(Node& n, TensorT<S> g) {
        if (!n.requires_grad) return;
        if (n.grad.data.empty()) {
            n.grad = std::move(g);
        } else {
            for (std::size_t i = 0; i < n.grad.data.size(); ++i) n.grad.data[i] += g.data[i];
        }
    }

    void add_ewise_grad(Id target, const TensorT<S>& g, const TensorT<S>& ref_other,
                        bool mul_by_other) {
        Node& t = nodes_[target];
        if (!t.requires_grad) return;
        const auto& tv = t.value;
        TensorT<S> out(tv.rows(), tv.cols());
        const bool same = g.same_shape(tv);
        for (int r = 0; r < g.rows(); ++r)
            for (int c = 0; c < g.cols(); ++c) {
                S gv = g.at(r, c);
                if (mul_by_other) {
                    const bool o_same = ref_other.same_shape(g);
                    const S ov = o_same ? ref_other.at(r, c)
                                        : (ref_other.numel() == 1 ? ref_other.data[0]
                                                                  : ref_other.at(0, c));
                    gv *= ov;
                }
                if (same) {
                    out.at(r, c) += gv;
                } else if (tv.numel() == 1) {
                    out.data[0] += gv;
                } else {
                    out.at(0, c) += gv;
                }
            }
        accumulate(t, std::move(out));
    }

    void step_backward(Node& n) {
        const TensorT<S>& g = n.grad;
        switch (n.op) {
            case Op::kMatmul: {
                Node& A = nodes_[n.a];
                Node& B = nodes_[n.b];
                if (A.requires_grad) {
                    TensorT<S> ga(A.value.rows(), A.value.cols());
                    if (!n.ta && !n.tb) mm(g, false, B.value, true, ga);
                    else if (!n.ta && n.tb) mm(g, false, B.value, false, ga);
                    else mm(B.value, false, g, true, ga);
                    accumulate(A, std::move(ga));
                }
                if (B.requires_grad) {
                    TensorT<S> gb(B.value.rows(), B.value.cols());
                    if (!n.ta && !n.tb) mm(A.value, true, g, false, gb);
                    else if (!n.ta && n.tb) mm(g, true, A.value, false, gb);
                    else mm(A.value, false, g, false, gb);
                    accumulate(B, std::move(gb));
                }
                break;
            }
            case Op::kAdd: {
                add_ewise_grad(n.a, g, nodes_[n.b].value, false);
                // Gradient w.r.t. b reduces over broadcast dimensions.
                {
                    Node& B = nodes_[n.b];
                    if (B.requires_grad) {
                        TensorT<S> gb(B.value.rows(), B.value.cols());
                        for (int r = 0; r < g.rows(); ++r)
                            for (int c = 0; c < g.cols(); ++c) {
                                if (B.value.same_shape(g)) gb.at(r, c) += g.at(r, c);
                                else if (B.value.numel() == 1) gb.data[0] += g.at(r, c);
                                else gb.at(0, c) += g.at(r, c);
                            }
                        accumulate(B, std::move(gb));
                    }
                }
                break;
            }
            case Op::kMul: {
                add_ewise_grad(n.a, g, nodes_[n.b].value, true);
                {
                    Node& B = nodes_[n.b];
                    if (B.requires_grad) {
                        const auto& A = nodes_[n.a].value;
                        TensorT<S> gb(B.value.rows(), B.value.cols());
                        for (int r = 0; r < g.rows(); ++r)
                            for (int c = 0; c < g.cols(); ++c) {
                                const S gv = g.at(r, c) * A.at(r, c);
                                if (B.value.same_shape(g)) gb.at(r, c) += gv;
                                else if (B.value.numel() == 1) gb.data[0] += gv;
                                else gb.at(0, c) += gv;
                            }
                        accumulate(B, std::move(gb));
                    }
                }
                break;
            }
            case Op::kRelu: {
                Node& A = nodes_[n.a];
                if (!A.requires_grad) break;
                TensorT<S> ga(A.value.rows(), A.value.cols());
                for (std::size_t i = 0; i < ga.data.size(); ++i)
                    ga.data[i] = A.value.data[i] > S(0) ? g.data[i] : S(0);
                accumulate(A, std::move(ga));
                break;
            }
            case Op::kGelu: {
                Node& A = nodes_[n.a];
                if (!A.requires_grad) break;
                TensorT<S> ga(A.value.rows(), A.value.cols());
                for (std::size_t i = 0; i < ga.data.size(); ++i)
                    ga.data[i] = g.data[i] * gelu_bwd(A.value.data[i]);
                accumulate(A, std::move(ga));
                break;
            }
            case Op::kSoftmax: {
                Node& A = nodes_[n.a];
                if (!A.requires_grad) break;
                const auto& y = n.value;
                TensorT<S> ga(y.rows(), y.cols());
                for (int r = 0; r < y.rows(); ++r) {
                    S dot = S(0);
                    for (int c = 0; c < y.cols(); ++c) dot += g.at(r, c) * y.at(r, c);
                    for (int c = 0; c < y.cols(); ++c)
                        ga.at(r, c) = y.at(r, c) * (g.at(r, c) - dot);
                }
                accumulate(A, std::move(ga));
                break;
            }
            case Op::kLayernorm: {
                Node& A = nodes_[n.a];
                if (!A.requires_grad) break;
                const int cols = n.value.cols();
                TensorT<S> ga(n.value.rows(), cols);
                for (int r = 0; r < n.value.rows(); ++r) {
                    const S inv = n.saved[2 * r + 1];
                    S gmean = S(0), gxmean = S(0);
                    for (int c = 0; c < cols; ++c) {
                        gmean += g.at(r, c);
                        gxmean += g.at(r, c) * n.value.at(r, c);
                    }
                    gmean /= cols;
                    gxmean /= cols;
                    for (int c = 0; c < cols; ++c)
                        ga.at(r, c) = inv * (g.at(r, c) - gmean - n.value.at(r, c) * gxmean);
                }
                accumulate(A, std::move(ga));
                break;
            }
            case Op::kConcatRows: {
                Node& A = nodes_[n.a];
                Node& B = nodes_[n.b];
                if (A.requires_grad) {
                    TensorT<S> ga(A.value.rows(), A.value.cols());
                    std::copy(g.data.begin(), g.data.begin() + ga.data.size(), ga.data.begin());
                    accumulate(A, std::move(ga));
                }
                if (B.requires_grad) {
                    TensorT<S> gb(B.value.rows(), B.value.cols());
                    std::copy(g.data.begin() + A.value.data.size(), g.data.end(),
                              gb.data.begin());
                    accumulate(B, std::move(gb));
                }
                break;
            }
            case Op::kConcatCols: {
                Node& A = nodes_[n.a];
                Node& B = nodes_[n.b];
                const int ac = A.value.cols();
                if (A.requires_grad) {
                    TensorT<S> ga(A.value.rows(), ac);
                    for (int r = 0; r < g.rows(); ++r)
                        for (int c = 0; c < ac; ++c) ga.at(r, c) = g.at(r, c);
                    accumulate(A, std::move(ga));
                }
                if (B.requires_grad) {
                    TensorT<S> gb(B.value.rows(), B.value.cols());
                    for (int r = 0; r < g.rows(); ++r)
                        for (int c = 0; c < gb.cols(); ++c) gb.at(r, c) = g.at(r, ac + c);
                    accumulate(B, std::move(gb));
                }
                break;
            }
            case Op::kSliceRows: {
                Node& A = nodes_[n.a];
                if (!A.requires_grad) break;
                TensorT<S> ga(A.value.rows(), A.value.cols());
                for (int r = n.i0; r < n.i1; ++r)
                    for (int c = 0; c < ga.cols(); ++c) ga.at(r, c) = g.at(r - n.i0, c);
                accumulate(A, std::move(ga));
                break;
            }
            case Op::kSliceCols: {
                Node& A = nodes_[n.a];
                if (!A.requires_grad) break;
                TensorT<S> ga(A.value.rows(), A.value.cols());
                for (int r = 0; r < ga.rows(); ++r)
                    for (int c = n.i0; c < n.i1; ++c) ga.at(r, c) = g.at(r, c - n.i0);
                accumulate(A, std::move(ga));
                break;
            }
            case Op::kScale: {
                Node& A = nodes_[n.a];
                if (!A.requires_grad) break;
                TensorT<S> ga = g;
                for (auto& v : ga.data) v *= n.k;
                accumulate(A, std::move(ga));
                break;
            }
            case Op::kSum:
            case Op::kMean: {
                Node& A = nodes_[n.a];
                if (!A.requires_grad) break;
                const S w = n.op == Op::kMean ? g.data[0] / static_cast<S>(A.value.numel())
                                              : g.data[0];
                TensorT<S> ga(A.value.rows(), A.value.cols(), w);
                accumulate(A, std::move(ga));
                break;
            }
            case Op::kSse: {
                Node& A = nodes_[n.a];
                Node& B = nodes_[n.b];
                const S g0 = g.data[0];
                if (A.requires_grad) {
                    TensorT<S> ga(A.value.rows(), A.value.cols());
                    for (std::size_t i = 0; i < ga.data.size(); ++i)
                        ga.data[i] = S(2) * g0 * (A.value.data[i] - B.value.data[i]);
                    accumulate(A, std::move(ga));
                }
                if (B.requires_grad) {
                    TensorT<S> gb(B.value.rows(), B.value.cols());
                    for (std::size_t i = 0; i < gb.data.size(); ++i)
                        gb.data[i] = S(-2) * g0 * (A.value.data[i] - B.value.data[i]);
                    accumulate(B, std::move(gb));
                }
                break;
            }
            case Op::kLeaf:
                break;
        }
    }
};

using Graph = GraphT<float>;

/// Xavier-normal initialized matrix.
template <typename S>
TensorT<S> xavier_init(int rows, int cols, Rng& rng) {
    TensorT<S> t(rows, cols);
    const double std = std::sqrt(2.0 / (rows + cols));
    for (auto& v : t.data) v = static_cast<S>(rng.normal() * std);
    return t;
}

}  // namespace csf::ad
