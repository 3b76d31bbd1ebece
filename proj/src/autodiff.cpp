// Copyright 2026 The qlatent Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qlatent/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include <Eigen/Dense>

namespace qlatent::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require_same_shape(const Tensor &a, const Tensor &b, const char *op) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    }
}

void require_rank(const Tensor &a, std::size_t rank, const char *op) {
    if (a.rank() != rank) {
        throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                    ", got shape " + shape_str(a.shape()));
    }
}

Node &parent(Node &self, std::size_t i) { return *self.parents[i]; }

// Elementwise unary op helper: f gives the value, df(x, y) the local derivative.
template <class F, class DF>
Tensor unary(const Tensor &a, F f, DF df) {
    const auto in = a.data();
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
    return make_result(a.shape(), std::move(out), {a}, [df](Node &self) {
        Node &p = parent(self, 0);
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            p.grad[i] += self.grad[i] * df(p.data[i], self.data[i]);
        }
    });
}

} // namespace

std::size_t shape_numel(const Shape &shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape &shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

void Node::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const auto n = shape_numel(shape);
    return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from_data({}, {value}); }

const Shape &Tensor::shape() const {
    if (!node_) throw std::logic_error("undefined tensor");
    return node_->shape;
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::data() const {
    if (!node_) throw std::logic_error("undefined tensor");
    return node_->data;
}

std::span<double> Tensor::mutable_data() {
    if (!node_) throw std::logic_error("undefined tensor");
    return node_->data;
}

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->data.size(); }

std::span<const double> Tensor::grad() const {
    if (!has_grad()) throw std::logic_error("tensor has no gradient");
    return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
    if (!node_) throw std::logic_error("undefined tensor");
    node_->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
    if (!node_) throw std::logic_error("undefined tensor");
    node_->requires_grad = flag;
}

double Tensor::item() const {
    if (numel() != 1) throw std::invalid_argument("item() needs a single-element tensor");
    return node_->data[0];
}

Tensor Tensor::detach() const { return from_data(shape(), std::vector<double>(data().begin(), data().end())); }

Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                   std::function<void(Node &)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    const bool needs = std::any_of(parents.begin(), parents.end(),
                                   [](const Tensor &t) { return t.requires_grad(); });
    if (needs) {
        node->requires_grad = true;
        for (auto &p : parents) node->parents.push_back(p.node());
        node->backward = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

void backward(const Tensor &loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw std::invalid_argument("backward() needs a scalar loss");
    }
    if (!loss.requires_grad()) return;

    // Iterative DFS; state 1 = on stack, 2 = finished.
    std::vector<Node *> order;
    std::unordered_map<Node *, int> state;
    std::vector<std::pair<Node *, std::size_t>> stack{{loss.node().get(), 0}};
    state[loss.node().get()] = 1;
    while (!stack.empty()) {
        auto &[node, next] = stack.back();
        if (next < node->parents.size()) {
            Node *p = node->parents[next++].get();
            if (!p->requires_grad) continue;
            auto it = state.find(p);
            if (it == state.end()) {
                state[p] = 1;
                stack.emplace_back(p, 0);
            } else if (it->second == 1) {
                throw std::logic_error("cycle detected in the computation record");
            }
        } else {
            state[node] = 2;
            order.push_back(node);
            stack.pop_back();
        }
    }

    Node *root = loss.node().get();
    root->ensure_grad();
    root->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node *n = *it;
        if (n->backward && n->grad.size() == n->data.size()) n->backward(*n);
    }
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor &a, const Tensor &b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    const auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node &self) {
        for (std::size_t k = 0; k < 2; ++k) {
            Node &p = parent(self, k);
            if (!p.requires_grad) continue;
            p.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor &a, const Tensor &b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    const auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node &self) {
        for (std::size_t k = 0; k < 2; ++k) {
            Node &p = parent(self, k);
            if (!p.requires_grad) continue;
            p.ensure_grad();
            const double sign = k == 0 ? 1.0 : -1.0;
            for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += sign * self.grad[i];
        }
    });
}

Tensor mul(const Tensor &a, const Tensor &b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    const auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node &self) {
        Node &pa = parent(self, 0), &pb = parent(self, 1);
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.data[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.data[i];
        }
    });
}

Tensor div(const Tensor &a, const Tensor &b) {
    require_same_shape(a, b, "div");
    std::vector<double> out(a.numel());
    const auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] / y[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node &self) {
        Node &pa = parent(self, 0), &pb = parent(self, 1);
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] / pb.data[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pb.grad[i] -= self.grad[i] * self.data[i] / pb.data[i];
        }
    });
}

Tensor scale(const Tensor &a, double s) {
    return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor &a, double s) {
    return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor square(const Tensor &a) {
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor abs(const Tensor &a) {
    return unary(a, [](double x) { return std::abs(x); },
                 [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor exp(const Tensor &a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor sigmoid(const Tensor &a) {
    return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                 [](double, double y) { return y * (1.0 - y); });
}

Tensor silu(const Tensor &a) {
    return unary(a, [](double x) { return x / (1.0 + std::exp(-x)); },
                 [](double x, double) {
                     const double s = 1.0 / (1.0 + std::exp(-x));
                     return s * (1.0 + x * (1.0 - s));
                 });
}

Tensor clamp(const Tensor &a, double lo, double hi) {
    return unary(a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
                 [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Reductions and shape

Tensor sum(const Tensor &a) {
    double s = 0.0;
    for (double x : a.data()) s += x;
    return make_result({}, {s}, {a}, [](Node &self) {
        Node &p = parent(self, 0);
        p.ensure_grad();
        for (auto &g : p.grad) g += self.grad[0];
    });
}

Tensor mean(const Tensor &a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor reshape(const Tensor &a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw std::invalid_argument("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
    }
    return make_result(std::move(shape), std::vector<double>(a.data().begin(), a.data().end()), {a},
                       [](Node &self) {
                           Node &p = parent(self, 0);
                           p.ensure_grad();
                           for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
                       });
}

// ---------------------------------------------------------------------------
// Dense

Tensor matmul(const Tensor &x, const Tensor &w) {
    require_rank(x, 2, "matmul");
    require_rank(w, 2, "matmul");
    if (x.dim(1) != w.dim(0)) {
        throw std::invalid_argument("matmul: inner dimensions differ " + shape_str(x.shape()) + " x " +
                                    shape_str(w.shape()));
    }
    const auto B = static_cast<Eigen::Index>(x.dim(0)), I = static_cast<Eigen::Index>(x.dim(1)),
               O = static_cast<Eigen::Index>(w.dim(1));
    std::vector<double> out(static_cast<std::size_t>(B * O));
    MapMat(out.data(), B, O).noalias() = ConstMapMat(x.data().data(), B, I) * ConstMapMat(w.data().data(), I, O);
    return make_result({x.dim(0), w.dim(1)}, std::move(out), {x, w}, [B, I, O](Node &self) {
        Node &px = parent(self, 0), &pw = parent(self, 1);
        ConstMapMat g(self.grad.data(), B, O);
        if (px.requires_grad) {
            px.ensure_grad();
            MapMat(px.grad.data(), B, I).noalias() += g * ConstMapMat(pw.data.data(), I, O).transpose();
        }
        if (pw.requires_grad) {
            pw.ensure_grad();
            MapMat(pw.grad.data(), I, O).noalias() += ConstMapMat(px.data.data(), B, I).transpose() * g;
        }
    });
}

Tensor add_row_bias(const Tensor &x, const Tensor &bias) {
    require_rank(x, 2, "add_row_bias");
    if (bias.numel() != x.dim(1)) {
        throw std::invalid_argument("add_row_bias: bias length does not match columns");
    }
    const std::size_t B = x.dim(0), O = x.dim(1);
    std::vector<double> out(x.data().begin(), x.data().end());
    const auto b = bias.data();
    for (std::size_t r = 0; r < B; ++r)
        for (std::size_t c = 0; c < O; ++c) out[r * O + c] += b[c];
    return make_result(x.shape(), std::move(out), {x, bias}, [B, O](Node &self) {
        Node &px = parent(self, 0), &pb = parent(self, 1);
        if (px.requires_grad) {
            px.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (std::size_t r = 0; r < B; ++r)
                for (std::size_t c = 0; c < O; ++c) pb.grad[c] += self.grad[r * O + c];
        }
    });
}

// ---------------------------------------------------------------------------
// Convolution

namespace {

struct ConvGeom {
    std::size_t N, C, H, W, O, k, Ho, Wo;
    int stride, pad;
    [[nodiscard]] std::size_t ckk() const { return C * k * k; }
    [[nodiscard]] std::size_t hw_out() const { return Ho * Wo; }
};

// cols[(c*k + ky)*k + kx][oy*Wo + ox] for one image.
void im2col(const double *img, const ConvGeom &g, double *cols) {
    const std::size_t hw = g.hw_out();
    for (std::size_t c = 0; c < g.C; ++c) {
        for (std::size_t ky = 0; ky < g.k; ++ky) {
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                double *row = cols + ((c * g.k + ky) * g.k + kx) * hw;
                for (std::size_t oy = 0; oy < g.Ho; ++oy) {
                    const long iy = static_cast<long>(oy) * g.stride + static_cast<long>(ky) - g.pad;
                    for (std::size_t ox = 0; ox < g.Wo; ++ox) {
                        const long ix = static_cast<long>(ox) * g.stride + static_cast<long>(kx) - g.pad;
                        row[oy * g.Wo + ox] =
                            (iy >= 0 && iy < static_cast<long>(g.H) && ix >= 0 && ix < static_cast<long>(g.W))
                                ? img[(c * g.H + static_cast<std::size_t>(iy)) * g.W + static_cast<std::size_t>(ix)]
                                : 0.0;
                    }
                }
            }
        }
    }
}

void col2im(const double *cols, const ConvGeom &g, double *img) {
    const std::size_t hw = g.hw_out();
    for (std::size_t c = 0; c < g.C; ++c) {
        for (std::size_t ky = 0; ky < g.k; ++ky) {
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                const double *row = cols + ((c * g.k + ky) * g.k + kx) * hw;
                for (std::size_t oy = 0; oy < g.Ho; ++oy) {
                    const long iy = static_cast<long>(oy) * g.stride + static_cast<long>(ky) - g.pad;
                    if (iy < 0 || iy >= static_cast<long>(g.H)) continue;
                    for (std::size_t ox = 0; ox < g.Wo; ++ox) {
                        const long ix = static_cast<long>(ox) * g.stride + static_cast<long>(kx) - g.pad;
                        if (ix < 0 || ix >= static_cast<long>(g.W)) continue;
                        img[(c * g.H + static_cast<std::size_t>(iy)) * g.W + static_cast<std::size_t>(ix)] +=
                            row[oy * g.Wo + ox];
                    }
                }
            }
        }
    }
}

} // namespace

Tensor conv2d(const Tensor &x, const Tensor &weight, const Tensor &bias, int stride, int padding) {
    require_rank(x, 4, "conv2d");
    require_rank(weight, 4, "conv2d weight");
    if (weight.dim(1) != x.dim(1) || weight.dim(2) != weight.dim(3)) {
        throw std::invalid_argument("conv2d: weight " + shape_str(weight.shape()) +
                                    " incompatible with input " + shape_str(x.shape()));
    }
    if (stride < 1 || padding < 0) {
        throw std::invalid_argument("conv2d: invalid stride/padding");
    }
    if (bias.defined() && bias.numel() != weight.dim(0)) {
        throw std::invalid_argument("conv2d: bias length does not match output channels");
    }
    ConvGeom g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(0), weight.dim(2), 0, 0, stride, padding};
    const long span_h = static_cast<long>(g.H) + 2 * padding - static_cast<long>(g.k);
    const long span_w = static_cast<long>(g.W) + 2 * padding - static_cast<long>(g.k);
    if (span_h < 0 || span_w < 0) {
        throw std::invalid_argument("conv2d: kernel larger than padded input");
    }
    g.Ho = static_cast<std::size_t>(span_h / stride + 1);
    g.Wo = static_cast<std::size_t>(span_w / stride + 1);

    const auto O = static_cast<Eigen::Index>(g.O), CKK = static_cast<Eigen::Index>(g.ckk()),
               HW = static_cast<Eigen::Index>(g.hw_out());
    std::vector<double> out(g.N * g.O * g.hw_out());
    std::vector<double> cols(g.ckk() * g.hw_out());
    ConstMapMat wmat(weight.data().data(), O, CKK);
    const std::size_t in_stride = g.C * g.H * g.W;
    for (std::size_t n = 0; n < g.N; ++n) {
        im2col(x.data().data() + n * in_stride, g, cols.data());
        MapMat o(out.data() + n * g.O * g.hw_out(), O, HW);
        o.noalias() = wmat * ConstMapMat(cols.data(), CKK, HW);
        if (bias.defined()) {
            const auto b = bias.data();
            for (Eigen::Index r = 0; r < O; ++r) o.row(r).array() += b[static_cast<std::size_t>(r)];
        }
    }

    std::vector<Tensor> parents{x, weight};
    const bool has_bias = bias.defined();
    if (has_bias) parents.push_back(bias);
    return make_result({g.N, g.O, g.Ho, g.Wo}, std::move(out), std::move(parents),
                       [g, has_bias, O, CKK, HW, in_stride](Node &self) {
                           Node &px = parent(self, 0), &pw = parent(self, 1);
                           std::vector<double> cols(g.ckk() * g.hw_out());
                           std::vector<double> dcols(pw.requires_grad || px.requires_grad ? cols.size() : 0);
                           if (px.requires_grad) px.ensure_grad();
                           if (pw.requires_grad) pw.ensure_grad();
                           ConstMapMat wmat(pw.data.data(), O, CKK);
                           for (std::size_t n = 0; n < g.N; ++n) {
                               ConstMapMat go(self.grad.data() + n * g.O * g.hw_out(), O, HW);
                               if (pw.requires_grad) {
                                   im2col(px.data.data() + n * in_stride, g, cols.data());
                                   MapMat(pw.grad.data(), O, CKK).noalias() +=
                                       go * ConstMapMat(cols.data(), CKK, HW).transpose();
                               }
                               if (px.requires_grad) {
                                   MapMat(dcols.data(), CKK, HW).noalias() = wmat.transpose() * go;
                                   col2im(dcols.data(), g, px.grad.data() + n * in_stride);
                               }
                           }
                           if (has_bias) {
                               Node &pb = parent(self, 2);
                               if (pb.requires_grad) {
                                   pb.ensure_grad();
                                   for (std::size_t n = 0; n < g.N; ++n)
                                       for (std::size_t o = 0; o < g.O; ++o) {
                                           const double *row = self.grad.data() + (n * g.O + o) * g.hw_out();
                                           double s = 0;
                                           for (std::size_t i = 0; i < g.hw_out(); ++i) s += row[i];
                                           pb.grad[o] += s;
                                       }
                               }
                           }
                       });
}

// ---------------------------------------------------------------------------
// Normalization and resampling

Tensor group_norm(const Tensor &x, const Tensor &gamma, const Tensor &beta, int groups, double eps) {
    require_rank(x, 4, "group_norm");
    const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    if (groups < 1 || C % static_cast<std::size_t>(groups) != 0) {
        throw std::invalid_argument("group_norm: channels not divisible by groups");
    }
    if (gamma.numel() != C || beta.numel() != C) {
        throw std::invalid_argument("group_norm: affine parameters must have one entry per channel");
    }
    const std::size_t G = static_cast<std::size_t>(groups), cg = C / G, M = cg * HW;
    const auto in = x.data(), ga = gamma.data(), be = beta.data();
    std::vector<double> out(in.size()), xhat(in.size()), inv_std(N * G);
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t gi = 0; gi < G; ++gi) {
            const std::size_t base = (n * C + gi * cg) * HW;
            double mu = 0;
            for (std::size_t i = 0; i < M; ++i) mu += in[base + i];
            mu /= static_cast<double>(M);
            double var = 0;
            for (std::size_t i = 0; i < M; ++i) var += (in[base + i] - mu) * (in[base + i] - mu);
            var /= static_cast<double>(M);
            const double is = 1.0 / std::sqrt(var + eps);
            inv_std[n * G + gi] = is;
            for (std::size_t i = 0; i < M; ++i) {
                const std::size_t c = gi * cg + i / HW;
                xhat[base + i] = (in[base + i] - mu) * is;
                out[base + i] = ga[c] * xhat[base + i] + be[c];
            }
        }
    }
    return make_result(x.shape(), std::move(out), {x, gamma, beta},
                       [N, C, HW, G, cg, M, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node &self) {
                           Node &px = parent(self, 0), &pg = parent(self, 1), &pb = parent(self, 2);
                           if (pg.requires_grad) pg.ensure_grad();
                           if (pb.requires_grad) pb.ensure_grad();
                           if (px.requires_grad) px.ensure_grad();
                           for (std::size_t n = 0; n < N; ++n) {
                               for (std::size_t gi = 0; gi < G; ++gi) {
                                   const std::size_t base = (n * C + gi * cg) * HW;
                                   double sum_dxh = 0, sum_dxh_xh = 0;
                                   for (std::size_t i = 0; i < M; ++i) {
                                       const std::size_t c = gi * cg + i / HW;
                                       const double gy = self.grad[base + i];
                                       if (pg.requires_grad) pg.grad[c] += gy * xhat[base + i];
                                       if (pb.requires_grad) pb.grad[c] += gy;
                                       const double dxh = gy * pg.data[c];
                                       sum_dxh += dxh;
                                       sum_dxh_xh += dxh * xhat[base + i];
                                   }
                                   if (!px.requires_grad) continue;
                                   const double is = inv_std[n * G + gi];
                                   const double invM = 1.0 / static_cast<double>(M);
                                   for (std::size_t i = 0; i < M; ++i) {
                                       const std::size_t c = gi * cg + i / HW;
                                       const double dxh = self.grad[base + i] * pg.data[c];
                                       px.grad[base + i] +=
                                           is * (dxh - invM * sum_dxh - xhat[base + i] * invM * sum_dxh_xh);
                                   }
                               }
                           }
                       });
}

Tensor upsample_nearest2x(const Tensor &x) {
    require_rank(x, 4, "upsample_nearest2x");
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const auto in = x.data();
    std::vector<double> out(N * C * 4 * H * W);
    for (std::size_t nc = 0; nc < N * C; ++nc)
        for (std::size_t y = 0; y < 2 * H; ++y)
            for (std::size_t xx = 0; xx < 2 * W; ++xx)
                out[(nc * 2 * H + y) * 2 * W + xx] = in[(nc * H + y / 2) * W + xx / 2];
    return make_result({N, C, 2 * H, 2 * W}, std::move(out), {x}, [N, C, H, W](Node &self) {
        Node &p = parent(self, 0);
        p.ensure_grad();
        for (std::size_t nc = 0; nc < N * C; ++nc)
            for (std::size_t y = 0; y < 2 * H; ++y)
                for (std::size_t xx = 0; xx < 2 * W; ++xx)
                    p.grad[(nc * H + y / 2) * W + xx / 2] += self.grad[(nc * 2 * H + y) * 2 * W + xx];
    });
}

Tensor avg_pool2d(const Tensor &x, int k, int stride) {
    require_rank(x, 4, "avg_pool2d");
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const auto K = static_cast<std::size_t>(k), S = static_cast<std::size_t>(stride);
    if (k < 1 || stride < 1 || K > H || K > W) {
        throw std::invalid_argument("avg_pool2d: window larger than input");
    }
    const std::size_t Ho = (H - K) / S + 1, Wo = (W - K) / S + 1;
    const double inv = 1.0 / static_cast<double>(K * K);
    const auto in = x.data();
    std::vector<double> out(N * C * Ho * Wo, 0.0);
    for (std::size_t nc = 0; nc < N * C; ++nc)
        for (std::size_t oy = 0; oy < Ho; ++oy)
            for (std::size_t ox = 0; ox < Wo; ++ox) {
                double s = 0;
                for (std::size_t dy = 0; dy < K; ++dy)
                    for (std::size_t dx = 0; dx < K; ++dx) s += in[(nc * H + oy * S + dy) * W + ox * S + dx];
                out[(nc * Ho + oy) * Wo + ox] = s * inv;
            }
    return make_result({N, C, Ho, Wo}, std::move(out), {x}, [N, C, H, W, K, S, Ho, Wo, inv](Node &self) {
        Node &p = parent(self, 0);
        p.ensure_grad();
        for (std::size_t nc = 0; nc < N * C; ++nc)
            for (std::size_t oy = 0; oy < Ho; ++oy)
                for (std::size_t ox = 0; ox < Wo; ++ox) {
                    const double g = self.grad[(nc * Ho + oy) * Wo + ox] * inv;
                    for (std::size_t dy = 0; dy < K; ++dy)
                        for (std::size_t dx = 0; dx < K; ++dx) p.grad[(nc * H + oy * S + dy) * W + ox * S + dx] += g;
                }
    });
}

Tensor global_avg_pool(const Tensor &x) {
    require_rank(x, 4, "global_avg_pool");
    const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    const auto in = x.data();
    std::vector<double> out(N * C, 0.0);
    for (std::size_t nc = 0; nc < N * C; ++nc) {
        double s = 0;
        for (std::size_t i = 0; i < HW; ++i) s += in[nc * HW + i];
        out[nc] = s / static_cast<double>(HW);
    }
    return make_result({N, C}, std::move(out), {x}, [N, C, HW](Node &self) {
        Node &p = parent(self, 0);
        p.ensure_grad();
        for (std::size_t nc = 0; nc < N * C; ++nc) {
            const double g = self.grad[nc] / static_cast<double>(HW);
            for (std::size_t i = 0; i < HW; ++i) p.grad[nc * HW + i] += g;
        }
    });
}

Tensor add_channel_bias(const Tensor &x, const Tensor &v) {
    require_rank(x, 4, "add_channel_bias");
    require_rank(v, 2, "add_channel_bias");
    const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    if (v.dim(0) != N || v.dim(1) != C) {
        throw std::invalid_argument("add_channel_bias: vector " + shape_str(v.shape()) +
                                    " does not match " + shape_str(x.shape()));
    }
    std::vector<double> out(x.data().begin(), x.data().end());
    const auto vb = v.data();
    for (std::size_t nc = 0; nc < N * C; ++nc)
        for (std::size_t i = 0; i < HW; ++i) out[nc * HW + i] += vb[nc];
    return make_result(x.shape(), std::move(out), {x, v}, [N, C, HW](Node &self) {
        Node &px = parent(self, 0), &pv = parent(self, 1);
        if (px.requires_grad) {
            px.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
        }
        if (pv.requires_grad) {
            pv.ensure_grad();
            for (std::size_t nc = 0; nc < N * C; ++nc) {
                double s = 0;
                for (std::size_t i = 0; i < HW; ++i) s += self.grad[nc * HW + i];
                pv.grad[nc] += s;
            }
        }
    });
}

Tensor concat_channels(const Tensor &a, const Tensor &b) {
    require_rank(a, 4, "concat_channels");
    require_rank(b, 4, "concat_channels");
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
        throw std::invalid_argument("concat_channels: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    const std::size_t N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), HW = a.dim(2) * a.dim(3);
    std::vector<double> out(N * (Ca + Cb) * HW);
    const auto da = a.data(), db = b.data();
    for (std::size_t n = 0; n < N; ++n) {
        std::copy_n(da.begin() + static_cast<long>(n * Ca * HW), Ca * HW, out.begin() + static_cast<long>(n * (Ca + Cb) * HW));
        std::copy_n(db.begin() + static_cast<long>(n * Cb * HW), Cb * HW,
                    out.begin() + static_cast<long>((n * (Ca + Cb) + Ca) * HW));
    }
    return make_result({N, Ca + Cb, a.dim(2), a.dim(3)}, std::move(out), {a, b}, [N, Ca, Cb, HW](Node &self) {
        Node &pa = parent(self, 0), &pb = parent(self, 1);
        for (std::size_t n = 0; n < N; ++n) {
            const double *g = self.grad.data() + n * (Ca + Cb) * HW;
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (std::size_t i = 0; i < Ca * HW; ++i) pa.grad[n * Ca * HW + i] += g[i];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (std::size_t i = 0; i < Cb * HW; ++i) pb.grad[n * Cb * HW + i] += g[Ca * HW + i];
            }
        }
    });
}

Tensor slice_channels(const Tensor &x, std::size_t start, std::size_t count) {
    require_rank(x, 4, "slice_channels");
    const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    if (start + count > C || count == 0) {
        throw std::invalid_argument("slice_channels: range outside the channel dimension");
    }
    std::vector<double> out(N * count * HW);
    const auto d = x.data();
    for (std::size_t n = 0; n < N; ++n)
        std::copy_n(d.begin() + static_cast<long>((n * C + start) * HW), count * HW,
                    out.begin() + static_cast<long>(n * count * HW));
    return make_result({N, count, x.dim(2), x.dim(3)}, std::move(out), {x}, [N, C, HW, start, count](Node &self) {
        Node &p = parent(self, 0);
        p.ensure_grad();
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t i = 0; i < count * HW; ++i) p.grad[(n * C + start) * HW + i] += self.grad[n * count * HW + i];
    });
}

} // namespace qlatent::ad
