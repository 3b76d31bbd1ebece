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

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

/**
 * @file autodiff.hpp
 * Minimal reverse-mode automatic differentiation over dense row-major
 * double tensors. Every op records its parents and a backward closure when
 * at least one input requires a gradient; otherwise the result is a plain
 * constant.
 */
namespace qlatent::ad {

using Shape = std::vector<std::size_t>;

[[nodiscard]] std::size_t shape_numel(const Shape &shape);
[[nodiscard]] std::string shape_str(const Shape &shape);

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    /// Reads `self.grad` and accumulates into the parents' grads.
    std::function<void(Node &self)> backward;

    void ensure_grad();
};

class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value);

    [[nodiscard]] bool defined() const noexcept { return node_ != nullptr; }
    [[nodiscard]] const Shape &shape() const;
    [[nodiscard]] std::size_t dim(std::size_t i) const { return shape().at(i); }
    [[nodiscard]] std::size_t rank() const { return shape().size(); }
    [[nodiscard]] std::size_t numel() const;

    [[nodiscard]] std::span<const double> data() const;
    /// Direct write access; only meaningful for leaves (parameters, inputs).
    [[nodiscard]] std::span<double> mutable_data();
    [[nodiscard]] bool has_grad() const;
    [[nodiscard]] std::span<const double> grad() const;
    [[nodiscard]] std::span<double> mutable_grad();
    void zero_grad();

    [[nodiscard]] bool requires_grad() const;
    void set_requires_grad(bool flag);

    [[nodiscard]] double item() const;
    /// Copy of the values with no graph attached.
    [[nodiscard]] Tensor detach() const;

    [[nodiscard]] const std::shared_ptr<Node> &node() const noexcept { return node_; }
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  private:
    std::shared_ptr<Node> node_;
};

/// Reverse-mode accumulation from a scalar. Throws std::logic_error on a cycle.
void backward(const Tensor &loss);

/// Builds a result tensor; parents/backward are dropped if no parent needs grad.
[[nodiscard]] Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                                 std::function<void(Node &)> backward_fn);

// Elementwise (identical shapes).
[[nodiscard]] Tensor add(const Tensor &a, const Tensor &b);
[[nodiscard]] Tensor sub(const Tensor &a, const Tensor &b);
[[nodiscard]] Tensor mul(const Tensor &a, const Tensor &b);
[[nodiscard]] Tensor div(const Tensor &a, const Tensor &b);
[[nodiscard]] Tensor scale(const Tensor &a, double s);
[[nodiscard]] Tensor add_scalar(const Tensor &a, double s);
[[nodiscard]] Tensor square(const Tensor &a);
[[nodiscard]] Tensor abs(const Tensor &a);
[[nodiscard]] Tensor exp(const Tensor &a);
[[nodiscard]] Tensor silu(const Tensor &a);
[[nodiscard]] Tensor sigmoid(const Tensor &a);
/// Clamps into [lo, hi]; gradient passes only where the input is inside.
[[nodiscard]] Tensor clamp(const Tensor &a, double lo, double hi);

inline Tensor operator+(const Tensor &a, const Tensor &b) { return add(a, b); }
inline Tensor operator-(const Tensor &a, const Tensor &b) { return sub(a, b); }
inline Tensor operator*(const Tensor &a, const Tensor &b) { return mul(a, b); }
inline Tensor operator*(const Tensor &a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor &a) { return scale(a, s); }

// Reductions to a scalar.
[[nodiscard]] Tensor sum(const Tensor &a);
[[nodiscard]] Tensor mean(const Tensor &a);

[[nodiscard]] Tensor reshape(const Tensor &a, Shape shape);

/// [B, in] x [in, out] -> [B, out].
[[nodiscard]] Tensor matmul(const Tensor &x, const Tensor &w);
/// Adds bias[out] to every row of [B, out].
[[nodiscard]] Tensor add_row_bias(const Tensor &x, const Tensor &bias);

/**
 * NCHW convolution with square kernel `weight` [O, C, k, k], optional bias
 * [O], given stride and zero padding.
 */
[[nodiscard]] Tensor conv2d(const Tensor &x, const Tensor &weight, const Tensor &bias, int stride,
                            int padding);
/// Group normalization with per-channel affine [C] parameters.
[[nodiscard]] Tensor group_norm(const Tensor &x, const Tensor &gamma, const Tensor &beta, int groups,
                                double eps = 1e-5);
[[nodiscard]] Tensor upsample_nearest2x(const Tensor &x);
/// Window mean with square window `k` and `stride`, no padding.
[[nodiscard]] Tensor avg_pool2d(const Tensor &x, int k, int stride);
/// [N, C, H, W] -> [N, C] spatial mean.
[[nodiscard]] Tensor global_avg_pool(const Tensor &x);
/// x[N, C, H, W] + v[N, C] broadcast over space.
[[nodiscard]] Tensor add_channel_bias(const Tensor &x, const Tensor &v);
[[nodiscard]] Tensor concat_channels(const Tensor &a, const Tensor &b);
[[nodiscard]] Tensor slice_channels(const Tensor &x, std::size_t start, std::size_t count);

} // namespace qlatent::ad
