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

#include "qlatent/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <vector>

namespace qlatent::metrics {

namespace {

Eigen::VectorXd column_mean(const Matrix &m) { return m.colwise().mean().transpose(); }

Matrix covariance(const Matrix &m) {
    const Matrix centered = m.rowwise() - m.colwise().mean();
    return centered.transpose() * centered / static_cast<double>(m.rows() - 1);
}

// Symmetric PSD square root with eigenvalues clipped at zero.
Matrix sqrt_psd(const Matrix &s) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.transpose()));
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Matrix squared_distances(const Matrix &a, const Matrix &b) {
    const Eigen::VectorXd na = a.rowwise().squaredNorm(), nb = b.rowwise().squaredNorm();
    Matrix d = (-2.0 * a * b.transpose()).colwise() + na;
    d.rowwise() += nb.transpose();
    return d.cwiseMax(0.0);
}

double kernel_mean(const Matrix &a, const Matrix &b, double sigma, bool exclude_diagonal) {
    const Matrix k = (-squared_distances(a, b) / (2.0 * sigma * sigma)).array().exp().matrix();
    if (!exclude_diagonal) return k.mean();
    const double n = static_cast<double>(a.rows());
    return (k.sum() - k.trace()) / (n * (n - 1.0));
}

// Distance from each row to its k-th nearest other row of the same set.
Eigen::VectorXd knn_radii(const Matrix &m, int k) {
    const Matrix d = squared_distances(m, m);
    Eigen::VectorXd r(m.rows());
    std::vector<double> row(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        row.clear();
        for (Eigen::Index j = 0; j < m.rows(); ++j)
            if (j != i) row.push_back(d(i, j));
        std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
        r(i) = std::sqrt(row[static_cast<std::size_t>(k - 1)]);
    }
    return r;
}

// Fraction of `query` rows within some ball of the `support` manifold.
double coverage(const Matrix &support, const Eigen::VectorXd &radii, const Matrix &query) {
    const Matrix d = squared_distances(query, support).cwiseSqrt();
    std::size_t inside = 0;
    for (Eigen::Index i = 0; i < query.rows(); ++i) {
        for (Eigen::Index j = 0; j < support.rows(); ++j) {
            if (d(i, j) <= radii(j)) {
                ++inside;
                break;
            }
        }
    }
    return static_cast<double>(inside) / static_cast<double>(query.rows());
}

} // namespace

double frechet_distance(const Matrix &real, const Matrix &gen) {
    if (real.cols() != gen.cols() || real.cols() == 0) throw std::invalid_argument("frechet: feature dims differ");
    const Eigen::Index dim = real.cols();
    if (real.rows() < dim + 1 || gen.rows() < dim + 1) {
        throw std::invalid_argument("frechet: need at least dim+1 = " + std::to_string(dim + 1) + " rows per set");
    }
    const Matrix ridge = kFrechetRidge * Matrix::Identity(dim, dim);
    const Matrix s1 = covariance(real) + ridge, s2 = covariance(gen) + ridge;
    const Matrix a = sqrt_psd(s1);
    const Matrix cross = sqrt_psd(a * s2 * a);
    const double value = (column_mean(real) - column_mean(gen)).squaredNorm() + s1.trace() + s2.trace() -
                         2.0 * cross.trace();
    return std::max(value, 0.0);
}

double cmmd_rbf(const Matrix &x, const Matrix &y, double sigma, MmdEstimator estimator) {
    if (!(sigma > 0.0)) throw std::invalid_argument("cmmd: sigma must be positive");
    if (x.cols() != y.cols()) throw std::invalid_argument("cmmd: feature dims differ");
    if (x.rows() < 2 || y.rows() < 2) throw std::invalid_argument("cmmd: need at least 2 rows per set");
    const bool u = estimator == MmdEstimator::Unbiased;
    return kernel_mean(x, x, sigma, u) + kernel_mean(y, y, sigma, u) - 2.0 * kernel_mean(x, y, sigma, false);
}

double ssim(const img::Image &x, const img::Image &y, double R) {
    if (x.size != y.size || x.data.size() != y.data.size()) throw std::invalid_argument("ssim: shape mismatch");
    if (x.size < 8) throw std::invalid_argument("ssim: images must be at least 8x8");
    const double c1 = (0.01 * R) * (0.01 * R), c2 = (0.03 * R) * (0.03 * R);
    const std::size_t S = x.size;
    double total = 0.0;
    std::size_t windows = 0;
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t wy = 0; wy + 8 <= S; wy += 4) {
            for (std::size_t wx = 0; wx + 8 <= S; wx += 4) {
                double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
                for (std::size_t i = 0; i < 8; ++i) {
                    for (std::size_t j = 0; j < 8; ++j) {
                        const double a = x.at(c, wy + i, wx + j), b = y.at(c, wy + i, wx + j);
                        mx += a;
                        my += b;
                        xx += a * a;
                        yy += b * b;
                        xy += a * b;
                    }
                }
                mx /= 64;
                my /= 64;
                const double vx = xx / 64 - mx * mx, vy = yy / 64 - my * my, cxy = xy / 64 - mx * my;
                total += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                ++windows;
            }
        }
    }
    return total / static_cast<double>(windows);
}

PrecisionRecall precision_recall_knn(const Matrix &real, const Matrix &gen, int k) {
    if (real.cols() != gen.cols()) throw std::invalid_argument("precision/recall: feature dims differ");
    if (k < 1 || real.rows() < k + 1 || gen.rows() < k + 1) {
        throw std::invalid_argument("precision/recall: k = " + std::to_string(k) + " too large for the sample sizes");
    }
    return {coverage(real, knn_radii(real, k), gen), coverage(gen, knn_radii(gen, k), real)};
}

std::string to_string(EmbeddingKind kind) {
    return kind == EmbeddingKind::RawPixelDownsample ? "raw_pixel_downsample" : "random_projection";
}

EmbeddingKind parse_embedding(const std::string &name) {
    if (name == "raw_pixel_downsample") return EmbeddingKind::RawPixelDownsample;
    if (name == "random_projection") return EmbeddingKind::RandomProjection;
    throw std::invalid_argument("unknown embedding '" + name + "'");
}

void FeatureEmbedding::validate() const {
    if (output_dim < 2) throw std::invalid_argument("embedding output_dim must be >= 2");
    if (kind == EmbeddingKind::RawPixelDownsample) {
        const int g = static_cast<int>(std::lround(std::sqrt(output_dim / 3.0)));
        if (3 * g * g != output_dim) throw std::invalid_argument("raw_pixel_downsample output_dim must be 3*g^2");
    }
}

std::string FeatureEmbedding::describe() const {
    std::string s = to_string(kind) + "(dim=" + std::to_string(output_dim);
    if (kind == EmbeddingKind::RandomProjection) s += " seed=" + std::to_string(seed);
    return s + ")";
}

Matrix FeatureEmbedding::embed(std::span<const img::Image> images) const {
    validate();
    if (images.empty()) throw std::invalid_argument("embed: no images");
    const std::size_t S = images[0].size;
    for (const auto &im : images)
        if (im.size != S) throw std::invalid_argument("embed: images differ in size");
    const auto n = static_cast<Eigen::Index>(images.size());
    if (kind == EmbeddingKind::RawPixelDownsample) {
        const auto g = static_cast<std::size_t>(std::lround(std::sqrt(output_dim / 3.0)));
        if (S % g != 0) throw std::invalid_argument("raw_pixel_downsample grid must divide the image size");
        const std::size_t cell = S / g;
        Matrix out(n, output_dim);
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto &im = images[static_cast<std::size_t>(r)];
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t gy = 0; gy < g; ++gy)
                    for (std::size_t gx = 0; gx < g; ++gx) {
                        double acc = 0;
                        for (std::size_t y = 0; y < cell; ++y)
                            for (std::size_t x = 0; x < cell; ++x) acc += im.at(c, gy * cell + y, gx * cell + x);
                        out(r, static_cast<Eigen::Index>((c * g + gy) * g + gx)) = acc / static_cast<double>(cell * cell);
                    }
        }
        return out;
    }
    const auto d_in = static_cast<Eigen::Index>(3 * S * S);
    Matrix pixels(n, d_in);
    for (Eigen::Index r = 0; r < n; ++r)
        pixels.row(r) = Eigen::Map<const Eigen::RowVectorXd>(images[static_cast<std::size_t>(r)].data.data(), d_in);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(static_cast<double>(output_dim)));
    Matrix proj(d_in, output_dim);
    for (Eigen::Index i = 0; i < d_in; ++i)
        for (Eigen::Index j = 0; j < output_dim; ++j) proj(i, j) = g(rng);
    return pixels * proj;
}

MetricReport evaluate(std::span<const img::Image> real, std::span<const img::Image> gen, const EvalOptions &options,
                      const std::string &label) {
    const Matrix fr = options.embedding.embed(real), fg = options.embedding.embed(gen);
    MetricReport r;
    r.label = label;
    r.embedding = options.embedding.describe();
    r.sigma = options.sigma;
    r.k = options.k;
    r.n_real = real.size();
    r.n_gen = gen.size();
    r.frechet = frechet_distance(fr, fg);
    r.cmmd = cmmd_rbf(fr, fg, options.sigma);
    const auto pr = precision_recall_knn(fr, fg, options.k);
    r.precision = pr.precision;
    r.recall = pr.recall;
    const std::size_t pairs = std::min(real.size(), gen.size());
    double s = 0;
    for (std::size_t i = 0; i < pairs; ++i) s += ssim(real[i], gen[i]);
    r.ssim_mean = s / static_cast<double>(pairs);
    return r;
}

std::string csv_header() { return "label,embedding,sigma,k,n_real,n_gen,frechet,cmmd,precision,recall,ssim_mean"; }

std::string csv_row(const MetricReport &r) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%s,%s,%.6g,%d,%zu,%zu,%.10g,%.10g,%.10g,%.10g,%.10g", r.label.c_str(),
                  r.embedding.c_str(), r.sigma, r.k, r.n_real, r.n_gen, r.frechet, r.cmmd, r.precision, r.recall,
                  r.ssim_mean);
    return buf;
}

} // namespace qlatent::metrics
