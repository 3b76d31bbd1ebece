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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "qlatent/image.hpp"

/**
 * @file metrics.hpp
 * Generative-model evaluation over fixed feature embeddings: Frechet
 * distance, RBF-kernel MMD, windowed SSIM and k-NN precision/recall.
 * Feature matrices hold one sample per row.
 */
namespace qlatent::metrics {

using Matrix = Eigen::MatrixXd;

/// Ridge added to both covariances before the matrix square root.
inline constexpr double kFrechetRidge = 1e-6;

[[nodiscard]] double frechet_distance(const Matrix &real, const Matrix &gen);

enum class MmdEstimator { Unbiased, Biased };

/// Squared MMD with k(x, y) = exp(-|x - y|^2 / (2 sigma^2)).
[[nodiscard]] double cmmd_rbf(const Matrix &x, const Matrix &y, double sigma = 10.0,
                              MmdEstimator estimator = MmdEstimator::Unbiased);

/// Mean over 8x8 windows at stride 4 (per channel) of the SSIM index.
[[nodiscard]] double ssim(const img::Image &x, const img::Image &y, double R = 1.0);

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
};

[[nodiscard]] PrecisionRecall precision_recall_knn(const Matrix &real, const Matrix &gen, int k = 3);

enum class EmbeddingKind { RawPixelDownsample, RandomProjection };

[[nodiscard]] std::string to_string(EmbeddingKind kind);
[[nodiscard]] EmbeddingKind parse_embedding(const std::string &name);

/**
 * Fixed image featurizer. RawPixelDownsample box-averages to a g x g grid
 * per channel, so output_dim must be 3 g^2 with g dividing the image size.
 * RandomProjection maps raw pixels through a seeded Gaussian matrix scaled
 * by 1/sqrt(output_dim).
 */
struct FeatureEmbedding {
    EmbeddingKind kind = EmbeddingKind::RandomProjection;
    int output_dim = 64;
    std::uint64_t seed = 0;

    void validate() const;
    [[nodiscard]] std::string describe() const;
    [[nodiscard]] Matrix embed(std::span<const img::Image> images) const;
};

struct MetricReport {
    std::string label;
    std::string embedding;
    double frechet = 0.0;
    double cmmd = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double ssim_mean = 0.0;
    double sigma = 10.0;
    int k = 3;
    std::size_t n_real = 0;
    std::size_t n_gen = 0;
};

struct EvalOptions {
    FeatureEmbedding embedding;
    double sigma = 10.0;
    int k = 3;
};

/**
 * Full report for two image sets. ssim_mean averages SSIM over index-paired
 * images (min of the two set sizes).
 */
[[nodiscard]] MetricReport evaluate(std::span<const img::Image> real, std::span<const img::Image> gen,
                                    const EvalOptions &options, const std::string &label = "");

/// Header naming every column, including embedding and kernel/k parameters.
[[nodiscard]] std::string csv_header();
[[nodiscard]] std::string csv_row(const MetricReport &r);

} // namespace qlatent::metrics
