#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fiqopt/types.hpp"

// Distills optimized labels into a small embedding -> quality regressor
// trained with plain mini-batch SGD on mean absolute error.

namespace fiqopt {

struct TrainConfig {
    double learning_rate = 0.05;
    int epochs = 800;
    int batch_size = 64;
    int hidden_width = 64;    // 0 trains a linear model
    std::uint64_t seed = 42;

    void validate() const;  // throws ValidationError
};

// Linear model (hidden_width == 0) or one ReLU hidden layer. Parameters live
// in a single flat array:
//   linear:  [w (D), b]
//   hidden:  [W1 (H x D, row-major), b1 (H), w2 (H), b2]
// predict() accumulates dot products in double, dimensions ascending.
struct RegressorModel {
    std::size_t dimension = 0;
    std::size_t hidden_width = 0;
    std::vector<double> params;

    double predict(std::span<const float> x) const;
    static std::size_t expected_params(std::size_t dimension, std::size_t hidden_width);
};

// Fresh model with every parameter drawn uniformly from
// [-1/sqrt(D), 1/sqrt(D)] by Rng(seed), in flat parameter order.
RegressorModel init_regressor(std::size_t dimension, std::size_t hidden_width, std::uint64_t seed);

double predict_quality(const RegressorModel& model, std::span<const float> embedding);

// Min-max normalization to [0, 1]; a constant table maps to all 0.5.
QualityTable normalize_scores(const QualityTable& table);

// Mean absolute error.
double l1_loss(std::span<const double> predictions, std::span<const double> targets);

// Mean L1 subgradient over the batch, laid out like params. sign(0) = 0 and
// ReLU'(0) = 0, so exact fits produce a zero gradient.
std::vector<double> l1_gradient(const RegressorModel& model,
                                const std::vector<std::span<const float>>& inputs,
                                std::span<const double> targets);

struct TrainResult {
    RegressorModel model;
    std::vector<double> epoch_loss;  // full-set L1 after each epoch
};

// Mini-batch SGD from the given parameter state. Each epoch shuffles the
// sample order with one Fisher-Yates pass (for i = n-1 down to 1: swap with
// bounded(i + 1)) on Rng(derive_seed(config.seed, 2)), then walks consecutive
// batches of batch_size (last one may be short).
TrainResult train_model(RegressorModel model, const std::vector<std::span<const float>>& inputs,
                        std::span<const double> targets, const TrainConfig& config);

// Trains on the bundle's embeddings against `labels`, which must cover
// exactly the bundle's image set and already be normalized to [0, 1].
// Initialization uses derive_seed(config.seed, 1).
TrainResult train_regressor(const DatasetBundle& bundle, const QualityTable& labels,
                            const TrainConfig& config);

void save_model(const std::filesystem::path& path, const RegressorModel& model);
RegressorModel load_model(const std::filesystem::path& path);

// CSV trace "epoch,l1_loss", epochs 1-based.
void write_loss_trace(const std::filesystem::path& path, std::span<const double> epoch_loss);

}  // namespace fiqopt
