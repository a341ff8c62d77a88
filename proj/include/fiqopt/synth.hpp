#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fiqopt/types.hpp"

// Synthetic embedding datasets with known ground-truth quality, for
// exercising the optimizer and the evaluation harness end to end.
//
// Identity k draws from its own stream Rng(derive_seed(seed, k)), in this
// exact order: the image count when images_min < images_max (one bounded
// call over the range width), D gaussians for the unit-normalized identity
// prototype, then per image a noise scale sigma = uniform(noise_floor,
// noise_ceil), D gaussians for the perturbation, and one gaussian for the
// baseline corruption (always drawn, even when baseline_corruption is 0).
// The embedding is normalize(prototype + sigma * perturbation), stored as
// float32; ground truth quality is 1 / (1 + sigma) and the baseline score is
// truth + baseline_corruption * corruption_draw.

namespace fiqopt {

struct SynthConfig {
    std::size_t identities = 50;
    std::size_t images_min = 40;
    std::size_t images_max = 40;
    std::size_t dimension = 64;
    double noise_floor = 0.1;
    double noise_ceil = 1.5;
    double baseline_corruption = 0.0;
    std::uint64_t seed = 42;

    void validate() const;  // throws ValidationError
};

struct SynthDataset {
    std::vector<EmbeddingRecord> records;
    QualityTable truth;
    QualityTable baseline;
};

SynthDataset generate_synthetic(const SynthConfig& config);

}  // namespace fiqopt
