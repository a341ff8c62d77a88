#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fiqopt/kmeans.hpp"
#include "fiqopt/types.hpp"

namespace fiqopt {

// Cosine similarity: one pass accumulating dot product and both squared norms
// in double, then dot / (sqrt(na) * sqrt(nb)), clamped to [-1, 1]. Throws on
// mismatched dimensions or a zero-norm input.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

// A same-identity, cross-cluster comparison; indices address bundle records.
struct MatedPair {
    std::size_t anchor = 0;
    std::size_t partner = 0;
    double similarity = 0.0;
};

struct MatedPairList {
    std::vector<MatedPair> pairs;
    // record index -> indices into `pairs` containing the record as either
    // member, in ascending pair order
    std::vector<std::vector<std::size_t>> pairs_of_image;
};

// Draws one partner for every (image, other-cluster) combination within each
// identity: |pairs| = sum_k N_k * (C_k - 1). The draw protocol is part of the
// reproducibility contract: identity k uses the stream Rng(seed_base ^
// fnv1a64(identity_name)); its members are visited in identity-local order,
// the other clusters in ascending index order, and the partner is chosen by
// one bounded(m) draw over that cluster's members in identity-local order.
// Results are independent of `threads`.
MatedPairList sample_mated_pairs(const DatasetBundle& bundle,
                                 const std::vector<ClusterAssignment>& assignments,
                                 std::uint64_t seed_base, unsigned threads = 1);

}  // namespace fiqopt
