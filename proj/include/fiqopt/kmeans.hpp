#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fiqopt/types.hpp"

// Seeded Lloyd k-means over one identity's embeddings.
//
// The exact procedure is part of the reproducibility contract:
//   * the effective cluster count is min(c, n);
//   * initial centers are the points at sample_distinct(rng, n, min(c, n)),
//     i.e. Forgy initialization via partial Fisher-Yates on Rng(seed);
//   * each assignment pass gives every point the nearest center by squared
//     Euclidean distance (summed per dimension in double), ties resolved to
//     the lowest center index;
//   * a cluster left empty by an assignment is re-seeded with the point
//     farthest from its own center, considering only points whose cluster
//     keeps >= 2 members and points not already taken this round, ties to the
//     lowest point index; after a bounded number of repair rounds remaining
//     empty clusters are dropped and labels renumbered;
//   * the update step recenters each cluster on the per-dimension mean of its
//     members (summed in member order);
//   * iteration stops when the SSE improvement falls below tol, or after
//     max_iters assignment passes.
//
// On return every cluster is non-empty and labels are consistent with the
// returned centers.

namespace fiqopt {

struct ClusterAssignment {
    std::vector<std::size_t> labels;           // point -> cluster index
    std::vector<std::vector<double>> centers;  // cluster_count x D
    std::vector<double> sse_trace;             // SSE after every assignment pass
    double sse = 0.0;                          // final SSE

    std::size_t cluster_count() const { return centers.size(); }
};

ClusterAssignment kmeans(const std::vector<std::span<const float>>& points, std::size_t c,
                         std::uint64_t seed, std::size_t max_iters = 100, double tol = 1e-6);

// Lloyd iterations from caller-supplied initial centers.
ClusterAssignment kmeans_from_centers(const std::vector<std::span<const float>>& points,
                                      std::vector<std::vector<double>> centers,
                                      std::size_t max_iters = 100, double tol = 1e-6);

// Clusters the named identity's embeddings with the stream Rng(seed_base ^
// fnv1a64(identity_id)), so identities can be processed in any order or
// concurrently without changing results. Throws ValidationError for names
// not present in the bundle.
ClusterAssignment cluster_identity(const DatasetBundle& bundle, std::string_view identity_id,
                                   std::size_t c, std::uint64_t seed_base);

}  // namespace fiqopt
