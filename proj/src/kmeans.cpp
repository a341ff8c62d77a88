#include "fiqopt/kmeans.hpp"

#include <cassert>
#include <limits>

#include "fiqopt/rng.hpp"

namespace fiqopt {

namespace {

constexpr std::size_t kRepairBudget = 8;

double sq_distance(std::span<const float> p, const std::vector<double>& center) {
    double acc = 0.0;
    for (std::size_t d = 0; d < center.size(); ++d) {
        const double diff = static_cast<double>(p[d]) - center[d];
        acc += diff * diff;
    }
    return acc;
}

// One assignment pass; returns the SSE and fills labels and per-point
// distances to the chosen center.
double assign_points(const std::vector<std::span<const float>>& points,
                     const std::vector<std::vector<double>>& centers,
                     std::vector<std::size_t>& labels, std::vector<double>& dists) {
    double sse = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        std::size_t best = 0;
        double best_dist = sq_distance(points[i], centers[0]);
        for (std::size_t j = 1; j < centers.size(); ++j) {
            const double dist = sq_distance(points[i], centers[j]);
            if (dist < best_dist) {
                best_dist = dist;
                best = j;
            }
        }
        labels[i] = best;
        dists[i] = best_dist;
        sse += best_dist;
    }
    return sse;
}

std::vector<std::size_t> empty_clusters(const std::vector<std::size_t>& labels, std::size_t k) {
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t label : labels) ++counts[label];
    std::vector<std::size_t> empties;
    for (std::size_t j = 0; j < k; ++j)
        if (counts[j] == 0) empties.push_back(j);
    return empties;
}

// Re-seeds each empty cluster with the point farthest from its own center.
// Returns false when no eligible point remains (degenerate data), in which
// case the caller collapses the empty clusters instead.
bool reseed_empties(const std::vector<std::span<const float>>& points,
                    const std::vector<std::size_t>& empties, const std::vector<std::size_t>& labels,
                    const std::vector<double>& dists, std::vector<std::vector<double>>& centers) {
    std::vector<std::size_t> counts(centers.size(), 0);
    for (std::size_t label : labels) ++counts[label];
    std::vector<bool> taken(points.size(), false);
    std::vector<std::pair<std::size_t, std::size_t>> picks;  // (cluster, point)
    for (std::size_t e : empties) {
        std::size_t best = points.size();
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (taken[i] || counts[labels[i]] < 2) continue;
            if (best == points.size() || dists[i] > dists[best]) best = i;
        }
        if (best == points.size()) return false;
        taken[best] = true;
        --counts[labels[best]];
        picks.emplace_back(e, best);
    }
    for (const auto& [e, i] : picks) centers[e].assign(points[i].begin(), points[i].end());
    return true;
}

void drop_clusters(const std::vector<std::size_t>& empties, std::vector<std::vector<double>>& centers) {
    std::vector<bool> dead(centers.size(), false);
    for (std::size_t e : empties) dead[e] = true;
    std::vector<std::vector<double>> kept;
    kept.reserve(centers.size() - empties.size());
    for (std::size_t j = 0; j < centers.size(); ++j)
        if (!dead[j]) kept.push_back(std::move(centers[j]));
    centers = std::move(kept);
}

}  // namespace

ClusterAssignment kmeans_from_centers(const std::vector<std::span<const float>>& points,
                                      std::vector<std::vector<double>> centers,
                                      std::size_t max_iters, double tol) {
    const std::size_t n = points.size();
    if (n == 0) throw ValidationError("kmeans requires at least one point");
    if (centers.empty()) throw ValidationError("kmeans requires at least one center");
    if (max_iters == 0) throw ValidationError("kmeans requires max_iters >= 1");
    const std::size_t dim = points.front().size();
    for (const auto& p : points)
        if (p.size() != dim) throw ValidationError("kmeans points must share one dimension");
    for (const auto& c : centers)
        if (c.size() != dim) throw ValidationError("kmeans centers must match the point dimension");

    ClusterAssignment result;
    result.labels.assign(n, 0);
    std::vector<double> dists(n, 0.0);

    double prev_sse = std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0;; ++iter) {
        double sse = assign_points(points, centers, result.labels, dists);
        result.sse_trace.push_back(sse);

        // Every cluster must own at least one point before the update step.
        std::size_t repair_rounds = 0;
        for (auto empties = empty_clusters(result.labels, centers.size()); !empties.empty();
             empties = empty_clusters(result.labels, centers.size())) {
            if (repair_rounds < kRepairBudget &&
                reseed_empties(points, empties, result.labels, dists, centers)) {
                ++repair_rounds;
            } else {
                drop_clusters(empties, centers);
            }
            sse = assign_points(points, centers, result.labels, dists);
            result.sse_trace.push_back(sse);
        }

        assert(sse <= prev_sse * (1.0 + 1e-9) + 1e-12);
        if (iter > 0 && prev_sse - sse <= tol) break;
        if (iter + 1 >= max_iters) break;
        prev_sse = sse;

        std::vector<std::size_t> counts(centers.size(), 0);
        for (auto& center : centers) center.assign(dim, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[result.labels[i]];
            auto& center = centers[result.labels[i]];
            const auto p = points[i];
            for (std::size_t d = 0; d < dim; ++d) center[d] += static_cast<double>(p[d]);
        }
        for (std::size_t j = 0; j < centers.size(); ++j)
            for (std::size_t d = 0; d < dim; ++d) centers[j][d] /= static_cast<double>(counts[j]);
    }

    result.centers = std::move(centers);
    result.sse = result.sse_trace.back();
    return result;
}

ClusterAssignment kmeans(const std::vector<std::span<const float>>& points, std::size_t c,
                         std::uint64_t seed, std::size_t max_iters, double tol) {
    if (c == 0) throw ValidationError("kmeans requires c >= 1");
    const std::size_t n = points.size();
    if (n == 0) throw ValidationError("kmeans requires at least one point");

    Rng rng(seed);
    const std::vector<std::size_t> init = sample_distinct(rng, n, std::min(c, n));
    std::vector<std::vector<double>> centers;
    centers.reserve(init.size());
    for (std::size_t idx : init)
        centers.emplace_back(points[idx].begin(), points[idx].end());
    return kmeans_from_centers(points, std::move(centers), max_iters, tol);
}

ClusterAssignment cluster_identity(const DatasetBundle& bundle, std::string_view identity_id,
                                   std::size_t c, std::uint64_t seed_base) {
    const std::vector<std::size_t>& members = bundle.identity_members(bundle.identity_index(identity_id));
    std::vector<std::span<const float>> points;
    points.reserve(members.size());
    for (std::size_t i : members) points.push_back(bundle.vec(i));
    return kmeans(points, c, seed_base ^ fnv1a64(identity_id));
}

}  // namespace fiqopt
