#include "fiqopt/rankopt.hpp"

#include <algorithm>
#include <numeric>
#include <string_view>
#include <tuple>
#include <unordered_map>

#include "fiqopt/kmeans.hpp"
#include "fiqopt/parallel.hpp"
#include "fiqopt/rng.hpp"

namespace fiqopt {

RankTable::RankTable(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n == 0) throw ValidationError("cannot rank an empty value list");
    ranks_.resize(n);
    if (n == 1) {
        ranks_[0] = 0.5;
        return;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(values[a], a) < std::tie(values[b], b);
    });
    for (std::size_t p = 0; p < n; ++p)
        ranks_[order[p]] = static_cast<double>(p) / static_cast<double>(n - 1);
}

std::optional<double> mean_pair_rank(std::size_t image, const MatedPairList& pairs,
                                     const RankTable& similarity_ranks,
                                     std::span<const double> qualities) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t p : pairs.pairs_of_image[image]) {
        const MatedPair& pair = pairs.pairs[p];
        const std::size_t other = pair.anchor == image ? pair.partner : pair.anchor;
        if (qualities[image] <= qualities[other]) {
            sum += similarity_ranks.rank_of(p);
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
}

double update_index(double quality_rank, std::optional<double> mean_rank, double theta) {
    if (!mean_rank) return quality_rank;
    const double lo = std::min(quality_rank, *mean_rank);
    const double hi = std::max(quality_rank, *mean_rank);
    return std::clamp(quality_rank + theta * (*mean_rank - quality_rank), lo, hi);
}

std::vector<double> apply_rank_update(const RankTable& quality_ranks, const MatedPairList& pairs,
                                      std::span<const double> qualities, double theta) {
    if (pairs.pairs.empty()) return quality_ranks.ranks();

    std::vector<double> similarities;
    similarities.reserve(pairs.pairs.size());
    for (const MatedPair& pair : pairs.pairs) similarities.push_back(pair.similarity);
    const RankTable similarity_ranks(similarities);

    std::vector<double> updated(qualities.size());
    for (std::size_t i = 0; i < qualities.size(); ++i)
        updated[i] = update_index(quality_ranks.rank_of(i),
                                  mean_pair_rank(i, pairs, similarity_ranks, qualities), theta);
    return updated;
}

OptimizedQualityTable optimize_labels(const DatasetBundle& bundle, const OptimConfig& config,
                                      unsigned threads) {
    config.validate();
    const std::size_t n = bundle.size();
    if (n < 2) throw ValidationError("optimize_labels requires at least two images");

    const std::vector<double>& qualities = bundle.qualities_by_record();
    const RankTable quality_ranks(qualities);

    const std::size_t repeats = static_cast<std::size_t>(config.repeats);
    std::vector<std::vector<double>> updated(repeats);
    std::vector<std::size_t> pair_counts(repeats, 0);
    parallel_for(repeats, threads, [&](std::size_t rep) {
        const std::uint64_t rep_seed = derive_seed(config.seed, rep + 1);
        const std::uint64_t cluster_base = derive_seed(rep_seed, 1);
        const std::uint64_t pair_base = derive_seed(rep_seed, 2);

        std::vector<ClusterAssignment> assignments;
        assignments.reserve(bundle.identity_count());
        for (std::size_t k = 0; k < bundle.identity_count(); ++k)
            assignments.push_back(cluster_identity(bundle, bundle.identity_name(k),
                                                   static_cast<std::size_t>(config.clusters),
                                                   cluster_base));
        const MatedPairList pairs = sample_mated_pairs(bundle, assignments, pair_base);
        pair_counts[rep] = pairs.pairs.size();
        updated[rep] = apply_rank_update(quality_ranks, pairs, qualities, config.theta);
    });

    OptimizedQualityTable result;
    result.pairs_per_repetition = pair_counts[0];
    result.baseline_rank = quality_ranks.ranks();

    // fixed-order reduction: repetition 1 first, regardless of thread count
    result.mean_index.assign(n, 0.0);
    for (std::size_t rep = 0; rep < repeats; ++rep)
        for (std::size_t i = 0; i < n; ++i) result.mean_index[i] += updated[rep][i];
    for (std::size_t i = 0; i < n; ++i) result.mean_index[i] /= static_cast<double>(repeats);

    // reassign the original score multiset in optimized order
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (result.mean_index[a] != result.mean_index[b])
            return result.mean_index[a] < result.mean_index[b];
        if (result.baseline_rank[a] != result.baseline_rank[b])
            return result.baseline_rank[a] < result.baseline_rank[b];
        return bundle.record(a).image_id < bundle.record(b).image_id;
    });
    std::vector<double> sorted_scores = qualities;
    std::sort(sorted_scores.begin(), sorted_scores.end());
    std::vector<double> assigned(n);
    for (std::size_t p = 0; p < n; ++p) assigned[order[p]] = sorted_scores[p];

    // emit rows in the input table's order
    std::unordered_map<std::string_view, std::size_t> record_of;
    record_of.reserve(n);
    for (std::size_t i = 0; i < n; ++i) record_of.emplace(bundle.record(i).image_id, i);
    for (const auto& [image_id, score] : bundle.qualities().entries())
        result.scores.insert(image_id, assigned[record_of.at(image_id)]);
    return result;
}

}  // namespace fiqopt
