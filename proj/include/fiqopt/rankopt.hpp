#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fiqopt/pairing.hpp"
#include "fiqopt/types.hpp"

// Rank-based quality label optimization.
//
// Per repetition: every identity is clustered, one mated pair is drawn per
// (image, other cluster), pair similarities and image qualities are both
// mapped to fractional ranks, and each image's quality rank x is moved toward
// the mean similarity rank m of the pairs it is the weaker member of:
//
//     x' = x + theta * (m - x),  clamped to the interval spanned by x and m
//
// Images that are never the weaker member keep x unchanged. The R repetition
// results are averaged per image, and the original score multiset is
// reassigned in the order of the averaged index, so optimization only reorders
// the scores that already existed.
//
// Seed derivation, shared with any reimplementation: repetition r (1-based)
// uses rep_seed = derive_seed(config.seed, r); identity clustering inside it
// uses the base derive_seed(rep_seed, 1) and pair sampling the base
// derive_seed(rep_seed, 2), each salted per identity as documented in
// kmeans.hpp and pairing.hpp.

namespace fiqopt {

// Fractional ranks of a value sequence: ascending stable sort, the item at
// sorted position p gets rank p / (n - 1); a single item gets 0.5. Ties are
// broken by input position, so all ranks are distinct. An empty sequence is
// rejected.
class RankTable {
public:
    explicit RankTable(std::span<const double> values);  // throws ValidationError on empty input

    double rank_of(std::size_t item) const { return ranks_[item]; }
    const std::vector<double>& ranks() const { return ranks_; }
    std::size_t size() const { return ranks_.size(); }

private:
    std::vector<double> ranks_;
};

inline RankTable build_rank_table(std::span<const double> values) { return RankTable(values); }

// Mean similarity rank over the sampled pairs containing the image (as either
// member) in which its quality is lower than or equal to the other member's
// (ties count for both members); nullopt when there is no such pair.
// Summation follows ascending pair order.
std::optional<double> mean_pair_rank(std::size_t image, const MatedPairList& pairs,
                                     const RankTable& similarity_ranks,
                                     std::span<const double> qualities);

// One update step in rank space; identity when mean_rank is absent or theta
// is zero.
double update_index(double quality_rank, std::optional<double> mean_rank, double theta);

// Updated fractional index for every image under one pair sample. With no
// pairs at all (every identity collapsed to one cluster) all images keep
// their quality rank.
std::vector<double> apply_rank_update(const RankTable& quality_ranks, const MatedPairList& pairs,
                                      std::span<const double> qualities, double theta);

struct OptimizedQualityTable {
    // optimized score per image, in the same row order as the input table
    QualityTable scores;
    // averaged updated index per bundle record
    std::vector<double> mean_index;
    // fractional rank of the baseline score per bundle record
    std::vector<double> baseline_rank;
    // mated pairs drawn in the first repetition
    std::size_t pairs_per_repetition = 0;
};

// Full optimization: R repetitions (parallelizable; results independent of
// `threads`), fixed-order averaging over r = 1..R, then reassignment of the
// sorted original scores in ascending (mean_index, baseline_rank, image_id)
// order.
OptimizedQualityTable optimize_labels(const DatasetBundle& bundle, const OptimConfig& config,
                                      unsigned threads = 1);

}  // namespace fiqopt
