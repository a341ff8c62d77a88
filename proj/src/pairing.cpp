#include "fiqopt/pairing.hpp"

#include <algorithm>
#include <cmath>

#include "fiqopt/parallel.hpp"
#include "fiqopt/rng.hpp"

namespace fiqopt {

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw ValidationError("cosine_similarity: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double x = a[d];
        const double y = b[d];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na <= 0.0 || nb <= 0.0) throw ValidationError("cosine_similarity: zero-norm vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

MatedPairList sample_mated_pairs(const DatasetBundle& bundle,
                                 const std::vector<ClusterAssignment>& assignments,
                                 std::uint64_t seed_base, unsigned threads) {
    const std::size_t identities = bundle.identity_count();
    if (assignments.size() != identities)
        throw ValidationError("sample_mated_pairs: one assignment per identity required");

    std::vector<std::vector<MatedPair>> per_identity(identities);
    parallel_for(identities, threads, [&](std::size_t k) {
        const std::vector<std::size_t>& members = bundle.identity_members(k);
        const ClusterAssignment& assignment = assignments[k];
        if (assignment.labels.size() != members.size())
            throw ValidationError("sample_mated_pairs: assignment does not match identity '" +
                                  bundle.identity_name(k) + "'");
        const std::size_t clusters = assignment.cluster_count();
        if (clusters <= 1) return;

        // identity-local member lists per cluster, in local order
        std::vector<std::vector<std::size_t>> cluster_members(clusters);
        for (std::size_t local = 0; local < members.size(); ++local)
            cluster_members[assignment.labels[local]].push_back(local);
        for (const auto& cm : cluster_members)
            if (cm.empty())
                throw ValidationError("sample_mated_pairs: empty cluster for identity '" +
                                      bundle.identity_name(k) + "'");

        Rng rng(seed_base ^ fnv1a64(bundle.identity_name(k)));
        std::vector<MatedPair>& out = per_identity[k];
        out.reserve(members.size() * (clusters - 1));
        for (std::size_t local = 0; local < members.size(); ++local) {
            const std::size_t own = assignment.labels[local];
            for (std::size_t j = 0; j < clusters; ++j) {
                if (j == own) continue;
                const auto& candidates = cluster_members[j];
                const std::size_t pick = candidates[rng.bounded(candidates.size())];
                MatedPair pair;
                pair.anchor = members[local];
                pair.partner = members[pick];
                pair.similarity = cosine_similarity(bundle.vec(pair.anchor), bundle.vec(pair.partner));
                out.push_back(pair);
            }
        }
    });

    MatedPairList list;
    for (std::size_t k = 0; k < identities; ++k)
        list.pairs.insert(list.pairs.end(), per_identity[k].begin(), per_identity[k].end());
    list.pairs_of_image.resize(bundle.size());
    for (std::size_t p = 0; p < list.pairs.size(); ++p) {
        list.pairs_of_image[list.pairs[p].anchor].push_back(p);
        if (list.pairs[p].partner != list.pairs[p].anchor)
            list.pairs_of_image[list.pairs[p].partner].push_back(p);
    }
    return list;
}

}  // namespace fiqopt
