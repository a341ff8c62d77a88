#include "fiqopt/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "fiqopt/io.hpp"
#include "fiqopt/pairing.hpp"
#include "fiqopt/rng.hpp"

namespace fiqopt {

VerificationPairSet build_verification_pairs(const DatasetBundle& bundle, std::uint64_t seed,
                                             std::size_t genuine_cap, std::size_t impostor_count) {
    if (bundle.identity_count() < 2)
        throw ValidationError("verification pairs require at least two identities");
    if (genuine_cap == 0) throw ValidationError("genuine_cap must be >= 1");
    const std::size_t n = bundle.size();
    if (impostor_count == 0) impostor_count = 10 * n;

    VerificationPairSet set;
    for (std::size_t k = 0; k < bundle.identity_count(); ++k) {
        const std::vector<std::size_t>& members = bundle.identity_members(k);
        const std::size_t m = members.size();
        if (m < 2) continue;
        std::vector<std::pair<std::size_t, std::size_t>> combos;
        combos.reserve(m * (m - 1) / 2);
        for (std::size_t i = 0; i + 1 < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j) combos.emplace_back(members[i], members[j]);
        if (combos.size() > genuine_cap) {
            Rng rng(seed ^ fnv1a64(bundle.identity_name(k)));
            const std::vector<std::size_t> picks = sample_distinct(rng, combos.size(), genuine_cap);
            std::vector<std::pair<std::size_t, std::size_t>> sampled;
            sampled.reserve(genuine_cap);
            for (std::size_t p : picks) sampled.push_back(combos[p]);
            combos = std::move(sampled);
        }
        for (const auto& [a, b] : combos)
            set.genuine.push_back({a, b, cosine_similarity(bundle.vec(a), bundle.vec(b))});
    }

    Rng rng(derive_seed(seed, 1));
    set.impostor.reserve(impostor_count);
    for (std::size_t t = 0; t < impostor_count; ++t) {
        std::size_t a, b;
        do {
            a = static_cast<std::size_t>(rng.bounded(n));
            b = static_cast<std::size_t>(rng.bounded(n));
        } while (bundle.record(a).identity_id == bundle.record(b).identity_id);
        set.impostor.push_back({a, b, cosine_similarity(bundle.vec(a), bundle.vec(b))});
    }
    return set;
}

double calibrate_threshold(std::span<const double> impostor_similarities, double fmr) {
    if (impostor_similarities.empty())
        throw ValidationError("calibrate_threshold: no impostor similarities");
    if (!(fmr > 0.0 && fmr < 1.0)) throw ValidationError("calibrate_threshold: fmr must lie in (0, 1)");

    std::vector<double> sorted(impostor_similarities.begin(), impostor_similarities.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();

    // At threshold t, accepted impostors are those with similarity >= t. The
    // largest admissible acceptance count is floor(fmr * n); the candidate
    // threshold is the smallest observed value that admits at most that many,
    // i.e. the value at position n - k_max of the ascending sort, advanced
    // past its duplicates when ties would push the count over budget.
    const auto k_max = static_cast<std::size_t>(std::floor(fmr * static_cast<double>(n)));
    const std::size_t pos = n - k_max;
    const double above_all = std::nextafter(sorted.back(), std::numeric_limits<double>::infinity());
    if (pos == n) return above_all;
    const double candidate = sorted[pos];
    const std::size_t first = static_cast<std::size_t>(
        std::lower_bound(sorted.begin(), sorted.end(), candidate) - sorted.begin());
    if (first == pos) return candidate;
    // duplicates of the candidate spill below pos: skip to the next distinct value
    const std::size_t next = static_cast<std::size_t>(
        std::upper_bound(sorted.begin(), sorted.end(), candidate) - sorted.begin());
    if (next == n) return above_all;
    return sorted[next];
}

double compute_fnmr(std::span<const double> genuine_similarities, double threshold) {
    if (genuine_similarities.empty()) throw ValidationError("compute_fnmr: no genuine similarities");
    std::size_t rejected = 0;
    for (double s : genuine_similarities)
        if (s < threshold) ++rejected;
    return static_cast<double>(rejected) / static_cast<double>(genuine_similarities.size());
}

ErcCurve erc_curve(const VerificationPairSet& pairs, std::span<const double> qualities,
                   double fmr_target, double drop_max, double drop_step) {
    if (pairs.genuine.empty()) throw ValidationError("erc_curve: no genuine pairs");
    if (pairs.impostor.empty()) throw ValidationError("erc_curve: no impostor pairs");
    if (!(drop_step > 0.0)) throw ValidationError("erc_curve: drop_step must be positive");
    if (!(drop_max >= 0.0 && drop_max <= 1.0))
        throw ValidationError("erc_curve: drop_max must lie in [0, 1]");

    ErcCurve curve;
    curve.fmr_target = fmr_target;
    curve.genuine_count = pairs.genuine.size();
    curve.impostor_count = pairs.impostor.size();

    std::vector<double> impostor_sims;
    impostor_sims.reserve(pairs.impostor.size());
    for (const auto& p : pairs.impostor) impostor_sims.push_back(p.similarity);
    curve.threshold = calibrate_threshold(impostor_sims, fmr_target);

    // genuine pairs in ascending pair-quality order, ties by insertion order
    const std::size_t g = pairs.genuine.size();
    std::vector<double> pair_quality(g);
    for (std::size_t i = 0; i < g; ++i)
        pair_quality[i] = std::min(qualities[pairs.genuine[i].a], qualities[pairs.genuine[i].b]);
    std::vector<std::size_t> order(g);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return std::tie(pair_quality[x], x) < std::tie(pair_quality[y], y);
    });
    std::vector<double> sims_by_quality(g);
    for (std::size_t i = 0; i < g; ++i) sims_by_quality[i] = pairs.genuine[order[i]].similarity;

    // suffix counts of rejected pairs, so FNMR after dropping k is a lookup
    std::vector<std::size_t> rejected_suffix(g + 1, 0);
    for (std::size_t i = g; i-- > 0;)
        rejected_suffix[i] = rejected_suffix[i + 1] + (sims_by_quality[i] < curve.threshold ? 1 : 0);

    for (std::size_t step = 0;; ++step) {
        const double d = static_cast<double>(step) * drop_step;
        if (d > drop_max) break;
        const auto k = static_cast<std::size_t>(std::floor(d * static_cast<double>(g)));
        if (k >= g) {
            // this rate would drop every genuine pair; stop at the previous one
            curve.truncated_at = curve.drop_rates.back();
            break;
        }
        curve.drop_rates.push_back(d);
        curve.fnmr_values.push_back(static_cast<double>(rejected_suffix[k]) /
                                    static_cast<double>(g - k));
    }
    curve.auc = erc_auc(curve);
    return curve;
}

double erc_auc(const ErcCurve& curve) {
    const std::size_t n = curve.drop_rates.size();
    if (n == 0) throw ValidationError("erc_auc: empty curve");
    if (n == 1) return curve.fnmr_values[0];
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i)
        area += 0.5 * (curve.fnmr_values[i] + curve.fnmr_values[i + 1]) *
                (curve.drop_rates[i + 1] - curve.drop_rates[i]);
    return area / (curve.drop_rates[n - 1] - curve.drop_rates[0]);
}

void write_erc_csv(const std::filesystem::path& path, const ErcCurve& curve) {
    std::ostringstream buf;
    buf << "drop_rate,fnmr\n";
    for (std::size_t i = 0; i < curve.drop_rates.size(); ++i)
        buf << format_double(curve.drop_rates[i]) << ',' << format_double(curve.fnmr_values[i]) << '\n';
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing: " + path.string());
    out << buf.str();
    if (!out) throw IoError("cannot write file: " + path.string());
}

void write_erc_summary(const std::filesystem::path& path, const ErcCurve& curve) {
    nlohmann::json doc;
    doc["fmr_target"] = curve.fmr_target;
    doc["threshold"] = curve.threshold;
    doc["auc"] = curve.auc;
    doc["auc_x1000"] = curve.auc * 1000.0;
    doc["genuine_count"] = curve.genuine_count;
    doc["impostor_count"] = curve.impostor_count;
    if (curve.truncated_at)
        doc["truncated_at"] = *curve.truncated_at;
    else
        doc["truncated_at"] = nullptr;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing: " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("cannot write file: " + path.string());
}

}  // namespace fiqopt
