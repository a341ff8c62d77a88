#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "fiqopt/types.hpp"

// Error-versus-reject-characteristic evaluation of a quality scorer. The
// decision threshold is calibrated once on the impostor scores at drop rate
// zero and held fixed across the whole curve.

namespace fiqopt {

struct VerificationPair {
    std::size_t a = 0;
    std::size_t b = 0;
    double similarity = 0.0;
};

struct VerificationPairSet {
    std::vector<VerificationPair> genuine;
    std::vector<VerificationPair> impostor;
};

// Genuine pairs: per identity, all member combinations (i < j in local order,
// enumerated lexicographically) up to genuine_cap; identities with more
// combinations contribute a partial Fisher-Yates sample of genuine_cap of
// them, in sample order, from Rng(seed ^ fnv1a64(identity_name)). Impostor
// pairs: `impostor_count` draws (10 * N when 0) from Rng(derive_seed(seed,
// 1)); each draw picks two record indices with bounded(N) twice and redraws
// while the two share an identity. Requires at least two identities.
VerificationPairSet build_verification_pairs(const DatasetBundle& bundle, std::uint64_t seed,
                                             std::size_t genuine_cap = 50,
                                             std::size_t impostor_count = 0);

// Smallest observed impostor similarity whose acceptance rate is <= fmr
// among the given impostor scores; nextafter(max) when no observed value
// qualifies. fmr must lie in (0, 1).
double calibrate_threshold(std::span<const double> impostor_similarities, double fmr);

// Fraction of genuine similarities below the threshold.
double compute_fnmr(std::span<const double> genuine_similarities, double threshold);

struct ErcCurve {
    std::vector<double> drop_rates;
    std::vector<double> fnmr_values;
    double threshold = 0.0;
    double fmr_target = 0.0;
    double auc = 0.0;
    std::size_t genuine_count = 0;
    std::size_t impostor_count = 0;
    // last rate actually swept, set only when a later grid point would have
    // dropped every genuine pair and the sweep stopped early
    std::optional<double> truncated_at;
};

// Sweeps drop rates 0, step, 2*step, ... up to drop_max: at rate d the
// floor(d * G) genuine pairs with the lowest pair quality (min of the two
// members' qualities, ties by insertion order) are discarded and the FNMR of
// the rest is recorded. qualities are indexed by bundle record.
ErcCurve erc_curve(const VerificationPairSet& pairs, std::span<const double> qualities,
                   double fmr_target = 1e-3, double drop_max = 0.95, double drop_step = 0.01);

// Area under the curve by the trapezoidal rule, normalized by the swept span;
// a single-point curve contributes its FNMR directly.
double erc_auc(const ErcCurve& curve);

// "drop_rate,fnmr" rows.
void write_erc_csv(const std::filesystem::path& path, const ErcCurve& curve);

// JSON summary: fmr_target, threshold, auc, auc_x1000, genuine_count,
// impostor_count, truncated_at.
void write_erc_summary(const std::filesystem::path& path, const ErcCurve& curve);

}  // namespace fiqopt
