#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "fiqopt/errors.hpp"
#include "fiqopt/evalharness.hpp"
#include "fiqopt/pairing.hpp"
#include "fiqopt/rng.hpp"
#include "testutil.hpp"

using namespace fiqopt;
using testutil::TempDir;

namespace {

// Bundle with identities A (3 members), B (2), C (1); dimension 2, all unit.
DatasetBundle mixed_bundle() {
    return testutil::make_bundle(
        {"a1", "a2", "a3", "b1", "b2", "c1"}, {"A", "A", "A", "B", "B", "C"},
        {{1.0f, 0.0f}, {0.8f, 0.6f}, {0.6f, 0.8f}, {0.0f, 1.0f}, {-0.6f, 0.8f}, {-1.0f, 0.0f}},
        {0.9, 0.8, 0.7, 0.6, 0.5, 0.4});
}

VerificationPairSet hand_pairs() {
    // two genuine pairs, five impostors whose sorted sims calibrate to 0.5 at fmr 0.2
    VerificationPairSet set;
    set.genuine.push_back({0, 1, 0.9});
    set.genuine.push_back({2, 3, 0.2});
    set.impostor.push_back({0, 2, 0.1});
    set.impostor.push_back({0, 3, 0.2});
    set.impostor.push_back({1, 2, 0.3});
    set.impostor.push_back({1, 3, 0.4});
    set.impostor.push_back({0, 2, 0.5});
    return set;
}

}  // namespace

TEST_CASE("threshold calibration on a clean decile ladder") {
    const std::vector<double> sims = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    // fmr 0.2 admits two impostors: exactly those at 0.9 and 1.0
    CHECK(calibrate_threshold(sims, 0.2) == 0.9);
    CHECK(calibrate_threshold(sims, 0.1) == 1.0);
    // budget below one impostor: the threshold must clear every observation
    CHECK(calibrate_threshold(sims, 0.05) ==
          std::nextafter(1.0, std::numeric_limits<double>::infinity()));
}

TEST_CASE("threshold calibration with total ties") {
    const double above = std::nextafter(0.5, std::numeric_limits<double>::infinity());
    const std::vector<double> five(5, 0.5);
    CHECK(calibrate_threshold(five, 0.1) == above);  // k_max = 0
    const std::vector<double> ten(10, 0.5);
    CHECK(calibrate_threshold(ten, 0.1) == above);  // candidate's ties overflow the budget
}

TEST_CASE("calibrated threshold is the minimal admissible observed value") {
    Rng rng(811);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng.bounded(50));
        std::vector<double> sims(n);
        for (double& s : sims) s = static_cast<double>(rng.bounded(10)) / 10.0;  // heavy ties
        const double fmr = rng.uniform(0.01, 0.99);
        const double t = calibrate_threshold(sims, fmr);

        const auto budget = static_cast<std::size_t>(std::floor(fmr * static_cast<double>(n)));
        const auto accepted = [&](double at) {
            return static_cast<std::size_t>(std::count_if(
                sims.begin(), sims.end(), [&](double s) { return s >= at; }));
        };
        CHECK(accepted(t) <= budget);
        // every observed value strictly below t must blow the budget
        double best_lower = -1.0;
        for (double s : sims)
            if (s < t) best_lower = std::max(best_lower, s);
        if (best_lower >= 0.0) CHECK(accepted(best_lower) > budget);
    }
}

TEST_CASE("threshold calibration input validation") {
    const std::vector<double> sims = {0.5};
    CHECK_THROWS_AS(calibrate_threshold({}, 0.1), ValidationError);
    CHECK_THROWS_AS(calibrate_threshold(sims, 0.0), ValidationError);
    CHECK_THROWS_AS(calibrate_threshold(sims, 1.0), ValidationError);
    CHECK_THROWS_AS(calibrate_threshold(sims, -0.2), ValidationError);
}

TEST_CASE("fnmr counts strictly-below similarities") {
    const std::vector<double> sims = {0.3, 0.5, 0.7};
    CHECK(compute_fnmr(sims, 0.5) == 1.0 / 3.0);  // 0.5 itself is accepted
    CHECK(compute_fnmr(sims, 0.2) == 0.0);
    CHECK(compute_fnmr(sims, 0.8) == 1.0);
    CHECK_THROWS_AS(compute_fnmr({}, 0.5), ValidationError);
}

TEST_CASE("verification pairs: genuine combinations are exhaustive under the cap") {
    const DatasetBundle bundle = mixed_bundle();
    const VerificationPairSet set = build_verification_pairs(bundle, 7, 50, 12);
    // A contributes (0,1), (0,2), (1,2); B contributes (3,4); C is a singleton
    REQUIRE(set.genuine.size() == 4);
    const std::vector<std::pair<std::size_t, std::size_t>> expected = {
        {0, 1}, {0, 2}, {1, 2}, {3, 4}};
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(set.genuine[i].a == expected[i].first);
        CHECK(set.genuine[i].b == expected[i].second);
        CHECK(set.genuine[i].similarity ==
              cosine_similarity(bundle.vec(expected[i].first), bundle.vec(expected[i].second)));
    }
    REQUIRE(set.impostor.size() == 12);
    for (const auto& p : set.impostor) {
        CHECK(bundle.record(p.a).identity_id != bundle.record(p.b).identity_id);
        CHECK(p.similarity == cosine_similarity(bundle.vec(p.a), bundle.vec(p.b)));
    }
}

TEST_CASE("verification pairs: impostor draws replay the documented protocol") {
    const DatasetBundle bundle = mixed_bundle();
    const std::uint64_t seed = 345;
    const VerificationPairSet set = build_verification_pairs(bundle, seed, 50, 9);
    Rng rng(derive_seed(seed, 1));
    for (const auto& p : set.impostor) {
        std::size_t a, b;
        do {
            a = static_cast<std::size_t>(rng.bounded(bundle.size()));
            b = static_cast<std::size_t>(rng.bounded(bundle.size()));
        } while (bundle.record(a).identity_id == bundle.record(b).identity_id);
        CHECK(p.a == a);
        CHECK(p.b == b);
    }
}

TEST_CASE("verification pairs: an over-cap identity is subsampled in sample order") {
    // "big" has 5 members (10 combinations), "tiny" has 2
    std::vector<std::string> ids, identities;
    std::vector<std::vector<float>> vectors;
    std::vector<double> scores;
    Rng rng(5150);
    for (int i = 0; i < 7; ++i) {
        ids.push_back("img" + std::to_string(i));
        identities.push_back(i < 5 ? "big" : "tiny");
        vectors.push_back({static_cast<float>(rng.gaussian()), static_cast<float>(rng.gaussian()),
                           static_cast<float>(rng.gaussian())});
        scores.push_back(0.5);
    }
    const DatasetBundle bundle = testutil::make_bundle(ids, identities, vectors, scores);

    const std::uint64_t seed = 99;
    const std::size_t cap = 4;
    const VerificationPairSet set = build_verification_pairs(bundle, seed, cap, 5);
    REQUIRE(set.genuine.size() == cap + 1);  // 4 sampled for "big", 1 exhaustive for "tiny"

    std::vector<std::pair<std::size_t, std::size_t>> combos;
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = i + 1; j < 5; ++j) combos.emplace_back(i, j);
    Rng pick_rng(seed ^ fnv1a64("big"));
    const std::vector<std::size_t> picks = sample_distinct(pick_rng, combos.size(), cap);
    for (std::size_t i = 0; i < cap; ++i) {
        CHECK(set.genuine[i].a == combos[picks[i]].first);
        CHECK(set.genuine[i].b == combos[picks[i]].second);
    }
    CHECK(set.genuine[cap].a == 5);
    CHECK(set.genuine[cap].b == 6);
}

TEST_CASE("verification pairs: defaults, determinism, and validation") {
    const DatasetBundle bundle = mixed_bundle();
    const VerificationPairSet defaulted = build_verification_pairs(bundle, 1);
    CHECK(defaulted.impostor.size() == 10 * bundle.size());

    const VerificationPairSet again = build_verification_pairs(bundle, 1);
    REQUIRE(again.impostor.size() == defaulted.impostor.size());
    for (std::size_t i = 0; i < again.impostor.size(); ++i) {
        CHECK(again.impostor[i].a == defaulted.impostor[i].a);
        CHECK(again.impostor[i].b == defaulted.impostor[i].b);
    }

    const DatasetBundle lonely = testutil::make_bundle(
        {"x1", "x2"}, {"only", "only"}, {{1.0f, 0.0f}, {0.0f, 1.0f}}, {0.5, 0.6});
    CHECK_THROWS_AS(build_verification_pairs(lonely, 1), ValidationError);
    CHECK_THROWS_AS(build_verification_pairs(bundle, 1, 0), ValidationError);
}

TEST_CASE("verification pairs: all-singleton bundles yield no genuine pairs") {
    const DatasetBundle bundle = testutil::make_bundle(
        {"x", "y", "z"}, {"p", "q", "r"},
        {{1.0f, 0.0f}, {0.0f, 1.0f}, {0.7f, 0.7f}}, {0.1, 0.2, 0.3});
    const VerificationPairSet set = build_verification_pairs(bundle, 3, 50, 6);
    CHECK(set.genuine.empty());
    CHECK(set.impostor.size() == 6);
    // the missing genuine pairs only surface once a curve is requested
    const std::vector<double> qualities = {0.1, 0.2, 0.3};
    CHECK_THROWS_AS(erc_curve(set, qualities), ValidationError);
}

TEST_CASE("erc curve on the hand fixture") {
    const VerificationPairSet set = hand_pairs();
    const std::vector<double> qualities = {0.9, 1.0, 0.1, 0.3};
    const ErcCurve curve = erc_curve(set, qualities, 0.2, 0.5, 0.5);
    CHECK(curve.threshold == 0.5);
    CHECK(curve.fmr_target == 0.2);
    CHECK(curve.genuine_count == 2);
    CHECK(curve.impostor_count == 5);
    REQUIRE(curve.drop_rates == std::vector<double>{0.0, 0.5});
    // at zero drop the sim-0.2 pair is rejected; dropping the low-quality pair clears it
    CHECK(curve.fnmr_values == std::vector<double>{0.5, 0.0});
    CHECK(curve.auc == 0.25);
    CHECK(!curve.truncated_at.has_value());
}

TEST_CASE("erc curve starts at the full-set fnmr") {
    Rng rng(2718);
    DatasetBundle bundle = testutil::random_bundle(rng);
    // redraw until some identity has a mated pair and impostors are possible
    while (bundle.identity_count() < 2 ||
           bundle.identity_count() == bundle.size())
        bundle = testutil::random_bundle(rng);
    const VerificationPairSet set = build_verification_pairs(bundle, 17);
    REQUIRE(!set.genuine.empty());
    const std::vector<double>& qualities = bundle.qualities_by_record();
    const ErcCurve curve = erc_curve(set, qualities, 0.1);

    std::vector<double> genuine_sims;
    for (const auto& p : set.genuine) genuine_sims.push_back(p.similarity);
    std::vector<double> impostor_sims;
    for (const auto& p : set.impostor) impostor_sims.push_back(p.similarity);

    REQUIRE(!curve.drop_rates.empty());
    CHECK(curve.drop_rates.front() == 0.0);
    CHECK(curve.fnmr_values.size() == curve.drop_rates.size());
    CHECK(curve.threshold == calibrate_threshold(impostor_sims, 0.1));
    CHECK(curve.fnmr_values.front() == compute_fnmr(genuine_sims, curve.threshold));
    CHECK(!curve.truncated_at.has_value());  // default grid never reaches a full drop
    for (double f : curve.fnmr_values) {
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
    }
}

TEST_CASE("erc curve is invariant under affine quality rescaling") {
    const VerificationPairSet set = hand_pairs();
    const std::vector<double> qualities = {0.9, 1.0, 0.1, 0.3};
    std::vector<double> rescaled;
    for (double q : qualities) rescaled.push_back(3.0 * q + 7.0);
    const ErcCurve a = erc_curve(set, qualities, 0.2, 0.95, 0.05);
    const ErcCurve b = erc_curve(set, rescaled, 0.2, 0.95, 0.05);
    CHECK(a.drop_rates == b.drop_rates);
    CHECK(a.fnmr_values == b.fnmr_values);
    CHECK(a.auc == b.auc);
}

TEST_CASE("erc curve breaks quality ties by insertion order") {
    VerificationPairSet set;
    set.genuine.push_back({0, 1, 0.2});  // rejected at threshold 0.5
    set.genuine.push_back({2, 3, 0.9});
    for (double s : {0.1, 0.2, 0.3, 0.4, 0.5}) set.impostor.push_back({0, 2, s});
    const std::vector<double> qualities(4, 0.5);  // every pair quality ties
    const ErcCurve curve = erc_curve(set, qualities, 0.2, 0.5, 0.5);
    // the first-inserted (rejected) pair must be the one discarded
    CHECK(curve.fnmr_values == std::vector<double>{0.5, 0.0});
}

TEST_CASE("erc curve truncates when a grid point would drop everything") {
    const VerificationPairSet set = hand_pairs();
    const std::vector<double> qualities = {0.9, 1.0, 0.1, 0.3};
    const ErcCurve curve = erc_curve(set, qualities, 0.2, 1.0, 0.5);
    // d = 1.0 would discard both genuine pairs, so the sweep stops after 0.5
    REQUIRE(curve.drop_rates == std::vector<double>{0.0, 0.5});
    REQUIRE(curve.truncated_at.has_value());
    CHECK(*curve.truncated_at == 0.5);
}

TEST_CASE("erc curve validation") {
    const VerificationPairSet set = hand_pairs();
    const std::vector<double> qualities = {0.9, 1.0, 0.1, 0.3};
    VerificationPairSet no_genuine = set;
    no_genuine.genuine.clear();
    CHECK_THROWS_AS(erc_curve(no_genuine, qualities), ValidationError);
    VerificationPairSet no_impostor = set;
    no_impostor.impostor.clear();
    CHECK_THROWS_AS(erc_curve(no_impostor, qualities), ValidationError);
    CHECK_THROWS_AS(erc_curve(set, qualities, 0.2, 0.95, 0.0), ValidationError);
    CHECK_THROWS_AS(erc_curve(set, qualities, 0.2, 1.5, 0.01), ValidationError);
    CHECK_THROWS_AS(erc_curve(set, qualities, 0.2, -0.1, 0.01), ValidationError);
    CHECK_THROWS_AS(erc_curve(set, qualities, 1.0, 0.95, 0.01), ValidationError);
}

TEST_CASE("trapezoidal auc anchors") {
    ErcCurve flat;
    flat.drop_rates = {0.0, 0.5, 1.0};
    flat.fnmr_values = {0.2, 0.2, 0.2};
    CHECK(erc_auc(flat) == 0.2);

    ErcCurve ramp;
    ramp.drop_rates = {0.0, 1.0};
    ramp.fnmr_values = {1.0, 0.0};
    CHECK(erc_auc(ramp) == 0.5);

    ErcCurve uneven;  // plateau then a dyadic-width descent, hand-integrable exactly
    uneven.drop_rates = {0.0, 0.25, 1.0};
    uneven.fnmr_values = {1.0, 1.0, 0.0};
    CHECK(erc_auc(uneven) == 0.625);

    ErcCurve point;
    point.drop_rates = {0.0};
    point.fnmr_values = {0.35};
    CHECK(erc_auc(point) == 0.35);

    CHECK_THROWS_AS(erc_auc(ErcCurve{}), ValidationError);
}

TEST_CASE("erc csv output") {
    TempDir dir("erc_csv");
    const VerificationPairSet set = hand_pairs();
    const std::vector<double> qualities = {0.9, 1.0, 0.1, 0.3};
    const ErcCurve curve = erc_curve(set, qualities, 0.2, 0.5, 0.5);
    write_erc_csv(dir.file("curve.csv"), curve);
    std::ifstream in(dir.file("curve.csv"));
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text == "drop_rate,fnmr\n0,0.5\n0.5,0\n");
}

TEST_CASE("erc summary json") {
    TempDir dir("erc_json");
    const VerificationPairSet set = hand_pairs();
    const std::vector<double> qualities = {0.9, 1.0, 0.1, 0.3};

    const ErcCurve curve = erc_curve(set, qualities, 0.2, 0.5, 0.5);
    write_erc_summary(dir.file("summary.json"), curve);
    std::ifstream in(dir.file("summary.json"));
    const nlohmann::json doc = nlohmann::json::parse(in);
    CHECK(doc.at("fmr_target").get<double>() == 0.2);
    CHECK(doc.at("threshold").get<double>() == 0.5);
    CHECK(doc.at("auc").get<double>() == 0.25);
    CHECK(doc.at("auc_x1000").get<double>() == 250.0);
    CHECK(doc.at("genuine_count").get<std::size_t>() == 2);
    CHECK(doc.at("impostor_count").get<std::size_t>() == 5);
    CHECK(doc.at("truncated_at").is_null());

    const ErcCurve truncated = erc_curve(set, qualities, 0.2, 1.0, 0.5);
    write_erc_summary(dir.file("trunc.json"), truncated);
    std::ifstream tin(dir.file("trunc.json"));
    const nlohmann::json tdoc = nlohmann::json::parse(tin);
    CHECK(tdoc.at("truncated_at").get<double>() == 0.5);
}
