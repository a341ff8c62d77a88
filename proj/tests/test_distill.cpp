#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>
#include <vector>

#include "fiqopt/distill.hpp"
#include "fiqopt/errors.hpp"
#include "fiqopt/rng.hpp"
#include "testutil.hpp"

using namespace fiqopt;
using testutil::TempDir;

namespace {

struct Samples {
    std::vector<std::vector<float>> storage;
    std::vector<double> targets;

    std::vector<std::span<const float>> inputs() const {
        std::vector<std::span<const float>> s;
        s.reserve(storage.size());
        for (const auto& x : storage) s.emplace_back(x);
        return s;
    }
};

Samples linear_samples(Rng& rng, std::size_t n, std::size_t dim) {
    // targets from a fixed linear rule, so a linear model can fit them
    Samples s;
    s.storage.resize(n);
    for (auto& x : s.storage) {
        x.resize(dim);
        for (float& v : x) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        double y = 0.3;
        for (std::size_t d = 0; d < dim; ++d)
            y += (d % 2 == 0 ? 0.1 : -0.05) * static_cast<double>(x[d]);
        s.targets.push_back(y);
    }
    return s;
}

// Central finite difference of the batch L1 loss along one parameter.
double numeric_partial(RegressorModel model, const std::vector<std::span<const float>>& inputs,
                       std::span<const double> targets, std::size_t param, double step) {
    auto loss_at = [&](double value) {
        model.params[param] = value;
        std::vector<double> preds(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) preds[i] = model.predict(inputs[i]);
        return l1_loss(preds, targets);
    };
    const double base = model.params[param];
    const double up = loss_at(base + step);
    const double down = loss_at(base - step);
    return (up - down) / (2.0 * step);
}

// True when any residual or any hidden pre-activation sits close to a kink.
bool near_kink(const RegressorModel& model, const std::vector<std::span<const float>>& inputs,
               std::span<const double> targets, double margin) {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (std::fabs(model.predict(inputs[i]) - targets[i]) < margin) return true;
        if (model.hidden_width > 0) {
            const double* w1 = model.params.data();
            const double* b1 = model.params.data() + model.hidden_width * model.dimension;
            for (std::size_t h = 0; h < model.hidden_width; ++h) {
                double z = b1[h];
                for (std::size_t d = 0; d < model.dimension; ++d)
                    z += w1[h * model.dimension + d] * static_cast<double>(inputs[i][d]);
                if (std::fabs(z) < margin) return true;
            }
        }
    }
    return false;
}

}  // namespace

TEST_CASE("parameter layout sizes") {
    CHECK(RegressorModel::expected_params(8, 0) == 9);
    CHECK(RegressorModel::expected_params(8, 4) == 4 * 8 + 4 + 4 + 1);
    CHECK(RegressorModel::expected_params(64, 64) == 64 * 64 + 64 + 64 + 1);
}

TEST_CASE("initialization is a seeded uniform fill") {
    const RegressorModel model = init_regressor(16, 3, 99);
    CHECK(model.params.size() == RegressorModel::expected_params(16, 3));
    const double scale = 1.0 / std::sqrt(16.0);
    Rng rng(99);
    for (double p : model.params) {
        CHECK(p == rng.uniform(-scale, scale));  // same draw ladder
        CHECK(std::fabs(p) <= scale);
    }
    // same seed, same model; different seed, different params
    const RegressorModel again = init_regressor(16, 3, 99);
    CHECK(again.params == model.params);
    const RegressorModel other = init_regressor(16, 3, 100);
    CHECK(other.params != model.params);
}

TEST_CASE("linear predict on a hand example") {
    RegressorModel model;
    model.dimension = 2;
    model.hidden_width = 0;
    model.params = {0.5, -0.25, 0.1};
    const std::vector<float> x = {2.0f, 4.0f};
    CHECK(model.predict(x) == 0.1);  // 1 - 1 + 0.1, exact in binary
    CHECK(predict_quality(model, x) == 0.1);
}

TEST_CASE("hidden predict on a hand example") {
    RegressorModel model;
    model.dimension = 2;
    model.hidden_width = 2;
    // W1 rows (1,0) and (0,1); b1 (0, -5); w2 (2, 3); b2 0.5
    model.params = {1.0, 0.0, 0.0, 1.0, 0.0, -5.0, 2.0, 3.0, 0.5};
    const std::vector<float> x = {1.5f, 2.0f};
    // unit 0: z = 1.5 -> 2 * 1.5; unit 1: z = -3 -> gated off
    CHECK(model.predict(x) == 3.5);

    // all-zero first layer leaves only the output bias
    RegressorModel flat;
    flat.dimension = 2;
    flat.hidden_width = 2;
    flat.params = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.7};
    CHECK(flat.predict(x) == 0.7);
}

TEST_CASE("predict validates the input dimension") {
    const RegressorModel model = init_regressor(4, 0, 1);
    const std::vector<float> bad = {1.0f, 2.0f};
    CHECK_THROWS_AS(model.predict(bad), ValidationError);
}

TEST_CASE("score normalization is min-max") {
    QualityTable table;
    table.insert("a", 2.0);
    table.insert("b", 4.0);
    table.insert("c", 6.0);
    const QualityTable normalized = normalize_scores(table);
    CHECK(normalized.at("a") == 0.0);
    CHECK(normalized.at("b") == 0.5);
    CHECK(normalized.at("c") == 1.0);
    CHECK(normalized.entries()[0].first == "a");  // order preserved

    QualityTable constant;
    constant.insert("a", 3.0);
    constant.insert("b", 3.0);
    const QualityTable mid = normalize_scores(constant);
    CHECK(mid.at("a") == 0.5);
    CHECK(mid.at("b") == 0.5);

    CHECK_THROWS_AS(normalize_scores(QualityTable{}), ValidationError);
}

TEST_CASE("l1 loss is the mean absolute error") {
    const std::vector<double> preds = {1.0, 2.0};
    const std::vector<double> targets = {2.0, 4.0};
    CHECK(l1_loss(preds, targets) == 1.5);
    const std::vector<double> short_targets = {2.0};
    CHECK_THROWS_AS(l1_loss(preds, short_targets), ValidationError);
    CHECK_THROWS_AS(l1_loss({}, {}), ValidationError);
}

TEST_CASE("analytic gradients match central differences") {
    Rng rng(4242);
    for (std::size_t hidden : {std::size_t{0}, std::size_t{3}}) {
        int checked = 0;
        std::uint64_t attempt = 0;
        while (checked < 6) {
            const Samples s = linear_samples(rng, 8, 4);
            const RegressorModel model = init_regressor(4, hidden, 1000 + attempt++);
            const auto inputs = s.inputs();
            if (near_kink(model, inputs, s.targets, 1e-6)) continue;  // resample away from kinks
            ++checked;
            const std::vector<double> grad = l1_gradient(model, inputs, s.targets);
            REQUIRE(grad.size() == model.params.size());
            for (std::size_t p = 0; p < grad.size(); ++p) {
                const double numeric = numeric_partial(model, inputs, s.targets, p, 1e-5);
                const double denom = std::max({std::fabs(numeric), std::fabs(grad[p]), 1e-8});
                CHECK(std::fabs(grad[p] - numeric) / denom < 1e-4);
            }
        }
    }
}

TEST_CASE("exact fits contribute no gradient") {
    RegressorModel model;
    model.dimension = 2;
    model.hidden_width = 0;
    model.params = {0.0, 0.0, 0.5};
    Samples s;
    s.storage = {{1.0f, -2.0f}, {3.0f, 4.0f}};
    s.targets = {0.5, 0.5};  // both residuals exactly zero -> sign(0) = 0
    const std::vector<double> grad = l1_gradient(model, s.inputs(), s.targets);
    for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("a dead relu unit receives no first-layer gradient") {
    RegressorModel model;
    model.dimension = 2;
    model.hidden_width = 2;
    // unit 0 alive (z > 0), unit 1 exactly at zero pre-activation
    model.params = {1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0};
    Samples s;
    s.storage = {{1.0f, 1.0f}};
    s.targets = {-5.0};  // large positive residual
    const std::vector<double> grad = l1_gradient(model, s.inputs(), s.targets);
    // layout: W1 row0 [0,1], row1 [2,3], b1 [4,5], w2 [6,7], b2 [8]
    CHECK(grad[0] != 0.0);
    CHECK(grad[1] != 0.0);
    CHECK(grad[4] != 0.0);
    CHECK(grad[2] == 0.0);  // ReLU'(0) = 0 gates the dead row
    CHECK(grad[3] == 0.0);
    CHECK(grad[5] == 0.0);
    CHECK(grad[7] == 0.0);  // its activation is zero, so w2[1] gets nothing
    CHECK(grad[8] != 0.0);
}

TEST_CASE("epoch loss is non-increasing at small learning rate") {
    // ten samples, linear model, lr 1e-3: the recorded trace must never rise
    Rng rng(2025);
    const Samples s = linear_samples(rng, 10, 3);
    TrainConfig config;
    config.learning_rate = 1e-3;
    config.epochs = 120;
    config.batch_size = 64;  // full batch
    config.hidden_width = 0;
    config.seed = 5;
    const RegressorModel init = init_regressor(3, 0, derive_seed(config.seed, 1));
    const TrainResult result = train_model(init, s.inputs(), s.targets, config);
    REQUIRE(result.epoch_loss.size() == 120);
    for (std::size_t e = 1; e < result.epoch_loss.size(); ++e)
        CHECK(result.epoch_loss[e] <= result.epoch_loss[e - 1]);
}

TEST_CASE("training fits an easy linear target") {
    Rng rng(2026);
    const Samples s = linear_samples(rng, 40, 4);
    TrainConfig config;
    config.learning_rate = 0.02;
    config.epochs = 400;
    config.batch_size = 8;
    config.hidden_width = 0;
    const TrainResult result =
        train_model(init_regressor(4, 0, 7), s.inputs(), s.targets, config);
    CHECK(result.epoch_loss.back() < 0.02);
}

TEST_CASE("training is deterministic") {
    Rng rng(2027);
    const Samples s = linear_samples(rng, 25, 3);
    TrainConfig config;
    config.learning_rate = 0.05;
    config.epochs = 30;
    config.batch_size = 4;
    config.hidden_width = 2;
    const TrainResult a = train_model(init_regressor(3, 2, 11), s.inputs(), s.targets, config);
    const TrainResult b = train_model(init_regressor(3, 2, 11), s.inputs(), s.targets, config);
    CHECK(a.model.params == b.model.params);
    CHECK(a.epoch_loss == b.epoch_loss);
}

TEST_CASE("train_regressor wires the documented sub-seeds") {
    Rng rng(2028);
    const DatasetBundle bundle = testutil::random_bundle(rng);
    QualityTable labels;
    for (const auto& [id, score] : bundle.qualities().entries())
        labels.insert(id, std::clamp(score, 0.0, 1.0));

    TrainConfig config;
    config.learning_rate = 0.01;
    config.epochs = 5;
    config.batch_size = 16;
    config.hidden_width = 3;
    config.seed = 77;
    const TrainResult via_bundle = train_regressor(bundle, labels, config);

    std::vector<std::span<const float>> inputs;
    std::vector<double> targets;
    for (std::size_t i = 0; i < bundle.size(); ++i) {
        inputs.push_back(bundle.vec(i));
        targets.push_back(labels.at(bundle.record(i).image_id));
    }
    const RegressorModel init =
        init_regressor(bundle.dimension(), 3, derive_seed(config.seed, 1));
    const TrainResult direct = train_model(init, inputs, targets, config);
    CHECK(via_bundle.model.params == direct.model.params);
    CHECK(via_bundle.epoch_loss == direct.epoch_loss);
}

TEST_CASE("train_regressor validates its labels") {
    Rng rng(2029);
    const DatasetBundle bundle = testutil::random_bundle(rng);
    TrainConfig config;

    QualityTable missing;
    std::size_t count = 0;
    for (const auto& [id, score] : bundle.qualities().entries())
        if (++count < bundle.size()) missing.insert(id, 0.5);
    CHECK_THROWS_AS(train_regressor(bundle, missing, config), ValidationError);

    QualityTable out_of_range;
    for (const auto& [id, score] : bundle.qualities().entries()) out_of_range.insert(id, 1.5);
    CHECK_THROWS_AS(train_regressor(bundle, out_of_range, config), ValidationError);
}

TEST_CASE("train config bounds") {
    TrainConfig config;
    CHECK_NOTHROW(config.validate());
    config.learning_rate = 0.0;
    CHECK_THROWS_AS(config.validate(), ValidationError);
    config.learning_rate = 0.1;
    config.epochs = 0;
    CHECK_THROWS_AS(config.validate(), ValidationError);
    config.epochs = 1;
    config.batch_size = 0;
    CHECK_THROWS_AS(config.validate(), ValidationError);
    config.batch_size = 1;
    config.hidden_width = -1;
    CHECK_THROWS_AS(config.validate(), ValidationError);
}

TEST_CASE("models round-trip through JSON bit-exactly") {
    TempDir dir("model");
    for (std::size_t hidden : {std::size_t{0}, std::size_t{5}}) {
        const RegressorModel model = init_regressor(6, hidden, 314);
        save_model(dir.file("m.json"), model);
        const RegressorModel loaded = load_model(dir.file("m.json"));
        CHECK(loaded.dimension == model.dimension);
        CHECK(loaded.hidden_width == model.hidden_width);
        CHECK(loaded.params == model.params);  // exact doubles

        Rng rng(1);
        std::vector<float> x(6);
        for (float& v : x) v = static_cast<float>(rng.gaussian());
        CHECK(loaded.predict(x) == model.predict(x));
    }
}

TEST_CASE("model loading rejects malformed files") {
    TempDir dir("model_err");
    auto write_text = [&](const std::string& name, const std::string& text) {
        std::ofstream out(dir.file(name));
        out << text;
    };
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_model(dir.file("none.json")), IoError);
    }
    SUBCASE("not json") {
        write_text("m.json", "not json at all {");
        CHECK_THROWS_AS(load_model(dir.file("m.json")), ValidationError);
    }
    SUBCASE("bad version") {
        write_text("m.json",
                   R"({"version":2,"architecture":"linear","dimension":2,"hidden_width":0,"params":[1,2,3]})");
        CHECK_THROWS_AS(load_model(dir.file("m.json")), ValidationError);
    }
    SUBCASE("architecture mismatch") {
        write_text("m.json",
                   R"({"version":1,"architecture":"hidden","dimension":2,"hidden_width":0,"params":[1,2,3]})");
        CHECK_THROWS_AS(load_model(dir.file("m.json")), ValidationError);
    }
    SUBCASE("wrong parameter count") {
        write_text("m.json",
                   R"({"version":1,"architecture":"linear","dimension":2,"hidden_width":0,"params":[1,2]})");
        CHECK_THROWS_AS(load_model(dir.file("m.json")), ValidationError);
    }
    SUBCASE("non-finite parameter") {
        write_text("m.json",
                   R"({"version":1,"architecture":"linear","dimension":2,"hidden_width":0,"params":[1,2,null]})");
        CHECK_THROWS_AS(load_model(dir.file("m.json")), ValidationError);
    }
}

TEST_CASE("loss trace file format") {
    TempDir dir("trace");
    const std::vector<double> losses = {0.5, 0.25};
    write_loss_trace(dir.file("t.csv"), losses);
    std::ifstream in(dir.file("t.csv"));
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text == "epoch,l1_loss\n1,0.5\n2,0.25\n");
}
