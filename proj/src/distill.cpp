#include "fiqopt/distill.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "fiqopt/io.hpp"
#include "fiqopt/rng.hpp"

namespace fiqopt {

namespace {

double sign(double r) { return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0); }

void check_model(const RegressorModel& model) {
    if (model.dimension < 2) throw ValidationError("model dimension must be >= 2");
    if (model.params.size() != RegressorModel::expected_params(model.dimension, model.hidden_width))
        throw ValidationError("model parameter count does not match its architecture");
}

// Forward pass that also captures hidden pre-activations for the backward
// pass; zh is left empty for the linear model.
double forward(const RegressorModel& model, std::span<const float> x, std::vector<double>* zh) {
    const std::size_t dim = model.dimension;
    const std::size_t hidden = model.hidden_width;
    const double* p = model.params.data();
    if (hidden == 0) {
        double acc = 0.0;
        for (std::size_t d = 0; d < dim; ++d) acc += p[d] * static_cast<double>(x[d]);
        return acc + p[dim];
    }
    const double* w1 = p;
    const double* b1 = p + hidden * dim;
    const double* w2 = b1 + hidden;
    const double b2 = w2[hidden];
    if (zh) zh->resize(hidden);
    double out = 0.0;
    for (std::size_t h = 0; h < hidden; ++h) {
        double z = 0.0;
        const double* row = w1 + h * dim;
        for (std::size_t d = 0; d < dim; ++d) z += row[d] * static_cast<double>(x[d]);
        z += b1[h];
        if (zh) (*zh)[h] = z;
        out += w2[h] * (z > 0.0 ? z : 0.0);
    }
    return out + b2;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ValidationError("learning_rate must be positive and finite");
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (hidden_width < 0) throw ValidationError("hidden_width must be >= 0");
}

std::size_t RegressorModel::expected_params(std::size_t dimension, std::size_t hidden_width) {
    if (hidden_width == 0) return dimension + 1;
    return hidden_width * dimension + hidden_width + hidden_width + 1;
}

double RegressorModel::predict(std::span<const float> x) const {
    if (x.size() != dimension) throw ValidationError("predict: embedding dimension mismatch");
    return forward(*this, x, nullptr);
}

double predict_quality(const RegressorModel& model, std::span<const float> embedding) {
    return model.predict(embedding);
}

RegressorModel init_regressor(std::size_t dimension, std::size_t hidden_width, std::uint64_t seed) {
    if (dimension < 2) throw ValidationError("model dimension must be >= 2");
    RegressorModel model;
    model.dimension = dimension;
    model.hidden_width = hidden_width;
    model.params.resize(RegressorModel::expected_params(dimension, hidden_width));
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dimension));
    for (double& p : model.params) p = rng.uniform(-scale, scale);
    return model;
}

QualityTable normalize_scores(const QualityTable& table) {
    if (table.empty()) throw ValidationError("cannot normalize an empty score table");
    double lo = table.entries().front().second;
    double hi = lo;
    for (const auto& [id, score] : table.entries()) {
        lo = std::min(lo, score);
        hi = std::max(hi, score);
    }
    QualityTable out;
    for (const auto& [id, score] : table.entries())
        out.insert(id, hi == lo ? 0.5 : (score - lo) / (hi - lo));
    return out;
}

double l1_loss(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.size() != targets.size()) throw ValidationError("l1_loss: length mismatch");
    if (predictions.empty()) throw ValidationError("l1_loss: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) acc += std::fabs(predictions[i] - targets[i]);
    return acc / static_cast<double>(predictions.size());
}

std::vector<double> l1_gradient(const RegressorModel& model,
                                const std::vector<std::span<const float>>& inputs,
                                std::span<const double> targets) {
    check_model(model);
    if (inputs.size() != targets.size()) throw ValidationError("l1_gradient: length mismatch");
    if (inputs.empty()) throw ValidationError("l1_gradient: empty batch");

    const std::size_t dim = model.dimension;
    const std::size_t hidden = model.hidden_width;
    std::vector<double> grad(model.params.size(), 0.0);
    std::vector<double> zh;
    for (std::size_t s = 0; s < inputs.size(); ++s) {
        const auto x = inputs[s];
        if (x.size() != dim) throw ValidationError("l1_gradient: embedding dimension mismatch");
        const double pred = forward(model, x, hidden == 0 ? nullptr : &zh);
        const double g = sign(pred - targets[s]);
        if (g == 0.0) continue;
        if (hidden == 0) {
            for (std::size_t d = 0; d < dim; ++d) grad[d] += g * static_cast<double>(x[d]);
            grad[dim] += g;
        } else {
            const double* w2 = model.params.data() + hidden * dim + hidden;
            double* gw1 = grad.data();
            double* gb1 = grad.data() + hidden * dim;
            double* gw2 = gb1 + hidden;
            for (std::size_t h = 0; h < hidden; ++h) {
                const double a = zh[h] > 0.0 ? zh[h] : 0.0;
                gw2[h] += g * a;
                if (zh[h] > 0.0) {
                    const double gz = g * w2[h];
                    double* row = gw1 + h * dim;
                    for (std::size_t d = 0; d < dim; ++d) row[d] += gz * static_cast<double>(x[d]);
                    gb1[h] += gz;
                }
            }
            gw2[hidden] += g;  // b2
        }
    }
    const double inv = 1.0 / static_cast<double>(inputs.size());
    for (double& v : grad) v *= inv;
    return grad;
}

TrainResult train_model(RegressorModel model, const std::vector<std::span<const float>>& inputs,
                        std::span<const double> targets, const TrainConfig& config) {
    config.validate();
    check_model(model);
    if (inputs.size() != targets.size()) throw ValidationError("train_model: length mismatch");
    if (inputs.empty()) throw ValidationError("train_model: empty training set");
    for (const auto& x : inputs)
        if (x.size() != model.dimension) throw ValidationError("train_model: embedding dimension mismatch");

    const std::size_t n = inputs.size();
    const std::size_t batch = static_cast<std::size_t>(config.batch_size);
    Rng shuffle_rng(derive_seed(config.seed, 2));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});

    TrainResult result;
    result.epoch_loss.reserve(static_cast<std::size_t>(config.epochs));
    std::vector<std::span<const float>> batch_inputs;
    std::vector<double> batch_targets;
    std::vector<double> predictions(n);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = n - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(shuffle_rng.bounded(i + 1));
            std::swap(perm[i], perm[j]);
        }
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(n, start + batch);
            batch_inputs.clear();
            batch_targets.clear();
            for (std::size_t i = start; i < stop; ++i) {
                batch_inputs.push_back(inputs[perm[i]]);
                batch_targets.push_back(targets[perm[i]]);
            }
            const std::vector<double> grad = l1_gradient(model, batch_inputs, batch_targets);
            for (std::size_t j = 0; j < model.params.size(); ++j)
                model.params[j] -= config.learning_rate * grad[j];
        }
        for (std::size_t i = 0; i < n; ++i) predictions[i] = forward(model, inputs[i], nullptr);
        result.epoch_loss.push_back(l1_loss(predictions, targets));
    }
    result.model = std::move(model);
    return result;
}

TrainResult train_regressor(const DatasetBundle& bundle, const QualityTable& labels,
                            const TrainConfig& config) {
    config.validate();
    if (bundle.size() == 0) throw ValidationError("train_regressor: empty bundle");
    if (labels.size() != bundle.size())
        throw ValidationError("train_regressor: labels do not match the bundle's image set");

    std::vector<std::span<const float>> inputs;
    std::vector<double> targets;
    inputs.reserve(bundle.size());
    targets.reserve(bundle.size());
    for (std::size_t i = 0; i < bundle.size(); ++i) {
        const std::string& image_id = bundle.record(i).image_id;
        if (!labels.contains(image_id))
            throw ValidationError("train_regressor: no label for image '" + image_id + "'");
        const double label = labels.at(image_id);
        if (!(label >= 0.0 && label <= 1.0))
            throw ValidationError("train_regressor: label for image '" + image_id +
                                  "' is outside [0, 1]; normalize first");
        inputs.push_back(bundle.vec(i));
        targets.push_back(label);
    }

    RegressorModel model =
        init_regressor(bundle.dimension(), static_cast<std::size_t>(config.hidden_width),
                       derive_seed(config.seed, 1));
    return train_model(std::move(model), inputs, targets, config);
}

void save_model(const std::filesystem::path& path, const RegressorModel& model) {
    check_model(model);
    nlohmann::json doc;
    doc["version"] = 1;
    doc["architecture"] = model.hidden_width == 0 ? "linear" : "hidden";
    doc["dimension"] = model.dimension;
    doc["hidden_width"] = model.hidden_width;
    doc["params"] = model.params;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing: " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("cannot write file: " + path.string());
}

RegressorModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("bad model file " + path.string() + ": " + e.what());
    }
    RegressorModel model;
    try {
        if (doc.at("version").get<int>() != 1)
            throw ValidationError("unsupported model version in " + path.string());
        model.dimension = doc.at("dimension").get<std::size_t>();
        model.hidden_width = doc.at("hidden_width").get<std::size_t>();
        const std::string arch = doc.at("architecture").get<std::string>();
        if (arch != (model.hidden_width == 0 ? "linear" : "hidden"))
            throw ValidationError("architecture does not match hidden_width in " + path.string());
        model.params = doc.at("params").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("bad model file " + path.string() + ": " + e.what());
    }
    for (double p : model.params)
        if (!std::isfinite(p)) throw ValidationError("non-finite parameter in " + path.string());
    check_model(model);
    return model;
}

void write_loss_trace(const std::filesystem::path& path, std::span<const double> epoch_loss) {
    std::ostringstream buf;
    buf << "epoch,l1_loss\n";
    for (std::size_t i = 0; i < epoch_loss.size(); ++i)
        buf << (i + 1) << ',' << format_double(epoch_loss[i]) << '\n';
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing: " + path.string());
    out << buf.str();
    if (!out) throw IoError("cannot write file: " + path.string());
}

}  // namespace fiqopt
