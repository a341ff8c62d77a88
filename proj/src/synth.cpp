#include "fiqopt/synth.hpp"

#include <cmath>
#include <cstdio>

#include "fiqopt/rng.hpp"

namespace fiqopt {

namespace {

void normalize(std::vector<double>& v) {
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    const double norm = std::sqrt(norm_sq);
    if (norm <= 0.0) throw ValidationError("degenerate zero-norm draw in synthesis");
    for (double& x : v) x /= norm;
}

std::string identity_name(std::size_t k) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "id%05zu", k);
    return buf;
}

}  // namespace

void SynthConfig::validate() const {
    if (identities < 2) throw ValidationError("identities must be >= 2");
    if (images_min < 1) throw ValidationError("images_min must be >= 1");
    if (images_max < images_min) throw ValidationError("images_max must be >= images_min");
    if (dimension < 2) throw ValidationError("dimension must be >= 2");
    if (!(noise_floor > 0.0)) throw ValidationError("noise_floor must be positive");
    if (!(noise_ceil >= noise_floor)) throw ValidationError("noise_ceil must be >= noise_floor");
    if (!(baseline_corruption >= 0.0)) throw ValidationError("baseline_corruption must be >= 0");
}

SynthDataset generate_synthetic(const SynthConfig& config) {
    config.validate();
    SynthDataset out;
    const std::size_t dim = config.dimension;
    std::vector<double> prototype(dim), sample(dim);
    for (std::size_t k = 0; k < config.identities; ++k) {
        Rng rng(derive_seed(config.seed, k));
        std::size_t count = config.images_min;
        if (config.images_max > config.images_min)
            count += static_cast<std::size_t>(
                rng.bounded(config.images_max - config.images_min + 1));
        for (std::size_t d = 0; d < dim; ++d) prototype[d] = rng.gaussian();
        normalize(prototype);

        const std::string identity = identity_name(k);
        for (std::size_t i = 0; i < count; ++i) {
            const double sigma = rng.uniform(config.noise_floor, config.noise_ceil);
            for (std::size_t d = 0; d < dim; ++d)
                sample[d] = prototype[d] + sigma * rng.gaussian();
            const double corruption_draw = rng.gaussian();
            normalize(sample);

            EmbeddingRecord rec;
            char img[40];
            std::snprintf(img, sizeof(img), "%s_%04zu", identity.c_str(), i);
            rec.image_id = img;
            rec.identity_id = identity;
            rec.vector.resize(dim);
            for (std::size_t d = 0; d < dim; ++d) rec.vector[d] = static_cast<float>(sample[d]);
            out.records.push_back(std::move(rec));

            const double truth = 1.0 / (1.0 + sigma);
            out.truth.insert(img, truth);
            out.baseline.insert(img, truth + config.baseline_corruption * corruption_draw);
        }
    }
    return out;
}

}  // namespace fiqopt
