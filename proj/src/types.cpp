#include "fiqopt/types.hpp"

#include <cmath>
#include <unordered_map>

namespace fiqopt {

void QualityTable::insert(std::string image_id, double score) {
    if (image_id.empty()) throw ValidationError("empty image_id in quality table");
    if (!std::isfinite(score)) throw ValidationError("non-finite score for image '" + image_id + "'");
    if (contains(image_id)) throw ValidationError("duplicate image_id in quality table: '" + image_id + "'");
    index_.emplace(image_id, entries_.size());
    entries_.emplace_back(std::move(image_id), score);
}

double QualityTable::at(std::string_view image_id) const {
    const auto it = index_.find(image_id);
    if (it == index_.end())
        throw ValidationError("unknown image_id in quality table: '" + std::string(image_id) + "'");
    return entries_[it->second].second;
}

std::size_t DatasetBundle::identity_index(std::string_view identity_id) const {
    const auto it = identity_ordinals_.find(identity_id);
    if (it == identity_ordinals_.end())
        throw ValidationError("unknown identity: '" + std::string(identity_id) + "'");
    return it->second;
}

void OptimConfig::validate() const {
    if (clusters < 2) throw ValidationError("clusters must be >= 2");
    if (!(theta >= 0.0 && theta <= 1.0)) throw ValidationError("theta must lie in [0, 1]");
    if (repeats < 1) throw ValidationError("repeats must be >= 1");
}

DatasetBundle validate_bundle(std::vector<EmbeddingRecord> embeddings, QualityTable qualities) {
    DatasetBundle bundle;
    bundle.dimension_ = embeddings.empty() ? 0 : embeddings.front().vector.size();

    std::unordered_map<std::string_view, std::size_t> identity_index;
    std::unordered_map<std::string_view, std::size_t> seen_images;
    bundle.quality_by_record_.reserve(embeddings.size());
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        const EmbeddingRecord& rec = embeddings[i];
        if (rec.image_id.empty()) throw ValidationError("empty image_id in embedding record");
        if (rec.identity_id.empty())
            throw ValidationError("empty identity_id for image '" + rec.image_id + "'");
        if (!seen_images.emplace(rec.image_id, i).second)
            throw ValidationError("duplicate image_id in embeddings: '" + rec.image_id + "'");
        if (rec.vector.size() != bundle.dimension_)
            throw ValidationError("dimension mismatch for image '" + rec.image_id + "'");
        if (bundle.dimension_ < 2)
            throw ValidationError("embedding dimension must be >= 2 (image '" + rec.image_id + "')");
        double norm_sq = 0.0;
        for (float v : rec.vector) {
            if (!std::isfinite(v))
                throw ValidationError("non-finite component in embedding for image '" + rec.image_id + "'");
            norm_sq += static_cast<double>(v) * static_cast<double>(v);
        }
        if (norm_sq <= 0.0)
            throw ValidationError("zero-norm embedding for image '" + rec.image_id + "'");
        if (!qualities.contains(rec.image_id))
            throw ValidationError("no quality score for image '" + rec.image_id + "'");
        bundle.quality_by_record_.push_back(qualities.at(rec.image_id));

        const auto [it, inserted] = identity_index.emplace(rec.identity_id, bundle.identity_names_.size());
        if (inserted) {
            bundle.identity_names_.push_back(rec.identity_id);
            bundle.identity_members_.emplace_back();
            bundle.identity_ordinals_.emplace(rec.identity_id, it->second);
        }
        bundle.identity_members_[it->second].push_back(i);
    }
    for (const auto& [image_id, score] : qualities.entries()) {
        if (seen_images.find(image_id) == seen_images.end())
            throw ValidationError("quality score for unknown image '" + image_id + "'");
    }

    bundle.records_ = std::move(embeddings);
    bundle.qualities_ = std::move(qualities);
    return bundle;
}

}  // namespace fiqopt
