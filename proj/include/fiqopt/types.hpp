#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fiqopt/errors.hpp"

namespace fiqopt {

// One image: its id, the id of the subject it shows, and the embedding vector
// produced by an upstream feature extractor. Components are stored as float32
// exactly as read from file.
struct EmbeddingRecord {
    std::string image_id;
    std::string identity_id;
    std::vector<float> vector;
};

struct TransparentStringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
};

// Map image_id -> scalar quality score. Preserves insertion order so score
// files round-trip row for row. Scores are held as double but parsed from and
// written to text as binary32 values.
class QualityTable {
public:
    void insert(std::string image_id, double score);
    bool contains(std::string_view image_id) const { return index_.find(image_id) != index_.end(); }
    double at(std::string_view image_id) const;

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    // (image_id, score) pairs in insertion order.
    const std::vector<std::pair<std::string, double>>& entries() const { return entries_; }

private:
    std::vector<std::pair<std::string, double>> entries_;
    std::unordered_map<std::string, std::size_t, TransparentStringHash, std::equal_to<>> index_;
};

// Settings for the label optimization procedure.
struct OptimConfig {
    int clusters = 20;        // intra-identity cluster count C
    double theta = 0.001;     // update rate, in [0, 1]
    int repeats = 10;         // independent repetitions R
    std::uint64_t seed = 42;  // base seed for all derived streams

    void validate() const;  // throws ValidationError
};

// Embeddings plus aligned quality scores, cross-checked and indexed by
// identity. Built through validate_bundle(); never constructed raw.
class DatasetBundle {
public:
    std::size_t size() const { return records_.size(); }        // N
    std::size_t dimension() const { return dimension_; }        // D
    const std::vector<EmbeddingRecord>& records() const { return records_; }
    const EmbeddingRecord& record(std::size_t i) const { return records_[i]; }
    std::span<const float> vec(std::size_t i) const { return records_[i].vector; }

    // Score for record i (same value as qualities().at(record(i).image_id)).
    double quality(std::size_t i) const { return quality_by_record_[i]; }
    const std::vector<double>& qualities_by_record() const { return quality_by_record_; }
    const QualityTable& qualities() const { return qualities_; }

    // Identities in order of first appearance; members are record indices in
    // file order.
    std::size_t identity_count() const { return identity_names_.size(); }
    const std::string& identity_name(std::size_t k) const { return identity_names_[k]; }
    const std::vector<std::size_t>& identity_members(std::size_t k) const { return identity_members_[k]; }

    // Ordinal of the named identity; throws ValidationError if absent.
    std::size_t identity_index(std::string_view identity_id) const;

private:
    friend DatasetBundle validate_bundle(std::vector<EmbeddingRecord> embeddings, QualityTable qualities);

    std::vector<EmbeddingRecord> records_;
    std::vector<double> quality_by_record_;
    QualityTable qualities_;
    std::vector<std::string> identity_names_;
    std::vector<std::vector<std::size_t>> identity_members_;
    std::unordered_map<std::string, std::size_t, TransparentStringHash, std::equal_to<>> identity_ordinals_;
    std::size_t dimension_ = 0;
};

// Checks that embeddings and scores describe the same image set and that
// every record is well formed (uniform dimension >= 2, finite components,
// positive norm, unique non-empty ids), then builds the identity index.
// Throws ValidationError naming the first offending id.
DatasetBundle validate_bundle(std::vector<EmbeddingRecord> embeddings, QualityTable qualities);

}  // namespace fiqopt
