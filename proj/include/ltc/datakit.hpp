#pragma once
// Datasets, the known/novel split and the query stream.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ltc/dense.hpp"

namespace ltc {

struct Dataset {
    DenseMatrix x;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return x.cols(); }
    bool operator==(const Dataset&) const = default;
};

struct SynthSpec {
    std::size_t dim = 16;
    std::size_t k_known = 5;
    std::size_t k_novel = 5;
    std::size_t samples_per_class = 100;
    double separation = 3.0;  // radius of the sphere holding the class means
    double noise = 1.0;       // isotropic per-coordinate standard deviation
    std::uint64_t seed = 0;

    void validate() const;
};

// Class c gets mean separation * u_c (u_c uniform on the unit sphere) and
// samples mean + N(0, noise^2 I). Labels 0..k_known+k_novel-1, class-major
// order.
Dataset synth_mixture(const SynthSpec& spec);

// CSV with header `label,f0,...,f{D-1}`; errors name the offending line.
Dataset read_embeddings_csv(std::istream& in);
Dataset load_embeddings_csv(const std::filesystem::path& path);
void write_embeddings_csv(std::ostream& out, const Dataset& data);
void save_embeddings_csv(const std::filesystem::path& path, const Dataset& data);

struct OcdSplit {
    // Support set, labels remapped to head indices 0..k_known-1.
    Dataset support;
    std::vector<int> known_labels;  // head index -> original label
    std::vector<int> novel_labels;

    // Query set in stream order with original labels.
    Dataset query;
    std::vector<std::size_t> query_source;  // row in the full dataset
    std::vector<std::size_t> support_source;
    std::vector<bool> query_is_old;

    double train_fraction = 0.5;
    std::uint64_t seed = 0;

    std::size_t k_known() const { return known_labels.size(); }
    std::size_t num_classes() const { return known_labels.size() + novel_labels.size(); }
};

// The k_known smallest labels are the seen classes. Each seen class is
// shuffled and split at round(train_fraction * n_c) into support and query;
// every novel sample goes to the query set, which is then shuffled once.
OcdSplit make_split(const Dataset& data, std::size_t k_known, double train_fraction, std::uint64_t seed);

// JSON manifest recording seed, fraction, class partition and sizes.
std::string split_manifest_json(const OcdSplit& split);

struct StreamItem {
    std::size_t id = 0;
    std::span<const double> x;
};

// Yields query items in stream order. Labels stay in the split.
class QueryStream {
public:
    explicit QueryStream(const OcdSplit& split) : split_(&split) {}

    std::optional<StreamItem> next();
    std::size_t size() const { return split_->query.size(); }
    void reset() { pos_ = 0; }

private:
    const OcdSplit* split_;
    std::size_t pos_ = 0;
};

// Augmented view: x + N(0, scale^2 I).
std::vector<double> augment(std::span<const double> x, double scale, std::mt19937_64& rng);

// Ground-truth file for the stream: item_id,label,is_old
void write_truth_csv(std::ostream& out, const OcdSplit& split);

struct TruthRow {
    std::size_t item_id = 0;
    int label = 0;
    bool is_old = false;
};
std::vector<TruthRow> read_truth_csv(std::istream& in);

}  // namespace ltc
