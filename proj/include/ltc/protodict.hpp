#pragma once
// Prototype dictionary: unit class prototypes, cosine matching with novelty
// spawning, running-mean refresh during training, and the adaptive
// threshold (quantile midpoint tracked by an EMA).
//
// Indices are 0-based. Known classes occupy [0, k_known); spawned categories
// are appended after them and never reordered.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "ltc/dense.hpp"
#include "ltc/tensor_file.hpp"

namespace ltc {

class PrototypeStore {
public:
    PrototypeStore() = default;

    // Normalized class means. labels in [0, k). Throws InvalidArgument on an
    // empty class and DegenerateError on a (near) zero mean.
    static PrototypeStore from_features(const DenseMatrix& features, std::span<const int> labels, std::size_t k);

    std::size_t size() const { return prototypes_.rows(); }
    std::size_t k_known() const { return k_known_; }
    bool empty() const { return size() == 0; }
    std::size_t dim() const { return prototypes_.cols(); }

    std::span<const double> prototype(std::size_t i) const { return prototypes_.row(i); }
    const DenseMatrix& prototypes() const { return prototypes_; }

    // Appends f (already unit norm) and returns its index.
    std::size_t append(std::span<const double> f);

    // m_y <- mu*m_y + (1-mu)*f;  P_y <- m_y/|m_y|. Known classes only.
    void running_update(std::span<const double> f, int y, double momentum);

    // Drop spawned prototypes, keeping the known ones.
    void truncate_to_known();

    void put(TensorFile& file) const;
    static PrototypeStore get(const TensorFile& file);

private:
    DenseMatrix prototypes_;
    DenseMatrix accumulators_;  // one per known class
    std::size_t k_known_ = 0;
};

struct MatchResult {
    std::size_t best_index = 0;
    double s_max = 0.0;
    Vector scores;
};

// Cosine scores against every prototype; ties resolve to the lowest index.
MatchResult match(const PrototypeStore& store, std::span<const double> f);

struct Assignment {
    std::size_t index = 0;
    double s_max = 0.0;
    bool spawned = false;
};

// Novel when s_max < tau (strict): f is appended as a new prototype.
Assignment assign_or_spawn(PrototypeStore& store, double tau, std::span<const double> f);

struct ThresholdConfig {
    double tau_init = 0.7;
    double beta = 0.001;
    double q_pos = 0.8;
    double q_neg = 0.2;

    void validate() const;
};

struct ThresholdStep {
    double u_pos = 0.0;
    double u_neg = 0.0;
    double target = 0.0;
    double tau = 0.0;  // after the update
};

struct ThresholdState {
    double tau = 0.7;
    double tau_init = 0.7;
    double beta = 0.001;
    double q_pos = 0.8;
    double q_neg = 0.2;
    std::vector<ThresholdStep> history;

    static ThresholdState from_config(const ThresholdConfig& c);
};

// Linear interpolation between order statistics at rank q*(n-1).
double percentile(std::span<const double> values, double q);

struct QuantileTargets {
    double u_pos = 0.0;
    double u_neg = 0.0;
    double target = 0.0;
};

// Throws InvalidArgument when either score set is empty.
QuantileTargets quantile_targets(std::span<const double> known_scores, std::span<const double> pseudo_scores,
                                 double q_pos, double q_neg);

// tau <- (1 - beta) tau + beta * target.
double ema_update(ThresholdState& state, double target);
// Quantile targets followed by the EMA update, recorded in history.
ThresholdStep update_threshold(ThresholdState& state, std::span<const double> known_scores,
                               std::span<const double> pseudo_scores);

// One row per stream item.
struct StreamRecord {
    std::size_t item_id = 0;
    std::size_t predicted = 0;
    double s_max = 0.0;
    bool spawned = false;
};

// CSV header: item_id,predicted,s_max,spawned
void write_stream_csv(std::ostream& out, std::span<const StreamRecord> records);
std::vector<StreamRecord> read_stream_csv(std::istream& in);
void save_stream_csv(const std::filesystem::path& path, std::span<const StreamRecord> records);
std::vector<StreamRecord> load_stream_csv(const std::filesystem::path& path);

}  // namespace ltc
