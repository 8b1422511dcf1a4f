#pragma once
// Training with pseudo-unknown generation, streaming inference, evaluation
// and parameter sweeps.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ltc/config.hpp"
#include "ltc/datakit.hpp"
#include "ltc/evalkit.hpp"
#include "ltc/neuralcore.hpp"
#include "ltc/protodict.hpp"
#include "ltc/tensor_file.hpp"

namespace ltc {

struct EpochRecord {
    int epoch = 0;
    std::size_t batches = 0;
    double total = 0.0;  // batch means of each term
    double ce = 0.0;
    double sup = 0.0;
    double mm = 0.0;
    double mm_pos = 0.0;
    double mm_neg = 0.0;
    std::size_t triggers = 0;
    std::size_t pseudo_samples = 0;
    double tau_end = 0.0;
};

struct TauPoint {
    std::size_t iteration = 0;
    double tau = 0.0;
    bool updated = false;
};

struct PseudoSummary {
    std::size_t samples = 0;
    double entropy_before = 0.0;  // means over all generated samples
    double entropy_after = 0.0;
    double density_before = 0.0;
    double density_after = 0.0;
    double objective_before = 0.0;
    double objective_after = 0.0;
};

struct RunRecord {
    std::vector<EpochRecord> epochs;
    std::vector<TauPoint> tau_trajectory;  // one point per batch
    PseudoSummary pseudo;
    double tau_final = 0.0;
};

struct Timings {
    double train_seconds = 0.0;
    double stream_seconds = 0.0;
    double eval_seconds = 0.0;
};

struct TrainedModel {
    ModelParams params;
    PrototypeStore store;
    ThresholdState threshold;
};

struct TrainOutcome {
    TrainedModel model;
    RunRecord record;
    Timings timings;
};

// Dataset for the config (synthetic or CSV) followed by the seen/novel split.
Dataset build_dataset(const RunConfig& cfg);
OcdSplit build_split(const RunConfig& cfg);

// Per batch: forward and ce/sup losses on raw + augmented views; Bernoulli
// trigger and pseudo-unknown generation; s_max scores, max-margin loss and
// (triggered batches only) the threshold update; AdamW step; running
// prototype update on the labeled features. Throws Error on a non-finite loss.
TrainOutcome run_train(const RunConfig& cfg, const OcdSplit& split, std::ostream* diagnostics = nullptr);

TensorFile to_checkpoint(const TrainedModel& model);
TrainedModel from_checkpoint(const TensorFile& file);

struct StreamOutcome {
    std::vector<StreamRecord> records;
    PrototypeStore store;  // known + spawned prototypes after the pass
    double tau = 0.0;
};

// One sequential pass over the query stream with tau frozen (the trained
// value unless tau_override is set).
StreamOutcome run_stream(const TrainedModel& model, const OcdSplit& split,
                         std::optional<double> tau_override = std::nullopt);

std::vector<TruthRow> truth_rows(const OcdSplit& split);

// Joins stream records with ground truth by item id; throws InvalidArgument
// on any mismatch.
StreamResult join_stream(const std::vector<StreamRecord>& records, const std::vector<TruthRow>& truth);
EvalReport run_eval(const std::vector<StreamRecord>& records, const std::vector<TruthRow>& truth);

struct ExperimentResult {
    RunRecord record;
    std::vector<StreamRecord> stream;
    EvalReport report;
    Timings timings;
};

// Data, split, train, stream and evaluate in memory.
ExperimentResult run_experiment(const RunConfig& cfg);

struct SweepRow {
    std::string value;
    EvalReport report;
    double tau_final = 0.0;
};

// One full run per value of `axis` (a config key), all sharing the seed.
// Throws ConfigError for an unknown axis or value. Runs may execute on up to
// `jobs` threads; rows come back in value order.
std::vector<SweepRow> run_sweep(const RunConfig& cfg, const std::string& axis,
                                const std::vector<std::string>& values, std::size_t jobs = 1);

std::string record_to_json(const RunRecord& record);
std::string timings_to_json(const Timings& t);
std::string sweep_to_json(const std::string& axis, const std::vector<SweepRow>& rows);

// Aligned text tables and CSV renderings used by `ltc report`.
std::string render_epochs_table(const RunRecord& record);
std::string render_epochs_csv(const RunRecord& record);
std::string render_report_table(const EvalReport& report);
std::string render_sweep_table(const std::string& axis, const std::vector<SweepRow>& rows);
std::string render_sweep_csv(const std::string& axis, const std::vector<SweepRow>& rows);

RunRecord record_from_json(const std::string& text);
std::vector<SweepRow> sweep_from_json(const std::string& text, std::string* axis);

}  // namespace ltc
