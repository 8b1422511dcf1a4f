#include <algorithm>
#include <atomic>
#include <map>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ltc/error.hpp"
#include "ltc/losses.hpp"
#include "ltc/mkee.hpp"
#include "ltc/pipeline.hpp"

namespace ltc {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Independent streams derived from the master seed.
enum class SeedStream : std::uint64_t { kData = 1, kSplit = 2, kInit = 3, kTrain = 4 };

std::uint64_t derive_seed(std::uint64_t seed, SeedStream s) {
    return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(s)));
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

DenseMatrix features_of(const ModelParams& params, const DenseMatrix& x) {
    DenseMatrix f(0, params.feature_dim());
    for (std::size_t i = 0; i < x.rows(); ++i) f.append_row(forward(params, x.row(i)).feature);
    return f;
}

void require_finite(double v, const char* what, int epoch, std::size_t iteration) {
    if (!std::isfinite(v)) {
        throw Error(std::string("training diverged: non-finite ") + what + " at epoch " + std::to_string(epoch) +
                    ", iteration " + std::to_string(iteration));
    }
}

}  // namespace

Dataset build_dataset(const RunConfig& cfg) {
    if (cfg.data_source == "csv") return load_embeddings_csv(cfg.data_path);
    SynthSpec spec = cfg.synth;
    spec.seed = derive_seed(cfg.seed, SeedStream::kData);
    return synth_mixture(spec);
}

OcdSplit build_split(const RunConfig& cfg) {
    return make_split(build_dataset(cfg), cfg.synth.k_known, cfg.train_fraction,
                      derive_seed(cfg.seed, SeedStream::kSplit));
}

TrainOutcome run_train(const RunConfig& cfg, const OcdSplit& split, std::ostream* diagnostics) {
    cfg.validate();
    const auto t0 = Clock::now();
    const std::size_t k = split.k_known();
    const std::size_t n = split.support.size();

    TrainOutcome out;
    TrainedModel& model = out.model;
    model.params = init_params(cfg.model_shape(split.support.dim(), k), derive_seed(cfg.seed, SeedStream::kInit));
    model.store = PrototypeStore::from_features(features_of(model.params, split.support.x), split.support.labels, k);
    ThresholdConfig tc = cfg.threshold;
    if (!cfg.adaptive_tau) tc.beta = 0.0;
    model.threshold = ThresholdState::from_config(tc);

    OptimizerState opt = OptimizerState::for_params(model.params, cfg.optim);
    Rng rng(derive_seed(cfg.seed, SeedStream::kTrain));
    const double gamma = cfg.enable_mm ? cfg.loss.gamma_mm : 0.0;
    const std::size_t d = model.params.feature_dim();

    if (diagnostics) write_diagnostics_header(*diagnostics);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t iteration = 0;
    PseudoSummary& ps = out.record.pseudo;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        EpochRecord er;
        er.epoch = epoch;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t end = std::min(n, start + cfg.batch_size);
            const std::size_t b = end - start;
            DenseMatrix xb(0, split.support.dim());
            std::vector<int> yb;
            for (std::size_t i = start; i < end; ++i) {
                xb.append_row(split.support.x.row(order[i]));
                yb.push_back(split.support.labels[order[i]]);
            }

            // 1) raw and augmented views
            std::vector<ForwardTrace> views;
            views.reserve(2 * b);
            for (std::size_t i = 0; i < b; ++i) views.push_back(forward(model.params, xb.row(i)));
            for (std::size_t i = 0; i < b; ++i) {
                views.push_back(forward(model.params, augment(xb.row(i), cfg.aug_noise, rng)));
            }
            DenseMatrix feats(2 * b, d);
            DenseMatrix logits(2 * b, k);
            std::vector<int> view_labels(2 * b);
            for (std::size_t v = 0; v < 2 * b; ++v) {
                std::copy(views[v].feature.begin(), views[v].feature.end(), feats.row(v).begin());
                std::copy(views[v].logits.begin(), views[v].logits.end(), logits.row(v).begin());
                view_labels[v] = yb[v % b];
            }
            const SupConLoss sup = sup_con_loss(feats, view_labels, cfg.loss.temperature);
            const MatrixLoss ce = ce_loss(logits, view_labels);

            // 2-3) trigger and pseudo-unknowns
            PseudoBatch pseudo;
            if (cfg.enable_mkee) {
                DenseMatrix refs(b, d);
                for (std::size_t i = 0; i < b; ++i) {
                    std::copy(views[i].feature.begin(), views[i].feature.end(), refs.row(i).begin());
                }
                pseudo = generate_pseudo_batch(model.params, xb, yb, refs, cfg.mkee, epoch, rng);
            }
            if (diagnostics && !pseudo.empty()) write_diagnostics(*diagnostics, iteration, pseudo);
            for (const auto& dg : pseudo.diagnostics) {
                ++ps.samples;
                ps.entropy_before += dg.entropy_before;
                ps.entropy_after += dg.entropy_after;
                ps.density_before += dg.density_before;
                ps.density_after += dg.density_after;
                ps.objective_before += dg.objective_before;
                ps.objective_after += dg.objective_after;
            }

            // 4) s_max scores, margin loss, threshold
            std::vector<MatchResult> known_match, pseudo_match;
            Vector known_s, pseudo_s;
            for (std::size_t i = 0; i < b; ++i) {
                known_match.push_back(match(model.store, views[i].feature));
                known_s.push_back(known_match.back().s_max);
            }
            std::vector<ForwardTrace> pseudo_traces;
            for (std::size_t a = 0; a < pseudo.size(); ++a) {
                pseudo_traces.push_back(forward(model.params, pseudo.outputs.row(a)));
                pseudo_match.push_back(match(model.store, pseudo_traces.back().feature));
                pseudo_s.push_back(pseudo_match.back().s_max);
            }
            const MarginLoss mm = max_margin_loss(known_s, pseudo_s, model.threshold.tau, cfg.loss.m_pos, cfg.loss.m_neg);
            const double mm_used = cfg.enable_mm ? mm.total : 0.0;
            bool tau_updated = false;
            if (pseudo.triggered && !pseudo.empty()) {
                update_threshold(model.threshold, known_s, pseudo_s);
                tau_updated = true;
            }

            const double total = total_loss(ce.value, sup.value, mm_used, cfg.loss.alpha, gamma);
            require_finite(total, "loss", epoch, iteration);

            // 5) gradient step
            ModelParams grads = model.params.zeros_like();
            for (std::size_t v = 0; v < 2 * b; ++v) {
                OutputGrad g;
                g.d_feature.assign(sup.grad.row(v).begin(), sup.grad.row(v).end());
                for (double& x : g.d_feature) x *= cfg.loss.alpha;
                g.d_logits.assign(ce.grad.row(v).begin(), ce.grad.row(v).end());
                if (v < b && gamma != 0.0 && mm.grad_known[v] != 0.0) {
                    const auto proto = model.store.prototype(known_match[v].best_index);
                    for (std::size_t j = 0; j < d; ++j) g.d_feature[j] += gamma * mm.grad_known[v] * proto[j];
                }
                backward(model.params, views[v], g, &grads, nullptr);
            }
            if (gamma != 0.0) {
                for (std::size_t a = 0; a < pseudo_traces.size(); ++a) {
                    if (mm.grad_pseudo[a] == 0.0) continue;
                    OutputGrad g;
                    const auto proto = model.store.prototype(pseudo_match[a].best_index);
                    g.d_feature.assign(proto.begin(), proto.end());
                    for (double& x : g.d_feature) x *= gamma * mm.grad_pseudo[a];
                    backward(model.params, pseudo_traces[a], g, &grads, nullptr);
                }
            }
            adamw_step(model.params, grads, opt);
            for (std::size_t i = 0; i < b; ++i) model.store.running_update(views[i].feature, yb[i], cfg.proto_momentum);

            ++er.batches;
            er.total += total;
            er.ce += ce.value;
            er.sup += sup.value;
            er.mm += mm_used;
            er.mm_pos += cfg.enable_mm ? mm.pos : 0.0;
            er.mm_neg += cfg.enable_mm ? mm.neg : 0.0;
            er.triggers += pseudo.triggered ? 1 : 0;
            er.pseudo_samples += pseudo.size();
            out.record.tau_trajectory.push_back(TauPoint{iteration, model.threshold.tau, tau_updated});
            ++iteration;
        }
        if (er.batches) {
            const double inv = 1.0 / static_cast<double>(er.batches);
            er.total *= inv;
            er.ce *= inv;
            er.sup *= inv;
            er.mm *= inv;
            er.mm_pos *= inv;
            er.mm_neg *= inv;
        }
        er.tau_end = model.threshold.tau;
        out.record.epochs.push_back(er);
    }

    if (ps.samples) {
        const double inv = 1.0 / static_cast<double>(ps.samples);
        ps.entropy_before *= inv;
        ps.entropy_after *= inv;
        ps.density_before *= inv;
        ps.density_after *= inv;
        ps.objective_before *= inv;
        ps.objective_after *= inv;
    }
    if (cfg.proto_final_refresh) {
        model.store = PrototypeStore::from_features(features_of(model.params, split.support.x), split.support.labels, k);
    }
    out.record.tau_final = model.threshold.tau;
    out.timings.train_seconds = seconds_since(t0);
    return out;
}

TensorFile to_checkpoint(const TrainedModel& model) {
    TensorFile f;
    put_params(f, model.params);
    model.store.put(f);
    f.scalars["threshold.tau"] = model.threshold.tau;
    f.scalars["threshold.tau_init"] = model.threshold.tau_init;
    f.scalars["threshold.beta"] = model.threshold.beta;
    f.scalars["threshold.q_pos"] = model.threshold.q_pos;
    f.scalars["threshold.q_neg"] = model.threshold.q_neg;
    return f;
}

TrainedModel from_checkpoint(const TensorFile& file) {
    TrainedModel m;
    m.params = get_params(file);
    m.store = PrototypeStore::get(file);
    if (m.store.dim() != m.params.feature_dim()) throw DimensionError("checkpoint: prototype dim != feature dim");
    m.threshold.tau = file.scalar("threshold.tau");
    m.threshold.tau_init = file.scalar("threshold.tau_init");
    m.threshold.beta = file.scalar("threshold.beta");
    m.threshold.q_pos = file.scalar("threshold.q_pos");
    m.threshold.q_neg = file.scalar("threshold.q_neg");
    return m;
}

StreamOutcome run_stream(const TrainedModel& model, const OcdSplit& split, std::optional<double> tau_override) {
    if (split.query.dim() != model.params.input_dim()) {
        throw DimensionError("stream: data dim " + std::to_string(split.query.dim()) + " != model input dim " +
                             std::to_string(model.params.input_dim()));
    }
    StreamOutcome out;
    out.store = model.store;
    out.store.truncate_to_known();
    out.tau = tau_override ? *tau_override : model.threshold.tau;
    QueryStream stream(split);
    while (auto item = stream.next()) {
        const ForwardTrace t = forward(model.params, item->x);
        const Assignment a = assign_or_spawn(out.store, out.tau, t.feature);
        out.records.push_back(StreamRecord{item->id, a.index, a.s_max, a.spawned});
    }
    return out;
}

std::vector<TruthRow> truth_rows(const OcdSplit& split) {
    std::vector<TruthRow> rows;
    for (std::size_t i = 0; i < split.query.size(); ++i) {
        rows.push_back(TruthRow{i, split.query.labels[i], split.query_is_old[i]});
    }
    return rows;
}

StreamResult join_stream(const std::vector<StreamRecord>& records, const std::vector<TruthRow>& truth) {
    if (records.size() != truth.size()) {
        throw InvalidArgument("eval: stream has " + std::to_string(records.size()) + " items, truth has " +
                              std::to_string(truth.size()));
    }
    std::map<std::size_t, const TruthRow*> by_id;
    for (const auto& t : truth) {
        if (!by_id.emplace(t.item_id, &t).second) throw InvalidArgument("eval: duplicate truth id " + std::to_string(t.item_id));
    }
    StreamResult r;
    std::set<int> old;
    std::set<std::size_t> seen;
    for (const auto& rec : records) {
        auto it = by_id.find(rec.item_id);
        if (it == by_id.end()) throw InvalidArgument("eval: stream item " + std::to_string(rec.item_id) + " has no truth row");
        if (!seen.insert(rec.item_id).second) throw InvalidArgument("eval: duplicate stream id " + std::to_string(rec.item_id));
        r.truth.push_back(it->second->label);
        r.predicted.push_back(rec.predicted);
        if (it->second->is_old) old.insert(it->second->label);
    }
    r.old_classes.assign(old.begin(), old.end());
    return r;
}

EvalReport run_eval(const std::vector<StreamRecord>& records, const std::vector<TruthRow>& truth) {
    return evaluate(join_stream(records, truth));
}

ExperimentResult run_experiment(const RunConfig& cfg) {
    const OcdSplit split = build_split(cfg);
    TrainOutcome trained = run_train(cfg, split);
    ExperimentResult res;
    res.record = std::move(trained.record);
    res.timings = trained.timings;
    auto t0 = Clock::now();
    const std::optional<double> tau =
        std::isnan(cfg.stream_tau_override) ? std::nullopt : std::optional<double>(cfg.stream_tau_override);
    StreamOutcome s = run_stream(trained.model, split, tau);
    res.timings.stream_seconds = seconds_since(t0);
    t0 = Clock::now();
    res.stream = std::move(s.records);
    res.report = run_eval(res.stream, truth_rows(split));
    res.timings.eval_seconds = seconds_since(t0);
    return res;
}

std::vector<SweepRow> run_sweep(const RunConfig& cfg, const std::string& axis, const std::vector<std::string>& values,
                                std::size_t jobs) {
    if (!is_config_key(axis)) throw ConfigError("sweep: unknown axis '" + axis + "'");
    if (values.empty()) throw ConfigError("sweep: no values given");
    std::vector<RunConfig> configs;
    for (const auto& v : values) {
        RunConfig c = cfg;
        set_config_value(c, axis, v);
        c.validate();
        configs.push_back(std::move(c));
    }
    std::vector<SweepRow> rows(values.size());
    std::vector<std::exception_ptr> errors(values.size());
    auto run_one = [&](std::size_t i) {
        try {
            ExperimentResult r = run_experiment(configs[i]);
            rows[i] = SweepRow{values[i], std::move(r.report), r.record.tau_final};
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    jobs = std::max<std::size_t>(1, std::min(jobs, values.size()));
    if (jobs == 1) {
        for (std::size_t i = 0; i < values.size(); ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < jobs; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < values.size(); i = next++) run_one(i);
            });
        }
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return rows;
}

std::string record_to_json(const RunRecord& record) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json epochs = nlohmann::ordered_json::array();
    for (const auto& e : record.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"batches", e.batches},
                          {"loss_total", e.total},
                          {"loss_ce", e.ce},
                          {"loss_sup", e.sup},
                          {"loss_mm", e.mm},
                          {"loss_mm_pos", e.mm_pos},
                          {"loss_mm_neg", e.mm_neg},
                          {"triggers", e.triggers},
                          {"pseudo_samples", e.pseudo_samples},
                          {"tau_end", e.tau_end}});
    }
    j["epochs"] = epochs;
    nlohmann::ordered_json tau = nlohmann::ordered_json::array();
    for (const auto& p : record.tau_trajectory) tau.push_back({p.iteration, p.tau, p.updated});
    j["tau_trajectory"] = tau;
    const PseudoSummary& ps = record.pseudo;
    j["pseudo"] = {{"samples", ps.samples},
                   {"entropy_before", ps.entropy_before},
                   {"entropy_after", ps.entropy_after},
                   {"density_before", ps.density_before},
                   {"density_after", ps.density_after},
                   {"objective_before", ps.objective_before},
                   {"objective_after", ps.objective_after}};
    j["tau_final"] = record.tau_final;
    return j.dump(2) + "\n";
}

RunRecord record_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    RunRecord r;
    for (const auto& e : j.at("epochs")) {
        EpochRecord er;
        er.epoch = e.at("epoch");
        er.batches = e.at("batches");
        er.total = e.at("loss_total");
        er.ce = e.at("loss_ce");
        er.sup = e.at("loss_sup");
        er.mm = e.at("loss_mm");
        er.mm_pos = e.at("loss_mm_pos");
        er.mm_neg = e.at("loss_mm_neg");
        er.triggers = e.at("triggers");
        er.pseudo_samples = e.at("pseudo_samples");
        er.tau_end = e.at("tau_end");
        r.epochs.push_back(er);
    }
    for (const auto& p : j.at("tau_trajectory")) r.tau_trajectory.push_back(TauPoint{p.at(0), p.at(1), p.at(2)});
    const auto& ps = j.at("pseudo");
    r.pseudo = PseudoSummary{ps.at("samples"),        ps.at("entropy_before"), ps.at("entropy_after"),
                             ps.at("density_before"), ps.at("density_after"),  ps.at("objective_before"),
                             ps.at("objective_after")};
    r.tau_final = j.at("tau_final");
    return r;
}

std::string timings_to_json(const Timings& t) {
    nlohmann::ordered_json j;
    j["train_seconds"] = t.train_seconds;
    j["stream_seconds"] = t.stream_seconds;
    j["eval_seconds"] = t.eval_seconds;
    return j.dump(2) + "\n";
}

std::string sweep_to_json(const std::string& axis, const std::vector<SweepRow>& rows) {
    nlohmann::ordered_json j;
    j["axis"] = axis;
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        arr.push_back({{"value", r.value},
                       {"tau_final", r.tau_final},
                       {"report", nlohmann::ordered_json::parse(report_to_json(r.report))}});
    }
    j["rows"] = arr;
    return j.dump(2) + "\n";
}

std::vector<SweepRow> sweep_from_json(const std::string& text, std::string* axis) {
    const auto j = nlohmann::json::parse(text);
    if (axis) *axis = j.at("axis");
    std::vector<SweepRow> rows;
    for (const auto& r : j.at("rows")) {
        rows.push_back(SweepRow{r.at("value"), report_from_json(r.at("report").dump()), r.at("tau_final")});
    }
    return rows;
}

namespace {

std::string fixed(double v, int prec = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << v;
    return s.str();
}

std::string table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    }
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& r) {
        for (std::size_t c = 0; c < r.size(); ++c) {
            if (c) out << "  ";
            out << std::setw(static_cast<int>(width[c])) << r[c];
        }
        out << '\n';
    };
    line(header);
    std::size_t total = 0;
    for (auto w : width) total += w;
    out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    for (const auto& r : rows) line(r);
    return out.str();
}

std::string csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& r) {
        for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << r[c];
        out << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out.str();
}

const std::vector<std::string> kEpochHeader = {"epoch", "total", "ce", "sup", "mm", "mm_pos", "mm_neg", "triggers", "pseudo", "tau"};

std::vector<std::vector<std::string>> epoch_rows(const RunRecord& r, bool exact) {
    auto num = [&](double v) { return exact ? format_exact(v) : fixed(v); };
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : r.epochs) {
        rows.push_back({std::to_string(e.epoch), num(e.total), num(e.ce), num(e.sup), num(e.mm), num(e.mm_pos),
                        num(e.mm_neg), std::to_string(e.triggers), std::to_string(e.pseudo_samples), num(e.tau_end)});
    }
    return rows;
}

const std::vector<std::string> kSweepHeader = {"value", "strict_all", "strict_old", "strict_new", "greedy_all",
                                               "greedy_old", "greedy_new", "num_cls", "tau_final"};

std::vector<std::vector<std::string>> sweep_rows(const std::vector<SweepRow>& rows, bool exact) {
    auto num = [&](double v) { return exact ? format_exact(v) : fixed(v); };
    std::vector<std::vector<std::string>> out;
    for (const auto& r : rows) {
        out.push_back({r.value, num(r.report.strict.all), num(r.report.strict.old_), num(r.report.strict.new_),
                       num(r.report.greedy.all), num(r.report.greedy.old_), num(r.report.greedy.new_),
                       std::to_string(r.report.num_predicted_categories), num(r.tau_final)});
    }
    return out;
}

}  // namespace

std::string render_epochs_table(const RunRecord& record) { return table(kEpochHeader, epoch_rows(record, false)); }
std::string render_epochs_csv(const RunRecord& record) { return csv(kEpochHeader, epoch_rows(record, true)); }

std::string render_report_table(const EvalReport& r) {
    std::vector<std::vector<std::string>> rows = {
        {"strict", fixed(r.strict.all), fixed(r.strict.old_), fixed(r.strict.new_)},
        {"greedy", fixed(r.greedy.all), fixed(r.greedy.old_), fixed(r.greedy.new_)},
    };
    std::string out = table({"protocol", "all", "old", "new"}, rows);
    out += "#Cls " + std::to_string(r.num_predicted_categories) + " (true " + std::to_string(r.num_true_classes) +
           ", error " + std::to_string(r.category_count_error) + "), items " + std::to_string(r.num_items) + "\n";
    return out;
}

std::string render_sweep_table(const std::string& axis, const std::vector<SweepRow>& rows) {
    auto header = kSweepHeader;
    header[0] = axis;
    return table(header, sweep_rows(rows, false));
}

std::string render_sweep_csv(const std::string& axis, const std::vector<SweepRow>& rows) {
    auto header = kSweepHeader;
    header[0] = axis;
    return csv(header, sweep_rows(rows, true));
}

}  // namespace ltc
