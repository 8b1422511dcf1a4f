#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "ltc/config.hpp"
#include "ltc/error.hpp"
#include "ltc/pipeline.hpp"

using namespace ltc;

namespace {

// Small enough that a full train/stream/eval takes well under a second.
RunConfig tiny_config(std::uint64_t seed = 3) {
    RunConfig c;
    c.synth.dim = 8;
    c.synth.k_known = 3;
    c.synth.k_novel = 2;
    c.synth.samples_per_class = 30;
    c.hidden_width = 16;
    c.hidden_layers = 1;
    c.feature_dim = 8;
    c.epochs = 4;
    c.batch_size = 16;
    c.seed = seed;
    return c;
}

std::string stream_text(const std::vector<StreamRecord>& r) {
    std::ostringstream out;
    write_stream_csv(out, r);
    return out.str();
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config text parsing and errors") {
    RunConfig c;
    apply_config_text(c, "# comment\nmkee.epsilon = 0.02  # trailing\n\nseed=7\nablation.enable_mm = false\n");
    CHECK(c.mkee.epsilon == 0.02);
    CHECK(c.seed == 7);
    CHECK_FALSE(c.enable_mm);
    CHECK_THROWS_WITH_AS(apply_config_text(c, "seed = 1\nbogus.key = 3\n"), doctest::Contains("line 2"), ConfigError);
    CHECK_THROWS_AS(apply_config_text(c, "mkee.epsilon = abc\n"), ConfigError);
    CHECK_THROWS_AS(apply_config_text(c, "just words\n"), ConfigError);
    CHECK_THROWS_AS(set_config_value(c, "train.batch_size", "-3"), ConfigError);

    RunConfig bad;
    bad.threshold.tau_init = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = RunConfig{};
    bad.batch_size = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("config dump round trip and run hash") {
    RunConfig a = tiny_config();
    a.mkee.lambda_rho = 0.125;
    RunConfig b;
    apply_config_text(b, dump_config(a));
    CHECK(dump_config(b) == dump_config(a));
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);

    RunConfig moved = a;
    moved.out_dir = "elsewhere";
    CHECK(config_hash(moved) == config_hash(a));
    RunConfig changed = a;
    changed.mkee.epsilon = 0.06;
    CHECK(config_hash(changed) != config_hash(a));
    CHECK(run_directory(a).filename().string() == "run-" + config_hash(a) + "-s3");
    for (const auto& k : config_keys()) CHECK(is_config_key(k.name));
}

TEST_CASE("checkpoint round trip is exact") {
    const RunConfig cfg = tiny_config();
    const TrainOutcome out = run_train(cfg, build_split(cfg));
    std::stringstream ss;
    to_checkpoint(out.model).write(ss);
    const TrainedModel back = from_checkpoint(TensorFile::read(ss));
    CHECK(back.params == out.model.params);
    CHECK(back.store.prototypes() == out.model.store.prototypes());
    CHECK(back.threshold.tau == out.model.threshold.tau);
    const OcdSplit split = build_split(cfg);
    CHECK(stream_text(run_stream(back, split).records) == stream_text(run_stream(out.model, split).records));
}

TEST_CASE("runs are reproducible") {
    const RunConfig cfg = tiny_config();
    const ExperimentResult a = run_experiment(cfg), b = run_experiment(cfg);
    CHECK(stream_text(a.stream) == stream_text(b.stream));
    CHECK(report_to_json(a.report) == report_to_json(b.report));
    CHECK(record_to_json(a.record) == record_to_json(b.record));
}

TEST_CASE("record JSON round trip") {
    const ExperimentResult a = run_experiment(tiny_config());
    const RunRecord back = record_from_json(record_to_json(a.record));
    CHECK(record_to_json(back) == record_to_json(a.record));
    CHECK(back.epochs.size() == 4);
}

TEST_CASE("ablations switch their terms off") {
    RunConfig cfg = tiny_config();
    cfg.enable_mkee = false;
    cfg.enable_mm = false;
    const ExperimentResult off = run_experiment(cfg);
    CHECK(off.record.pseudo.samples == 0);
    for (const auto& e : off.record.epochs) {
        CHECK(e.mm == 0.0);
        CHECK(e.pseudo_samples == 0);
    }

    RunConfig never = tiny_config();
    never.mkee.p_gen = 0.0;
    const ExperimentResult quiet = run_experiment(never);
    CHECK(quiet.record.pseudo.samples == 0);
    for (const auto& p : quiet.record.tau_trajectory) {
        CHECK(p.tau == never.threshold.tau_init);
        CHECK_FALSE(p.updated);
    }
    CHECK(quiet.record.tau_final == never.threshold.tau_init);

    RunConfig fixed = tiny_config();
    fixed.adaptive_tau = false;
    fixed.mkee.p_gen = 1.0;
    const ExperimentResult frozen = run_experiment(fixed);
    CHECK(frozen.record.pseudo.samples > 0);
    CHECK(frozen.record.tau_final == fixed.threshold.tau_init);

    RunConfig always = tiny_config();
    always.mkee.p_gen = 1.0;
    const ExperimentResult moving = run_experiment(always);
    CHECK(moving.record.tau_final != always.threshold.tau_init);
}

TEST_CASE("extreme thresholds bound the category count") {
    const RunConfig cfg = tiny_config();
    const OcdSplit split = build_split(cfg);
    const TrainOutcome trained = run_train(cfg, split);

    const StreamOutcome low = run_stream(trained.model, split, -1.0);
    std::set<std::size_t> cats;
    for (const auto& r : low.records) {
        CHECK_FALSE(r.spawned);
        cats.insert(r.predicted);
    }
    CHECK(cats.size() <= split.k_known());
    CHECK(low.store.size() == split.k_known());

    const StreamOutcome high = run_stream(trained.model, split, 1.0);
    std::size_t spawned = 0;
    for (const auto& r : high.records) spawned += r.spawned;
    CHECK(spawned == split.query.size());
    CHECK(high.store.size() == split.k_known() + split.query.size());
}

TEST_CASE("stream predictions are append-only") {
    const RunConfig cfg = tiny_config();
    const OcdSplit split = build_split(cfg);
    const TrainOutcome trained = run_train(cfg, split);
    const StreamOutcome full = run_stream(trained.model, split);
    OcdSplit prefix = split;
    const std::size_t n = split.query.size() / 2;
    prefix.query.x = DenseMatrix(0, split.query.dim());
    prefix.query.labels.resize(n);
    prefix.query_is_old.resize(n);
    prefix.query_source.resize(n);
    for (std::size_t i = 0; i < n; ++i) prefix.query.x.append_row(split.query.x.row(i));
    const StreamOutcome part = run_stream(trained.model, prefix);
    REQUIRE(part.records.size() == n);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(part.records[i].predicted == full.records[i].predicted);
        CHECK(part.records[i].s_max == full.records[i].s_max);
    }
}

TEST_CASE("evaluation join") {
    const std::vector<StreamRecord> recs{{0, 4, 0.5, false}, {1, 4, 0.6, false}, {2, 9, 0.1, true}};
    const std::vector<TruthRow> truth{{2, 1, false}, {0, 0, true}, {1, 0, true}};
    const StreamResult r = join_stream(recs, truth);
    CHECK(r.truth == std::vector<int>{0, 0, 1});
    CHECK(r.old_classes == std::vector<int>{0});
    CHECK(run_eval(recs, truth).strict.all == 1.0);

    std::vector<TruthRow> missing = truth;
    missing[0].item_id = 7;
    CHECK_THROWS_AS(join_stream(recs, missing), InvalidArgument);
    CHECK_THROWS_AS(join_stream(recs, std::vector<TruthRow>(truth.begin(), truth.begin() + 2)), InvalidArgument);
}

TEST_CASE("training lowers the loss") {
    RunConfig cfg = tiny_config();
    cfg.epochs = 12;
    const TrainOutcome out = run_train(cfg, build_split(cfg));
    REQUIRE(out.record.epochs.size() == 12);
    CHECK(out.record.epochs.back().total < out.record.epochs.front().total);
    CHECK(out.record.epochs.back().ce < out.record.epochs.front().ce);
}

TEST_CASE("well separated classes are recovered") {
    // Separation far above the noise. The threshold starts high enough that
    // novel clusters do not fold into known prototypes.
    RunConfig cfg;
    cfg.synth.separation = 10.0;
    cfg.synth.noise = 0.1;
    cfg.threshold.tau_init = 0.9;
    cfg.epochs = 10;
    double greedy = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        cfg.seed = seed;
        const ExperimentResult r = run_experiment(cfg);
        greedy += r.report.greedy.all / 5.0;
    }
    CHECK(greedy >= 0.95);
}

TEST_CASE("overlapping classes fall to chance") {
    RunConfig cfg = tiny_config();
    cfg.synth.separation = 0.0;
    const ExperimentResult r = run_experiment(cfg);
    // Five equal-sized classes in the stream cannot be told apart.
    CHECK(r.report.strict.all < 0.5);
}

TEST_CASE("sweeps") {
    RunConfig cfg = tiny_config();
    const auto rows = run_sweep(cfg, "mkee.epsilon", {"0.05"});
    REQUIRE(rows.size() == 1);
    const ExperimentResult plain = run_experiment(cfg);
    CHECK(report_to_json(rows[0].report) == report_to_json(plain.report));
    CHECK(rows[0].tau_final == plain.record.tau_final);

    const auto two = run_sweep(cfg, "threshold.tau_init", {"0.6", "0.8"}, 2);
    REQUIRE(two.size() == 2);
    CHECK(two[0].value == "0.6");
    CHECK(two[1].value == "0.8");
    std::string axis;
    const auto back = sweep_from_json(sweep_to_json("threshold.tau_init", two), &axis);
    CHECK(axis == "threshold.tau_init");
    CHECK(back.size() == 2);

    CHECK_THROWS_AS(run_sweep(cfg, "no.such.key", {"1"}), ConfigError);
    CHECK_THROWS_AS(run_sweep(cfg, "mkee.epsilon", {"abc"}), ConfigError);
}

}  // TEST_SUITE
