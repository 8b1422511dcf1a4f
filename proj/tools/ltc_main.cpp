// ltc: command-line driver.
//
//   ltc <subcommand> --config <path> [--<dotted.key> <value> ...]
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "ltc/config.hpp"
#include "ltc/error.hpp"
#include "ltc/pipeline.hpp"
#include "ltc/simd.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string run_dir;
    std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "config file (key = value lines)");
    sub->add_option("--run-dir", args.run_dir, "explicit run directory (default: <out_dir>/run-<hash>-s<seed>)");
    for (const auto& key : ltc::config_keys()) {
        sub->add_option_function<std::string>(
            "--" + key.name, [&args, name = key.name](const std::string& v) { args.overrides[name] = v; }, key.help);
    }
}

ltc::RunConfig resolve_config(const CommonArgs& args) {
    ltc::RunConfig cfg = args.config_path.empty() ? ltc::RunConfig{} : ltc::load_config_file(args.config_path);
    for (const auto& [k, v] : args.overrides) ltc::set_config_value(cfg, k, v);
    cfg.validate();
    return cfg;
}

fs::path resolve_run_dir(const CommonArgs& args, const ltc::RunConfig& cfg) {
    const fs::path dir = args.run_dir.empty() ? ltc::run_directory(cfg) : fs::path(args.run_dir);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ltc::Error("cannot write " + path.string());
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ltc::Error("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_split_files(const fs::path& dir, const ltc::OcdSplit& split) {
    write_text(dir / "split.json", ltc::split_manifest_json(split));
    std::ofstream truth(dir / "truth.csv");
    ltc::write_truth_csv(truth, split);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

int cmd_synth(const CommonArgs& args) {
    const ltc::RunConfig cfg = resolve_config(args);
    const fs::path dir = resolve_run_dir(args, cfg);
    const ltc::Dataset data = ltc::build_dataset(cfg);
    ltc::save_embeddings_csv(dir / "dataset.csv", data);
    write_split_files(dir, ltc::make_split(data, cfg.synth.k_known, cfg.train_fraction, ltc::build_split(cfg).seed));
    write_text(dir / "config.txt", ltc::dump_config(cfg));
    std::cout << "wrote " << data.size() << " samples to " << (dir / "dataset.csv").string() << "\n";
    return 0;
}

int cmd_train(const CommonArgs& args) {
    const ltc::RunConfig cfg = resolve_config(args);
    const fs::path dir = resolve_run_dir(args, cfg);
    const ltc::OcdSplit split = ltc::build_split(cfg);
    write_text(dir / "config.txt", ltc::dump_config(cfg));
    write_split_files(dir, split);
    std::ofstream diag;
    if (cfg.write_diagnostics) diag.open(dir / "diagnostics.csv");
    const ltc::TrainOutcome out = ltc::run_train(cfg, split, cfg.write_diagnostics ? &diag : nullptr);
    ltc::to_checkpoint(out.model).save(dir / "checkpoint.txt");
    write_text(dir / "record.json", ltc::record_to_json(out.record));
    write_text(dir / "timings.json", ltc::timings_to_json(out.timings));
    std::cout << ltc::render_epochs_table(out.record);
    std::cout << "tau_final " << out.record.tau_final << "  (" << out.timings.train_seconds << " s, simd "
              << ltc::simd::level_name(ltc::simd::active_level()) << ")\n";
    std::cout << "run dir: " << dir.string() << "\n";
    return 0;
}

int cmd_stream(const CommonArgs& args, const std::string& checkpoint) {
    const ltc::RunConfig cfg = resolve_config(args);
    const fs::path dir = resolve_run_dir(args, cfg);
    const fs::path ckpt = checkpoint.empty() ? dir / "checkpoint.txt" : fs::path(checkpoint);
    const ltc::TrainedModel model = ltc::from_checkpoint(ltc::TensorFile::load(ckpt));
    const ltc::OcdSplit split = ltc::build_split(cfg);
    const std::optional<double> tau =
        std::isnan(cfg.stream_tau_override) ? std::nullopt : std::optional<double>(cfg.stream_tau_override);
    const ltc::StreamOutcome out = ltc::run_stream(model, split, tau);
    ltc::save_stream_csv(dir / "stream.csv", out.records);
    write_split_files(dir, split);
    ltc::TensorFile snapshot;
    out.store.put(snapshot);
    snapshot.scalars["threshold.tau"] = out.tau;
    snapshot.save(dir / "prototypes.txt");
    std::cout << "streamed " << out.records.size() << " items, " << out.store.size() << " prototypes ("
              << out.store.k_known() << " known), tau " << out.tau << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& stream_path, const std::string& truth_path) {
    const ltc::RunConfig cfg = resolve_config(args);
    const fs::path dir = resolve_run_dir(args, cfg);
    const auto records = ltc::load_stream_csv(stream_path.empty() ? dir / "stream.csv" : fs::path(stream_path));
    std::ifstream truth_in(truth_path.empty() ? dir / "truth.csv" : fs::path(truth_path));
    if (!truth_in) throw ltc::Error("cannot read truth file");
    const ltc::EvalReport report = ltc::run_eval(records, ltc::read_truth_csv(truth_in));
    write_text(dir / "report.json", ltc::report_to_json(report));
    std::cout << ltc::render_report_table(report);
    return 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& axis, const std::string& values, std::size_t jobs) {
    const ltc::RunConfig cfg = resolve_config(args);
    if (!ltc::is_config_key(axis)) throw ltc::ConfigError("sweep: unknown axis '" + axis + "'");
    const auto rows = ltc::run_sweep(cfg, axis, split_list(values), jobs);
    const fs::path dir = resolve_run_dir(args, cfg);
    write_text(dir / ("sweep-" + axis + ".json"), ltc::sweep_to_json(axis, rows));
    write_text(dir / ("sweep-" + axis + ".csv"), ltc::render_sweep_csv(axis, rows));
    std::cout << ltc::render_sweep_table(axis, rows);
    return 0;
}

int cmd_report(const CommonArgs& args) {
    const ltc::RunConfig cfg = resolve_config(args);
    const fs::path dir = args.run_dir.empty() ? ltc::run_directory(cfg) : fs::path(args.run_dir);
    if (!fs::exists(dir)) throw ltc::Error("run directory " + dir.string() + " does not exist");
    bool any = false;
    if (fs::exists(dir / "record.json")) {
        const ltc::RunRecord rec = ltc::record_from_json(read_text(dir / "record.json"));
        std::cout << "== training (" << (dir / "record.json").string() << ")\n" << ltc::render_epochs_table(rec);
        write_text(dir / "epochs.csv", ltc::render_epochs_csv(rec));
        any = true;
    }
    if (fs::exists(dir / "report.json")) {
        std::cout << "== evaluation\n" << ltc::render_report_table(ltc::report_from_json(read_text(dir / "report.json")));
        any = true;
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("sweep-", 0) == 0 && entry.path().extension() == ".json") {
            std::string axis;
            const auto rows = ltc::sweep_from_json(read_text(entry.path()), &axis);
            std::cout << "== sweep over " << axis << "\n" << ltc::render_sweep_table(axis, rows);
            any = true;
        }
    }
    if (!any) throw ltc::Error("nothing to report in " + dir.string());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"On-the-fly category discovery with generated pseudo-unknowns"};
    app.require_subcommand(1);

    CommonArgs synth_args, train_args, stream_args, eval_args, sweep_args, report_args;
    auto* synth = app.add_subcommand("synth", "generate the synthetic benchmark and its split");
    add_common(synth, synth_args);
    auto* train = app.add_subcommand("train", "train encoder, prototypes and threshold");
    add_common(train, train_args);
    auto* stream = app.add_subcommand("stream", "streaming inference over the query set");
    add_common(stream, stream_args);
    std::string checkpoint;
    stream->add_option("--checkpoint", checkpoint, "checkpoint file (default: <run dir>/checkpoint.txt)");
    auto* eval = app.add_subcommand("eval", "score a stream CSV against ground truth");
    add_common(eval, eval_args);
    std::string stream_path, truth_path;
    eval->add_option("--stream", stream_path, "stream CSV (default: <run dir>/stream.csv)");
    eval->add_option("--truth", truth_path, "truth CSV (default: <run dir>/truth.csv)");
    auto* sweep = app.add_subcommand("sweep", "train+stream+eval once per value of a config key");
    add_common(sweep, sweep_args);
    std::string axis, values;
    std::size_t jobs = 1;
    sweep->add_option("--axis", axis, "config key to vary")->required();
    sweep->add_option("--values", values, "comma-separated values")->required();
    sweep->add_option("--jobs", jobs, "concurrent runs");
    auto* report = app.add_subcommand("report", "render run records, reports and sweeps as tables and CSV");
    add_common(report, report_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*synth) return cmd_synth(synth_args);
        if (*train) return cmd_train(train_args);
        if (*stream) return cmd_stream(stream_args, checkpoint);
        if (*eval) return cmd_eval(eval_args, stream_path, truth_path);
        if (*sweep) return cmd_sweep(sweep_args, axis, values, jobs);
        if (*report) return cmd_report(report_args);
    } catch (const ltc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
