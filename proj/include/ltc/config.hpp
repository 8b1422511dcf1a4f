#pragma once
// Run configuration. Files hold flat `key = value` lines with `#` comments;
// keys are dotted (`mkee.epsilon = 0.05`). The same dotted names are accepted
// as command-line overrides.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "ltc/datakit.hpp"
#include "ltc/losses.hpp"
#include "ltc/mkee.hpp"
#include "ltc/neuralcore.hpp"
#include "ltc/protodict.hpp"

namespace ltc {

struct RunConfig {
    std::string data_source = "synthetic";  // synthetic | csv
    std::string data_path;
    SynthSpec synth;
    double train_fraction = 0.5;
    double aug_noise = 0.1;  // augmented-view noise std

    std::size_t hidden_width = 64;
    std::size_t hidden_layers = 2;
    std::size_t feature_dim = 32;

    LossConfig loss;
    MkeeConfig mkee;
    ThresholdConfig threshold;
    AdamWConfig optim;
    double proto_momentum = 0.9;
    bool proto_final_refresh = true;

    int epochs = 50;
    std::size_t batch_size = 32;  // desk scale; 128 at full scale
    std::uint64_t seed = 0;

    bool enable_mkee = true;
    bool enable_mm = true;
    bool adaptive_tau = true;

    double stream_tau_override = std::numeric_limits<double>::quiet_NaN();
    bool write_diagnostics = false;
    std::string out_dir = "runs";

    void validate() const;
    ModelShape model_shape(std::size_t input_dim, std::size_t num_classes) const;
};

struct ConfigKeyInfo {
    std::string name;
    std::string help;
    bool affects_run;  // part of the run-directory hash
};

const std::vector<ConfigKeyInfo>& config_keys();
bool is_config_key(const std::string& key);

// Throws ConfigError on an unknown key or unparsable value.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& key);

void apply_config_text(RunConfig& cfg, const std::string& text);
RunConfig load_config_file(const std::filesystem::path& path);

// `key = value` lines for every key, in registry order.
std::string dump_config(const RunConfig& cfg);

// FNV-1a over the run-affecting keys, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);
// <out_dir>/run-<hash>-s<seed>
std::filesystem::path run_directory(const RunConfig& cfg);

}  // namespace ltc
