#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "ltc/config.hpp"
#include "ltc/error.hpp"
#include "ltc/tensor_file.hpp"

namespace ltc {
namespace {

struct KeyBinding {
    ConfigKeyInfo info;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    if (v == "nan" || v == "none") return std::numeric_limits<double>::quiet_NaN();
    try {
        return parse_double(v);
    } catch (const Error&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

long long to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long x = std::stoll(v, &used);
        if (used == v.size()) return x;
    } catch (const std::exception&) {
    }
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
}

std::size_t to_count(const std::string& key, const std::string& v) {
    const long long x = to_int(key, v);
    if (x < 0) throw ConfigError("config key '" + key + "': must be >= 0");
    return static_cast<std::size_t>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

// Accessors are generic lambdas `[](auto& c) -> auto& { ... }` so one
// accessor serves both the setter and the const getter.
template <class Ref>
KeyBinding real(std::string name, std::string help, bool run, Ref ref) {
    auto key = name;
    return KeyBinding{{std::move(name), std::move(help), run},
                      [key, ref](RunConfig& c, const std::string& v) { ref(c) = to_double(key, v); },
                      [ref](const RunConfig& c) { return format_exact(ref(c)); }};
}

template <class Ref>
KeyBinding count(std::string name, std::string help, bool run, Ref ref) {
    auto key = name;
    return KeyBinding{{std::move(name), std::move(help), run},
                      [key, ref](RunConfig& c, const std::string& v) { ref(c) = to_count(key, v); },
                      [ref](const RunConfig& c) { return std::to_string(ref(c)); }};
}

template <class Ref>
KeyBinding integer(std::string name, std::string help, bool run, Ref ref) {
    auto key = name;
    return KeyBinding{{std::move(name), std::move(help), run},
                      [key, ref](RunConfig& c, const std::string& v) { ref(c) = static_cast<int>(to_int(key, v)); },
                      [ref](const RunConfig& c) { return std::to_string(ref(c)); }};
}

template <class Ref>
KeyBinding flag(std::string name, std::string help, bool run, Ref ref) {
    auto key = name;
    return KeyBinding{{std::move(name), std::move(help), run},
                      [key, ref](RunConfig& c, const std::string& v) { ref(c) = to_bool(key, v); },
                      [ref](const RunConfig& c) { return std::string(ref(c) ? "true" : "false"); }};
}

template <class Ref>
KeyBinding text(std::string name, std::string help, bool run, Ref ref) {
    return KeyBinding{{std::move(name), std::move(help), run},
                      [ref](RunConfig& c, const std::string& v) { ref(c) = v; },
                      [ref](const RunConfig& c) { return std::string(ref(c)); }};
}

const std::vector<KeyBinding>& bindings() {
    static const std::vector<KeyBinding> table = [] {
        std::vector<KeyBinding> t;
        t.push_back(text("data.source", "synthetic or csv", true, [](auto& c) -> auto& { return c.data_source; }));
        t.push_back(text("data.path", "embeddings CSV (data.source = csv)", true, [](auto& c) -> auto& { return c.data_path; }));
        t.push_back(count("data.dim", "synthetic input dimension", true, [](auto& c) -> auto& { return c.synth.dim; }));
        t.push_back(count("data.k_known", "number of seen classes", true, [](auto& c) -> auto& { return c.synth.k_known; }));
        t.push_back(count("data.k_novel", "number of novel synthetic classes", true, [](auto& c) -> auto& { return c.synth.k_novel; }));
        t.push_back(count("data.samples_per_class", "synthetic samples per class", true, [](auto& c) -> auto& { return c.synth.samples_per_class; }));
        t.push_back(real("data.separation", "radius of the synthetic class-mean sphere", true, [](auto& c) -> auto& { return c.synth.separation; }));
        t.push_back(real("data.noise", "synthetic isotropic noise std", true, [](auto& c) -> auto& { return c.synth.noise; }));
        t.push_back(real("data.train_fraction", "fraction of each seen class used for training", true, [](auto& c) -> auto& { return c.train_fraction; }));
        t.push_back(real("data.aug_noise", "augmented-view noise std", true, [](auto& c) -> auto& { return c.aug_noise; }));
        t.push_back(count("model.hidden_width", "hidden layer width", true, [](auto& c) -> auto& { return c.hidden_width; }));
        t.push_back(count("model.hidden_layers", "number of hidden ReLU layers", true, [](auto& c) -> auto& { return c.hidden_layers; }));
        t.push_back(count("model.feature_dim", "feature dimension D", true, [](auto& c) -> auto& { return c.feature_dim; }));
        t.push_back(real("loss.temperature", "contrastive temperature", true, [](auto& c) -> auto& { return c.loss.temperature; }));
        t.push_back(real("loss.alpha", "contrastive weight", true, [](auto& c) -> auto& { return c.loss.alpha; }));
        t.push_back(real("loss.gamma_mm", "max-margin weight", true, [](auto& c) -> auto& { return c.loss.gamma_mm; }));
        t.push_back(real("loss.m_pos", "positive margin", true, [](auto& c) -> auto& { return c.loss.m_pos; }));
        t.push_back(real("loss.m_neg", "negative margin", true, [](auto& c) -> auto& { return c.loss.m_neg; }));
        t.push_back(real("mkee.eta", "Beta(eta, eta) mixup concentration", true, [](auto& c) -> auto& { return c.mkee.eta; }));
        t.push_back(real("mkee.epsilon", "perturbation length", true, [](auto& c) -> auto& { return c.mkee.epsilon; }));
        t.push_back(real("mkee.lambda_rho", "density weight", true, [](auto& c) -> auto& { return c.mkee.lambda_rho; }));
        t.push_back(real("mkee.sigma0", "bandwidth scale", true, [](auto& c) -> auto& { return c.mkee.sigma0; }));
        t.push_back(real("mkee.p_gen", "per-batch generation probability", true, [](auto& c) -> auto& { return c.mkee.p_gen; }));
        t.push_back(integer("mkee.warmup_epochs", "epochs before generation starts", true, [](auto& c) -> auto& { return c.mkee.warmup_epochs; }));
        t.push_back(real("threshold.tau_init", "initial novelty threshold", true, [](auto& c) -> auto& { return c.threshold.tau_init; }));
        t.push_back(real("threshold.beta", "threshold EMA rate", true, [](auto& c) -> auto& { return c.threshold.beta; }));
        t.push_back(real("threshold.q_pos", "known-score quantile", true, [](auto& c) -> auto& { return c.threshold.q_pos; }));
        t.push_back(real("threshold.q_neg", "pseudo-score quantile", true, [](auto& c) -> auto& { return c.threshold.q_neg; }));
        t.push_back(real("proto.momentum", "running-mean momentum for prototypes", true, [](auto& c) -> auto& { return c.proto_momentum; }));
        t.push_back(flag("proto.final_refresh", "recompute prototypes from the support set after training", true, [](auto& c) -> auto& { return c.proto_final_refresh; }));
        t.push_back(real("optim.lr", "AdamW learning rate", true, [](auto& c) -> auto& { return c.optim.lr; }));
        t.push_back(real("optim.weight_decay", "AdamW decoupled weight decay", true, [](auto& c) -> auto& { return c.optim.weight_decay; }));
        t.push_back(real("optim.beta1", "AdamW beta1", true, [](auto& c) -> auto& { return c.optim.beta1; }));
        t.push_back(real("optim.beta2", "AdamW beta2", true, [](auto& c) -> auto& { return c.optim.beta2; }));
        t.push_back(real("optim.eps", "AdamW epsilon", true, [](auto& c) -> auto& { return c.optim.eps; }));
        t.push_back(integer("train.epochs", "training epochs", true, [](auto& c) -> auto& { return c.epochs; }));
        t.push_back(count("train.batch_size", "minibatch size", true, [](auto& c) -> auto& { return c.batch_size; }));
        t.push_back(KeyBinding{{"seed", "master seed", true},
                               [](RunConfig& c, const std::string& v) { c.seed = static_cast<std::uint64_t>(to_count("seed", v)); },
                               [](const RunConfig& c) { return std::to_string(c.seed); }});
        t.push_back(flag("ablation.enable_mkee", "generate pseudo-unknowns", true, [](auto& c) -> auto& { return c.enable_mkee; }));
        t.push_back(flag("ablation.enable_mm", "include the dual max-margin loss", true, [](auto& c) -> auto& { return c.enable_mm; }));
        t.push_back(flag("ablation.adaptive_tau", "update tau during training", true, [](auto& c) -> auto& { return c.adaptive_tau; }));
        t.push_back(real("stream.tau_override", "fixed tau for streaming (nan = trained tau)", false, [](auto& c) -> auto& { return c.stream_tau_override; }));
        t.push_back(flag("train.write_diagnostics", "write per-iteration pseudo-sample diagnostics CSV", false, [](auto& c) -> auto& { return c.write_diagnostics; }));
        t.push_back(text("out_dir", "root directory for run outputs", false, [](auto& c) -> auto& { return c.out_dir; }));
        return t;
    }();
    return table;
}

const KeyBinding& binding(const std::string& key) {
    for (const auto& b : bindings()) {
        if (b.info.name == key) return b;
    }
    throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void RunConfig::validate() const {
    if (data_source != "synthetic" && data_source != "csv") throw ConfigError("data.source must be synthetic or csv");
    if (data_source == "csv") {
        if (data_path.empty()) throw ConfigError("data.path is required when data.source = csv");
        if (!std::filesystem::exists(data_path)) throw ConfigError("data.path does not exist: " + data_path);
    } else {
        synth.validate();
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("data.train_fraction must lie in (0, 1)");
    if (!(aug_noise >= 0.0)) throw ConfigError("data.aug_noise must be >= 0");
    if (hidden_width == 0 || feature_dim == 0) throw ConfigError("model dimensions must be positive");
    loss.validate();
    mkee.validate();
    threshold.validate();
    if (!(optim.lr > 0.0) || !(optim.weight_decay >= 0.0)) throw ConfigError("optim.lr must be > 0, weight decay >= 0");
    if (!(optim.beta1 >= 0.0 && optim.beta1 < 1.0) || !(optim.beta2 >= 0.0 && optim.beta2 < 1.0)) {
        throw ConfigError("optim betas must lie in [0, 1)");
    }
    if (!(optim.eps > 0.0)) throw ConfigError("optim.eps must be > 0");
    if (!(proto_momentum >= 0.0 && proto_momentum <= 1.0)) throw ConfigError("proto.momentum must lie in [0, 1]");
    if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
    if (batch_size < 2) throw ConfigError("train.batch_size must be >= 2");
}

ModelShape RunConfig::model_shape(std::size_t input_dim, std::size_t num_classes) const {
    ModelShape s;
    s.input_dim = input_dim;
    s.hidden.assign(hidden_layers, hidden_width);
    s.feature_dim = feature_dim;
    s.num_classes = num_classes;
    return s;
}

const std::vector<ConfigKeyInfo>& config_keys() {
    static const std::vector<ConfigKeyInfo> keys = [] {
        std::vector<ConfigKeyInfo> k;
        for (const auto& b : bindings()) k.push_back(b.info);
        return k;
    }();
    return keys;
}

bool is_config_key(const std::string& key) {
    for (const auto& b : bindings()) {
        if (b.info.name == key) return true;
    }
    return false;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    binding(key).set(cfg, trim(value));
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) { return binding(key).get(cfg); }

void apply_config_text(RunConfig& cfg, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        try {
            set_config_value(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

RunConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    RunConfig cfg;
    apply_config_text(cfg, ss.str());
    return cfg;
}

std::string dump_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& b : bindings()) out += b.info.name + " = " + b.get(cfg) + "\n";
    return out;
}

std::string config_hash(const RunConfig& cfg) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& b : bindings()) {
        if (!b.info.affects_run) continue;
        for (char ch : b.info.name + "=" + b.get(cfg) + "\n") {
            h ^= static_cast<unsigned char>(ch);
            h *= 1099511628211ull;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::filesystem::path run_directory(const RunConfig& cfg) {
    return std::filesystem::path(cfg.out_dir) / ("run-" + config_hash(cfg) + "-s" + std::to_string(cfg.seed));
}

}  // namespace ltc
