#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "ltc/error.hpp"
#include "ltc/protodict.hpp"
#include "ltc/simd.hpp"

namespace ltc {

PrototypeStore PrototypeStore::from_features(const DenseMatrix& features, std::span<const int> labels,
                                             std::size_t k) {
    if (labels.size() != features.rows()) throw DimensionError("init_prototypes: label count != feature rows");
    const std::size_t d = features.cols();
    DenseMatrix sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= k) throw InvalidArgument("init_prototypes: label out of range");
        simd::axpy(1.0, features.row(i), sums.row(static_cast<std::size_t>(y)));
        ++counts[static_cast<std::size_t>(y)];
    }
    PrototypeStore s;
    s.k_known_ = k;
    s.prototypes_ = DenseMatrix(0, d);
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) throw InvalidArgument("init_prototypes: class " + std::to_string(c) + " is empty");
        Vector mean(sums.row(c).begin(), sums.row(c).end());
        for (double& v : mean) v /= static_cast<double>(counts[c]);
        if (!(l2_norm(mean) >= 1e-12)) {
            throw DegenerateError("init_prototypes: class " + std::to_string(c) + " mean has zero norm");
        }
        s.prototypes_.append_row(normalized(mean));
    }
    s.accumulators_ = s.prototypes_;
    return s;
}

std::size_t PrototypeStore::append(std::span<const double> f) {
    if (!prototypes_.empty() && f.size() != dim()) throw DimensionError("prototype append: dimension mismatch");
    prototypes_.append_row(f);
    return size() - 1;
}

void PrototypeStore::running_update(std::span<const double> f, int y, double momentum) {
    if (y < 0 || static_cast<std::size_t>(y) >= k_known_) throw InvalidArgument("running_update: not a known class");
    if (f.size() != dim()) throw DimensionError("running_update: dimension mismatch");
    auto m = accumulators_.row(static_cast<std::size_t>(y));
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = momentum * m[i] + (1.0 - momentum) * f[i];
    if (!(l2_norm(m) >= 1e-12)) throw DegenerateError("running_update: accumulator norm below 1e-12");
    const Vector p = normalized(m);
    std::copy(p.begin(), p.end(), prototypes_.row(static_cast<std::size_t>(y)).begin());
}

void PrototypeStore::truncate_to_known() {
    DenseMatrix kept(0, dim());
    for (std::size_t i = 0; i < k_known_; ++i) kept.append_row(prototypes_.row(i));
    prototypes_ = std::move(kept);
}

void PrototypeStore::put(TensorFile& file) const {
    file.tensors["prototypes"] = prototypes_;
    file.tensors["prototypes.accumulators"] = accumulators_;
    file.scalars["prototypes.k_known"] = static_cast<double>(k_known_);
}

PrototypeStore PrototypeStore::get(const TensorFile& file) {
    PrototypeStore s;
    s.prototypes_ = file.tensor("prototypes");
    s.accumulators_ = file.tensor("prototypes.accumulators");
    s.k_known_ = static_cast<std::size_t>(file.scalar("prototypes.k_known"));
    if (s.k_known_ > s.prototypes_.rows() || s.accumulators_.rows() != s.k_known_) {
        throw InvalidArgument("prototype store: inconsistent k_known");
    }
    return s;
}

MatchResult match(const PrototypeStore& store, std::span<const double> f) {
    if (store.empty()) throw InvalidArgument("match: empty prototype store");
    if (f.size() != store.dim()) throw DimensionError("match: dimension mismatch");
    MatchResult r;
    r.scores.resize(store.size());
    const auto& k = simd::active();
    for (std::size_t i = 0; i < store.size(); ++i) {
        r.scores[i] = k.dot(store.prototype(i).data(), f.data(), f.size());
        if (i == 0 || r.scores[i] > r.s_max) {
            r.s_max = r.scores[i];
            r.best_index = i;
        }
    }
    return r;
}

Assignment assign_or_spawn(PrototypeStore& store, double tau, std::span<const double> f) {
    const MatchResult m = match(store, f);
    if (m.s_max < tau) return Assignment{store.append(f), m.s_max, true};
    return Assignment{m.best_index, m.s_max, false};
}

void ThresholdConfig::validate() const {
    if (!(tau_init > -1.0 && tau_init < 1.0)) throw ConfigError("threshold.tau_init must lie in (-1, 1)");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("threshold.beta must lie in [0, 1]");
    if (!(q_pos > 0.0 && q_pos < 1.0) || !(q_neg > 0.0 && q_neg < 1.0)) {
        throw ConfigError("threshold quantiles must lie in (0, 1)");
    }
}

ThresholdState ThresholdState::from_config(const ThresholdConfig& c) {
    ThresholdState s;
    s.tau = c.tau_init;
    s.tau_init = c.tau_init;
    s.beta = c.beta;
    s.q_pos = c.q_pos;
    s.q_neg = c.q_neg;
    return s;
}

double percentile(std::span<const double> values, double q) {
    if (values.empty()) throw InvalidArgument("percentile: empty set");
    Vector v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

QuantileTargets quantile_targets(std::span<const double> known_scores, std::span<const double> pseudo_scores,
                                 double q_pos, double q_neg) {
    if (known_scores.empty() || pseudo_scores.empty()) {
        throw InvalidArgument("quantile_targets: empty score set");
    }
    QuantileTargets t;
    t.u_pos = percentile(known_scores, q_pos);
    t.u_neg = percentile(pseudo_scores, q_neg);
    t.target = 0.5 * (t.u_pos + t.u_neg);
    return t;
}

double ema_update(ThresholdState& state, double target) {
    if (!std::isfinite(target)) throw InvalidArgument("ema_update: non-finite target");
    state.tau = (1.0 - state.beta) * state.tau + state.beta * target;
    return state.tau;
}

ThresholdStep update_threshold(ThresholdState& state, std::span<const double> known_scores,
                               std::span<const double> pseudo_scores) {
    const QuantileTargets q = quantile_targets(known_scores, pseudo_scores, state.q_pos, state.q_neg);
    ThresholdStep step{q.u_pos, q.u_neg, q.target, ema_update(state, q.target)};
    state.history.push_back(step);
    return step;
}

void write_stream_csv(std::ostream& out, std::span<const StreamRecord> records) {
    out << "item_id,predicted,s_max,spawned\n";
    for (const auto& r : records) {
        out << r.item_id << ',' << r.predicted << ',' << format_exact(r.s_max) << ',' << (r.spawned ? 1 : 0) << '\n';
    }
}

std::vector<StreamRecord> read_stream_csv(std::istream& in) {
    std::vector<StreamRecord> out;
    std::string line;
    if (!std::getline(in, line) || line != "item_id,predicted,s_max,spawned") {
        throw InvalidArgument("stream csv: bad header");
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string id, pred, s, spawned;
        if (!std::getline(ls, id, ',') || !std::getline(ls, pred, ',') || !std::getline(ls, s, ',') ||
            !std::getline(ls, spawned)) {
            throw InvalidArgument("stream csv line " + std::to_string(line_no) + ": expected 4 fields");
        }
        try {
            out.push_back(StreamRecord{std::stoull(id), std::stoull(pred), parse_double(s), spawned == "1"});
        } catch (const std::logic_error&) {
            throw InvalidArgument("stream csv line " + std::to_string(line_no) + ": malformed field");
        }
    }
    return out;
}

void save_stream_csv(const std::filesystem::path& path, std::span<const StreamRecord> records) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    write_stream_csv(out, records);
}

std::vector<StreamRecord> load_stream_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return read_stream_csv(in);
}

}  // namespace ltc
