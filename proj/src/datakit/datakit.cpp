#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ltc/datakit.hpp"
#include "ltc/error.hpp"
#include "ltc/tensor_file.hpp"

namespace ltc {

void SynthSpec::validate() const {
    if (k_known < 2) throw ConfigError("data.k_known must be >= 2");
    if (dim < 2) throw ConfigError("data.dim must be >= 2");
    if (samples_per_class < 2) throw ConfigError("data.samples_per_class must be >= 2");
    if (!(separation >= 0.0) || !(noise >= 0.0)) throw ConfigError("data.separation and data.noise must be >= 0");
}

Dataset synth_mixture(const SynthSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t n_classes = spec.k_known + spec.k_novel;
    std::vector<Vector> means;
    for (std::size_t c = 0; c < n_classes; ++c) {
        Vector u(spec.dim);
        double norm = 0.0;
        do {
            for (double& v : u) v = normal(rng);
            norm = l2_norm(u);
        } while (norm < 1e-12);
        for (double& v : u) v *= spec.separation / norm;
        means.push_back(std::move(u));
    }
    Dataset d;
    d.x = DenseMatrix(0, spec.dim);
    Vector row(spec.dim);
    for (std::size_t c = 0; c < n_classes; ++c) {
        for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
            for (std::size_t i = 0; i < spec.dim; ++i) row[i] = means[c][i] + spec.noise * normal(rng);
            d.x.append_row(row);
            d.labels.push_back(static_cast<int>(c));
        }
    }
    return d;
}

Dataset read_embeddings_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.empty()) throw InvalidArgument("embeddings csv: empty file");
    std::vector<std::string> header;
    {
        std::istringstream hs(line);
        std::string tok;
        while (std::getline(hs, tok, ',')) header.push_back(tok);
    }
    if (header.size() < 2 || header[0] != "label") {
        throw InvalidArgument("embeddings csv line 1: header must be label,f0,...");
    }
    for (std::size_t i = 1; i < header.size(); ++i) {
        if (header[i] != "f" + std::to_string(i - 1)) {
            throw InvalidArgument("embeddings csv line 1: expected column f" + std::to_string(i - 1));
        }
    }
    const std::size_t dim = header.size() - 1;
    Dataset d;
    d.x = DenseMatrix(0, dim);
    std::size_t line_no = 1;
    Vector row;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        std::vector<std::string> fields;
        while (std::getline(ls, tok, ',')) fields.push_back(tok);
        if (!line.empty() && line.back() == ',') fields.emplace_back();
        if (fields.size() != dim + 1) {
            throw InvalidArgument("embeddings csv line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(dim + 1) + " fields, got " + std::to_string(fields.size()));
        }
        try {
            std::size_t used = 0;
            const int label = std::stoi(fields[0], &used);
            if (used != fields[0].size()) throw std::invalid_argument("label");
            row.assign(dim, 0.0);
            for (std::size_t i = 0; i < dim; ++i) {
                row[i] = parse_double(fields[i + 1]);
                if (!std::isfinite(row[i])) throw std::invalid_argument("non-finite");
            }
            d.labels.push_back(label);
        } catch (const std::exception&) {
            throw InvalidArgument("embeddings csv line " + std::to_string(line_no) + ": malformed value");
        }
        d.x.append_row(row);
    }
    if (d.labels.empty()) throw InvalidArgument("embeddings csv: no data rows");
    return d;
}

Dataset load_embeddings_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    return read_embeddings_csv(in);
}

void write_embeddings_csv(std::ostream& out, const Dataset& data) {
    out << "label";
    for (std::size_t i = 0; i < data.dim(); ++i) out << ",f" << i;
    out << '\n';
    for (std::size_t r = 0; r < data.size(); ++r) {
        out << data.labels[r];
        for (double v : data.x.row(r)) out << ',' << format_exact(v);
        out << '\n';
    }
}

void save_embeddings_csv(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    write_embeddings_csv(out, data);
}

OcdSplit make_split(const Dataset& data, std::size_t k_known, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InvalidArgument("train_fraction must lie in (0, 1)");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);
    if (k_known >= by_class.size()) {
        throw InvalidArgument("make_split: k_known must be smaller than the number of classes");
    }
    if (k_known < 1) throw InvalidArgument("make_split: k_known must be >= 1");

    std::mt19937_64 rng(seed);
    OcdSplit s;
    s.train_fraction = train_fraction;
    s.seed = seed;
    s.support.x = DenseMatrix(0, data.dim());
    std::vector<std::size_t> query_rows;
    std::size_t head_index = 0;
    for (auto& [label, rows] : by_class) {
        if (head_index < k_known) {
            if (rows.size() < 2) {
                throw InvalidArgument("make_split: seen class " + std::to_string(label) + " has < 2 samples");
            }
            std::shuffle(rows.begin(), rows.end(), rng);
            auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(rows.size())));
            n_train = std::clamp<std::size_t>(n_train, 1, rows.size() - 1);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (i < n_train) {
                    s.support.x.append_row(data.x.row(rows[i]));
                    s.support.labels.push_back(static_cast<int>(head_index));
                    s.support_source.push_back(rows[i]);
                } else {
                    query_rows.push_back(rows[i]);
                }
            }
            s.known_labels.push_back(label);
        } else {
            s.novel_labels.push_back(label);
            query_rows.insert(query_rows.end(), rows.begin(), rows.end());
        }
        ++head_index;
    }
    std::shuffle(query_rows.begin(), query_rows.end(), rng);
    s.query.x = DenseMatrix(0, data.dim());
    const std::set<int> known(s.known_labels.begin(), s.known_labels.end());
    for (std::size_t r : query_rows) {
        s.query.x.append_row(data.x.row(r));
        s.query.labels.push_back(data.labels[r]);
        s.query_source.push_back(r);
        s.query_is_old.push_back(known.count(data.labels[r]) > 0);
    }
    return s;
}

std::string split_manifest_json(const OcdSplit& split) {
    nlohmann::ordered_json j;
    j["seed"] = split.seed;
    j["train_fraction"] = split.train_fraction;
    j["known_labels"] = split.known_labels;
    j["novel_labels"] = split.novel_labels;
    j["support_size"] = split.support.size();
    j["query_size"] = split.query.size();
    j["support_source"] = split.support_source;
    j["query_source"] = split.query_source;
    return j.dump(2) + "\n";
}

std::optional<StreamItem> QueryStream::next() {
    if (pos_ >= split_->query.size()) return std::nullopt;
    StreamItem item{pos_, split_->query.x.row(pos_)};
    ++pos_;
    return item;
}

std::vector<double> augment(std::span<const double> x, double scale, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> out(x.begin(), x.end());
    for (double& v : out) v += scale * normal(rng);
    return out;
}

void write_truth_csv(std::ostream& out, const OcdSplit& split) {
    out << "item_id,label,is_old\n";
    for (std::size_t i = 0; i < split.query.size(); ++i) {
        out << i << ',' << split.query.labels[i] << ',' << (split.query_is_old[i] ? 1 : 0) << '\n';
    }
}

std::vector<TruthRow> read_truth_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "item_id,label,is_old") throw InvalidArgument("truth csv: bad header");
    std::vector<TruthRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string id, label, old;
        if (!std::getline(ls, id, ',') || !std::getline(ls, label, ',') || !std::getline(ls, old)) {
            throw InvalidArgument("truth csv line " + std::to_string(line_no) + ": expected 3 fields");
        }
        try {
            rows.push_back(TruthRow{std::stoull(id), std::stoi(label), old == "1"});
        } catch (const std::logic_error&) {
            throw InvalidArgument("truth csv line " + std::to_string(line_no) + ": malformed field");
        }
    }
    return rows;
}

}  // namespace ltc
