#include <algorithm>
#include <numeric>
#include <set>

#include <json.hpp>

#include "ltc/error.hpp"
#include "ltc/evalkit.hpp"

namespace ltc {
namespace {

// Contingency table with categories in a canonical order: sorted by their
// count rows (descending), so the outcome does not depend on how predicted
// categories happen to be numbered.
struct Contingency {
    std::vector<int> classes;                 // column -> true label
    std::vector<std::size_t> categories;      // row -> predicted id
    std::vector<std::vector<std::size_t>> counts;
    std::vector<std::size_t> item_row;
    std::vector<std::size_t> item_col;
};

Contingency build(const StreamResult& r) {
    if (r.truth.size() != r.predicted.size()) throw DimensionError("stream result: truth/prediction length mismatch");
    Contingency c;
    std::set<int> classes(r.truth.begin(), r.truth.end());
    c.classes.assign(classes.begin(), classes.end());
    std::map<std::size_t, std::vector<std::size_t>> rows;
    for (std::size_t i = 0; i < r.truth.size(); ++i) {
        const auto col = static_cast<std::size_t>(
            std::lower_bound(c.classes.begin(), c.classes.end(), r.truth[i]) - c.classes.begin());
        auto& row = rows[r.predicted[i]];
        if (row.empty()) row.assign(c.classes.size(), 0);
        ++row[col];
    }
    std::vector<std::pair<std::vector<std::size_t>, std::size_t>> ordered;
    for (auto& [id, row] : rows) ordered.emplace_back(row, id);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::map<std::size_t, std::size_t> row_of;
    for (const auto& [row, id] : ordered) {
        row_of[id] = c.categories.size();
        c.categories.push_back(id);
        c.counts.push_back(row);
    }
    for (std::size_t i = 0; i < r.truth.size(); ++i) {
        c.item_row.push_back(row_of[r.predicted[i]]);
        c.item_col.push_back(static_cast<std::size_t>(
            std::lower_bound(c.classes.begin(), c.classes.end(), r.truth[i]) - c.classes.begin()));
    }
    return c;
}

// mapping[row] = column or -1
SplitAccuracy score(const StreamResult& r, const Contingency& c, const std::vector<int>& mapping) {
    const std::set<int> old(r.old_classes.begin(), r.old_classes.end());
    std::size_t n_old = 0, n_new = 0, ok_old = 0, ok_new = 0;
    for (std::size_t i = 0; i < r.truth.size(); ++i) {
        const bool correct = mapping[c.item_row[i]] == static_cast<int>(c.item_col[i]);
        if (old.count(r.truth[i])) {
            ++n_old;
            ok_old += correct;
        } else {
            ++n_new;
            ok_new += correct;
        }
    }
    SplitAccuracy a;
    const std::size_t n = n_old + n_new;
    a.all = n ? static_cast<double>(ok_old + ok_new) / static_cast<double>(n) : 0.0;
    a.old_ = n_old ? static_cast<double>(ok_old) / static_cast<double>(n_old) : 0.0;
    a.new_ = n_new ? static_cast<double>(ok_new) / static_cast<double>(n_new) : 0.0;
    return a;
}

std::vector<int> strict_mapping(const Contingency& c) {
    std::size_t max_count = 0;
    for (const auto& row : c.counts) max_count = std::max(max_count, *std::max_element(row.begin(), row.end()));
    DenseMatrix cost(c.counts.size(), c.classes.size());
    for (std::size_t i = 0; i < c.counts.size(); ++i) {
        for (std::size_t j = 0; j < c.classes.size(); ++j) {
            cost(i, j) = static_cast<double>(max_count - c.counts[i][j]);
        }
    }
    return hungarian(cost).row_to_col;
}

std::vector<int> greedy_mapping(const Contingency& c) {
    std::vector<int> mapping;
    for (const auto& row : c.counts) {
        // max_element returns the first maximum, i.e. the smallest label.
        mapping.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
    return mapping;
}

void require_nonempty(const StreamResult& r) {
    if (r.truth.empty()) throw InvalidArgument("evaluation needs a nonempty stream");
}

}  // namespace

SplitAccuracy strict_acc(const StreamResult& result) {
    require_nonempty(result);
    const Contingency c = build(result);
    return score(result, c, strict_mapping(c));
}

SplitAccuracy greedy_acc(const StreamResult& result) {
    require_nonempty(result);
    const Contingency c = build(result);
    return score(result, c, greedy_mapping(c));
}

CountError count_error(std::size_t estimated, std::size_t true_count) {
    return CountError{estimated, estimated > true_count ? estimated - true_count : true_count - estimated};
}

CountError count_error(const StreamResult& result) {
    const std::set<std::size_t> cats(result.predicted.begin(), result.predicted.end());
    const std::set<int> classes(result.truth.begin(), result.truth.end());
    return count_error(cats.size(), classes.size());
}

EvalReport evaluate(const StreamResult& result) {
    require_nonempty(result);
    const Contingency c = build(result);
    const std::vector<int> strict = strict_mapping(c);
    const std::vector<int> greedy = greedy_mapping(c);
    EvalReport rep;
    rep.strict = score(result, c, strict);
    rep.greedy = score(result, c, greedy);
    rep.num_items = result.truth.size();
    const std::set<int> old(result.old_classes.begin(), result.old_classes.end());
    for (int t : result.truth) rep.num_old_items += old.count(t);
    rep.num_new_items = rep.num_items - rep.num_old_items;
    rep.num_true_classes = c.classes.size();
    const CountError ce = count_error(c.categories.size(), c.classes.size());
    rep.num_predicted_categories = ce.estimated;
    rep.category_count_error = ce.error;
    for (std::size_t row = 0; row < c.categories.size(); ++row) {
        if (strict[row] >= 0) rep.strict_assignment[c.categories[row]] = c.classes[static_cast<std::size_t>(strict[row])];
        rep.greedy_assignment[c.categories[row]] = c.classes[static_cast<std::size_t>(greedy[row])];
    }
    return rep;
}

std::string report_to_json(const EvalReport& r, int indent) {
    nlohmann::ordered_json j;
    j["acc_all_strict"] = r.strict.all;
    j["acc_old_strict"] = r.strict.old_;
    j["acc_new_strict"] = r.strict.new_;
    j["acc_all_greedy"] = r.greedy.all;
    j["acc_old_greedy"] = r.greedy.old_;
    j["acc_new_greedy"] = r.greedy.new_;
    j["num_items"] = r.num_items;
    j["num_old_items"] = r.num_old_items;
    j["num_new_items"] = r.num_new_items;
    j["num_true_classes"] = r.num_true_classes;
    j["num_predicted_categories"] = r.num_predicted_categories;
    j["category_count_error"] = r.category_count_error;
    auto dump_map = [](const std::map<std::size_t, int>& m) {
        nlohmann::ordered_json a = nlohmann::ordered_json::array();
        for (const auto& [p, t] : m) a.push_back({{"predicted", p}, {"true", t}});
        return a;
    };
    j["strict_assignment"] = dump_map(r.strict_assignment);
    j["greedy_assignment"] = dump_map(r.greedy_assignment);
    return j.dump(indent) + "\n";
}

EvalReport report_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    EvalReport r;
    r.strict = {j.at("acc_all_strict"), j.at("acc_old_strict"), j.at("acc_new_strict")};
    r.greedy = {j.at("acc_all_greedy"), j.at("acc_old_greedy"), j.at("acc_new_greedy")};
    r.num_items = j.at("num_items");
    r.num_old_items = j.at("num_old_items");
    r.num_new_items = j.at("num_new_items");
    r.num_true_classes = j.at("num_true_classes");
    r.num_predicted_categories = j.at("num_predicted_categories");
    r.category_count_error = j.at("category_count_error");
    for (const auto& e : j.at("strict_assignment")) r.strict_assignment[e.at("predicted")] = e.at("true");
    for (const auto& e : j.at("greedy_assignment")) r.greedy_assignment[e.at("predicted")] = e.at("true");
    return r;
}

}  // namespace ltc
