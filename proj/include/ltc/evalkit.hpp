#pragma once
// Clustering accuracy for a finished stream.
//
// Strict: one-to-one optimal matching between predicted categories and true
// classes on the contingency table (Hungarian); unmatched categories count as
// wrong.
// Greedy: every predicted category maps to its majority true class (ties to
// the smaller label); several categories may share a class.
// Old/New accuracies use the global mapping restricted to items whose ground
// truth is an old/new class.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ltc/dense.hpp"

namespace ltc {

struct HungarianResult {
    // row_to_col[r] is the column assigned to row r, or -1 when rows > cols
    // and r is left out.
    std::vector<int> row_to_col;
    double cost = 0.0;
};

// Minimum-cost assignment covering the smaller side. Throws InvalidArgument
// on an empty or non-finite matrix.
HungarianResult hungarian(const DenseMatrix& cost);

struct StreamResult {
    std::vector<int> truth;               // ground-truth class per item
    std::vector<std::size_t> predicted;   // predicted category per item
    std::vector<int> old_classes;         // labels seen in training
};

struct SplitAccuracy {
    double all = 0.0;
    double old_ = 0.0;
    double new_ = 0.0;
};

struct EvalReport {
    SplitAccuracy strict;
    SplitAccuracy greedy;
    std::size_t num_items = 0;
    std::size_t num_old_items = 0;
    std::size_t num_new_items = 0;
    std::size_t num_true_classes = 0;
    std::size_t num_predicted_categories = 0;
    std::size_t category_count_error = 0;
    std::map<std::size_t, int> strict_assignment;  // predicted -> true (matched only)
    std::map<std::size_t, int> greedy_assignment;  // predicted -> true
};

SplitAccuracy strict_acc(const StreamResult& result);
SplitAccuracy greedy_acc(const StreamResult& result);

struct CountError {
    std::size_t estimated = 0;
    std::size_t error = 0;
};
CountError count_error(std::size_t estimated, std::size_t true_count);
CountError count_error(const StreamResult& result);

EvalReport evaluate(const StreamResult& result);

// Stable-field JSON document.
std::string report_to_json(const EvalReport& report, int indent = 2);
EvalReport report_from_json(const std::string& text);

}  // namespace ltc
