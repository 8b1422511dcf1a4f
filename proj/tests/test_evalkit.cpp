#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "ltc/error.hpp"
#include "ltc/evalkit.hpp"
#include "oracles.hpp"

using namespace ltc;

namespace {

DenseMatrix random_cost(std::size_t r, std::size_t c, std::mt19937_64& rng, bool integer) {
    DenseMatrix m(r, c);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::uniform_int_distribution<int> k(0, 5);
    for (double& v : m.values()) v = integer ? k(rng) : u(rng);
    return m;
}

StreamResult random_stream(std::mt19937_64& rng, std::size_t n, int classes, std::size_t categories) {
    std::uniform_int_distribution<int> cls(0, classes - 1);
    std::uniform_int_distribution<std::size_t> cat(0, categories - 1);
    StreamResult r;
    for (std::size_t i = 0; i < n; ++i) {
        r.truth.push_back(cls(rng));
        // Mostly follow the truth so the mappings are not trivial.
        r.predicted.push_back(rng() % 3 ? static_cast<std::size_t>(r.truth.back()) % categories : cat(rng));
    }
    for (int c = 0; c < classes / 2; ++c) r.old_classes.push_back(c);
    return r;
}

// Best one-to-one matching of predicted categories to classes by direct
// enumeration of class permutations.
double strict_all_brute(const StreamResult& r) {
    std::map<std::size_t, std::size_t> cat_index;
    for (std::size_t p : r.predicted) cat_index.emplace(p, cat_index.size());
    std::map<int, std::size_t> cls_index;
    for (int t : r.truth) cls_index.emplace(t, 0);
    std::size_t k = 0;
    for (auto& [t, idx] : cls_index) idx = k++;
    const std::size_t nc = cat_index.size(), nt = cls_index.size();
    std::vector<std::vector<std::size_t>> count(nc, std::vector<std::size_t>(nt, 0));
    for (std::size_t i = 0; i < r.truth.size(); ++i) ++count[cat_index[r.predicted[i]]][cls_index[r.truth[i]]];
    // Pad both sides to the same size with empty rows/columns.
    const std::size_t m = std::max(nc, nt);
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t best = 0;
    do {
        std::size_t s = 0;
        for (std::size_t i = 0; i < nc; ++i)
            if (perm[i] < nt) s += count[i][perm[i]];
        best = std::max(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(r.truth.size());
}

}  // namespace

TEST_SUITE("evalkit") {

TEST_CASE("hungarian on small fixed matrices") {
    DenseMatrix id(3, 3, 1.0);
    for (std::size_t i = 0; i < 3; ++i) id(i, i) = 0.0;
    const HungarianResult a = hungarian(id);
    CHECK(a.cost == 0.0);
    CHECK(a.row_to_col == std::vector<int>{0, 1, 2});

    const DenseMatrix m = DenseMatrix::from_rows({{4, 1, 3}, {2, 0, 5}, {3, 2, 2}});
    const HungarianResult b = hungarian(m);
    CHECK(b.cost == 5.0);
    CHECK(b.row_to_col == std::vector<int>{1, 0, 2});
}

TEST_CASE("hungarian matches brute force including rectangular shapes") {
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<std::size_t> side(1, 6);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t r = side(rng), c = side(rng);
        const DenseMatrix m = random_cost(r, c, rng, trial % 2 == 0);
        const HungarianResult h = hungarian(m);
        CHECK(h.cost == doctest::Approx(oracle::assignment_brute(m)).epsilon(1e-12));
        // The returned assignment is an injection that realizes the cost.
        std::set<int> used;
        double s = 0.0;
        std::size_t assigned = 0;
        for (std::size_t i = 0; i < r; ++i) {
            const int j = h.row_to_col[i];
            if (j < 0) continue;
            CHECK(used.insert(j).second);
            s += m(i, static_cast<std::size_t>(j));
            ++assigned;
        }
        CHECK(assigned == std::min(r, c));
        CHECK(s == doctest::Approx(h.cost).epsilon(1e-12));
    }
}

TEST_CASE("hungarian rejects bad input") {
    CHECK_THROWS_AS(hungarian(DenseMatrix(0, 0)), InvalidArgument);
    DenseMatrix m(2, 2, 1.0);
    m(1, 0) = std::nan("");
    CHECK_THROWS_AS(hungarian(m), InvalidArgument);
}

TEST_CASE("strict accuracy on worked examples") {
    StreamResult perfect{{0, 0, 1, 1, 2}, {7, 7, 3, 3, 9}, {0, 1}};
    const SplitAccuracy p = strict_acc(perfect);
    CHECK(p.all == 1.0);
    CHECK(p.old_ == 1.0);
    CHECK(p.new_ == 1.0);

    // Every item in its own category: one item per class can be matched.
    StreamResult singletons{{0, 0, 0, 1, 1, 1}, {0, 1, 2, 3, 4, 5}, {0}};
    CHECK(strict_acc(singletons).all == doctest::Approx(2.0 / 6.0));

    // Two classes merged into one category.
    StreamResult merged{{0, 0, 1, 1}, {5, 5, 5, 5}, {0}};
    CHECK(strict_acc(merged).all == 0.5);
    CHECK(greedy_acc(merged).all == 0.5);

    // One class split over two categories: greedy forgives it, strict does not.
    StreamResult split{{0, 0, 0, 0, 1, 1}, {1, 1, 2, 2, 3, 3}, {0}};
    CHECK(greedy_acc(split).all == 1.0);
    CHECK(strict_acc(split).all == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("strict accuracy matches the permutation oracle") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        const StreamResult r = random_stream(rng, 40, 2 + static_cast<int>(rng() % 4), 2 + rng() % 5);
        CHECK(strict_acc(r).all == doctest::Approx(strict_all_brute(r)).epsilon(1e-12));
    }
}

TEST_CASE("greedy dominates strict and both ignore category ids") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 100; ++trial) {
        StreamResult r = random_stream(rng, 60, 6, 8);
        const SplitAccuracy s = strict_acc(r), g = greedy_acc(r);
        CHECK(g.all >= s.all);
        // all is the item-weighted combination of old and new.
        const std::set<int> old(r.old_classes.begin(), r.old_classes.end());
        double n_old = 0;
        for (int t : r.truth) n_old += old.count(t);
        const double n = static_cast<double>(r.truth.size());
        CHECK(s.all == doctest::Approx((n_old * s.old_ + (n - n_old) * s.new_) / n).epsilon(1e-12));
        CHECK(g.all == doctest::Approx((n_old * g.old_ + (n - n_old) * g.new_) / n).epsilon(1e-12));

        StreamResult relabeled = r;
        for (auto& p : relabeled.predicted) p = 1000 - 7 * p;
        const SplitAccuracy s2 = strict_acc(relabeled), g2 = greedy_acc(relabeled);
        CHECK(s2.all == s.all);
        CHECK(s2.old_ == s.old_);
        CHECK(s2.new_ == s.new_);
        CHECK(g2.all == g.all);
    }
}

TEST_CASE("pure relabeling scores one under both protocols") {
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 20; ++trial) {
        StreamResult r = random_stream(rng, 50, 5, 5);
        std::vector<std::size_t> perm{11, 3, 8, 20, 5};
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t i = 0; i < r.truth.size(); ++i) r.predicted[i] = perm[static_cast<std::size_t>(r.truth[i])];
        CHECK(strict_acc(r).all == 1.0);
        CHECK(greedy_acc(r).all == 1.0);
    }
}

TEST_CASE("category count error") {
    CHECK(count_error(210, 200).error == 10);
    CHECK(count_error(5, 10).error == 5);
    StreamResult perfect{{0, 1, 2}, {4, 5, 6}, {0}};
    CHECK(count_error(perfect).error == 0);

    std::mt19937_64 rng(45);
    for (int trial = 0; trial < 20; ++trial) {
        const StreamResult r = random_stream(rng, 30, 4, 9);
        std::vector<std::size_t> p = r.predicted;
        std::sort(p.begin(), p.end());
        const auto distinct = static_cast<std::size_t>(std::unique(p.begin(), p.end()) - p.begin());
        std::vector<int> t = r.truth;
        std::sort(t.begin(), t.end());
        const auto classes = static_cast<std::size_t>(std::unique(t.begin(), t.end()) - t.begin());
        const CountError e = count_error(r);
        CHECK(e.estimated == distinct);
        CHECK(e.error == (distinct > classes ? distinct - classes : classes - distinct));
    }
}

TEST_CASE("evaluation report fields and JSON round trip") {
    StreamResult r{{0, 0, 1, 1, 2, 2}, {0, 0, 1, 4, 4, 4}, {0, 1}};
    const EvalReport rep = evaluate(r);
    CHECK(rep.num_items == 6);
    CHECK(rep.num_old_items == 4);
    CHECK(rep.num_new_items == 2);
    CHECK(rep.num_true_classes == 3);
    CHECK(rep.num_predicted_categories == 3);
    CHECK(rep.category_count_error == 0);
    CHECK(rep.strict.all == doctest::Approx(5.0 / 6.0));
    CHECK(rep.greedy_assignment.at(4) == 2);

    const std::string text = report_to_json(rep);
    for (const char* key : {"acc_all_strict", "acc_old_strict", "acc_new_strict", "acc_all_greedy", "acc_old_greedy",
                            "acc_new_greedy", "num_predicted_categories", "category_count_error"}) {
        CHECK(text.find(std::string("\"") + key + "\"") != std::string::npos);
    }
    const EvalReport back = report_from_json(text);
    CHECK(back.strict.all == rep.strict.all);
    CHECK(back.greedy.new_ == rep.greedy.new_);
    CHECK(back.strict_assignment == rep.strict_assignment);
    CHECK(back.greedy_assignment == rep.greedy_assignment);
    CHECK(report_to_json(back) == text);
}

TEST_CASE("evaluation input errors") {
    CHECK_THROWS_AS(evaluate(StreamResult{}), InvalidArgument);
    StreamResult bad{{0, 1}, {0}, {0}};
    CHECK_THROWS_AS(evaluate(bad), DimensionError);
}

}  // TEST_SUITE
