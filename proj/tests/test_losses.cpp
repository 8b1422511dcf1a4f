#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ltc/error.hpp"
#include "ltc/losses.hpp"
#include "oracles.hpp"

using namespace ltc;

namespace {

DenseMatrix random_unit_rows(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    DenseMatrix m(0, d);
    for (std::size_t i = 0; i < n; ++i) m.append_row(oracle::random_unit(d, rng));
    return m;
}

// Every label appears at least twice.
std::vector<int> paired_labels(std::size_t n, int classes, std::mt19937_64& rng) {
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i / 2) % classes;
    std::shuffle(y.begin(), y.end(), rng);
    return y;
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("sup-con: two identical same-class features give zero loss") {
    const DenseMatrix f = DenseMatrix::from_rows({{1.0, 0.0}, {1.0, 0.0}});
    const std::vector<int> y{0, 0};
    const SupConLoss l = sup_con_loss(f, y, 1.0);
    CHECK(l.value == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("sup-con: aligned positive against orthogonal negatives") {
    // A lone orthogonal negative would have no positive of its own, so the
    // negative class gets two identical rows: every anchor then sees one
    // positive at cos 1 and two negatives at cos 0.
    const DenseMatrix f = DenseMatrix::from_rows({{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {0.0, 1.0}});
    const std::vector<int> y{0, 0, 1, 1};
    const SupConLoss l = sup_con_loss(f, y, 1.0);
    const double e = std::exp(1.0);
    for (double v : l.per_anchor) CHECK(v == doctest::Approx(-std::log(e / (e + 2.0))).epsilon(1e-12));
    // One negative instead of two: -log(e / (e + 1)).
    CHECK(-std::log(e / (e + 1.0)) == doctest::Approx(0.3133).epsilon(1e-4));
    const DenseMatrix g = DenseMatrix::from_rows({{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}});
    const std::vector<int> yg{0, 0, 1, 1};
    // Rows 2 and 3 are antipodal positives; anchor 0 still sees two cos-0 negatives.
    CHECK(sup_con_loss(g, yg, 1.0).per_anchor[0] == doctest::Approx(-std::log(e / (e + 2.0))).epsilon(1e-12));
}

TEST_CASE("sup-con matches the brute-force double loop") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const DenseMatrix f = random_unit_rows(8, 5, rng);
        const std::vector<int> y = paired_labels(8, 3, rng);
        for (double t : {0.07, 0.5, 1.0}) {
            CHECK(sup_con_loss(f, y, t).value == doctest::Approx(oracle::sup_con_brute(f, y, t)).epsilon(1e-10));
        }
    }
}

TEST_CASE("sup-con is invariant to batch permutation and global rotation") {
    std::mt19937_64 rng(22);
    const std::size_t n = 10, d = 4;
    const DenseMatrix f = random_unit_rows(n, d, rng);
    const std::vector<int> y = paired_labels(n, 3, rng);
    const double base = sup_con_loss(f, y, 0.2).value;

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    DenseMatrix fp(0, d);
    std::vector<int> yp;
    for (std::size_t i : perm) {
        fp.append_row(f.row(i));
        yp.push_back(y[i]);
    }
    CHECK(std::abs(sup_con_loss(fp, yp, 0.2).value - base) < 1e-10);

    // Random orthogonal matrix via Gram-Schmidt.
    std::vector<Vector> q;
    while (q.size() < d) {
        Vector v = oracle::random_vector(d, rng);
        for (const Vector& u : q) {
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += v[k] * u[k];
            for (std::size_t k = 0; k < d; ++k) v[k] -= dot * u[k];
        }
        q.push_back(normalized(v));
    }
    DenseMatrix fr(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t k = 0; k < d; ++k) fr(i, r) += q[r][k] * f(i, k);
    CHECK(std::abs(sup_con_loss(fr, y, 0.2).value - base) < 1e-10);
}

TEST_CASE("sup-con gradient matches central differences") {
    std::mt19937_64 rng(23);
    DenseMatrix f = random_unit_rows(6, 4, rng);
    const std::vector<int> y = paired_labels(6, 2, rng);
    const SupConLoss l = sup_con_loss(f, y, 0.3);
    oracle::GradCheck check;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double numeric =
            oracle::central_difference([&] { return sup_con_loss(f, y, 0.3).value; }, f.values()[i], 1e-5);
        check.add(oracle::relative_error(l.grad.values()[i], numeric), 1e-6);
    }
    CHECK(check.fraction() == 1.0);
}

TEST_CASE("sup-con rejects anchors without positives and tiny batches") {
    const DenseMatrix f = DenseMatrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    const std::vector<int> y{0, 1};
    CHECK_THROWS_AS(sup_con_loss(f, y, 0.1), InvalidArgument);
    const DenseMatrix one = DenseMatrix::from_rows({{1.0, 0.0}});
    const std::vector<int> y1{0};
    CHECK_THROWS_AS(sup_con_loss(one, y1, 0.1), InvalidArgument);
}

TEST_CASE("ce: uniform logits over five classes give ln 5") {
    const DenseMatrix logits(3, 5, 0.0);
    const std::vector<int> y{0, 2, 4};
    CHECK(ce_loss(logits, y).value == doctest::Approx(std::log(5.0)).epsilon(1e-15));
    CHECK(std::log(5.0) == doctest::Approx(1.6094).epsilon(1e-4));
}

TEST_CASE("ce: a dominant true logit drives the loss to zero") {
    DenseMatrix logits(1, 4, 0.0);
    logits(0, 2) = 50.0;
    const std::vector<int> y{2};
    CHECK(ce_loss(logits, y).value < 1e-9);
}

TEST_CASE("ce matches log-sum-exp brute force and its gradient rows sum to zero") {
    std::mt19937_64 rng(24);
    for (int trial = 0; trial < 20; ++trial) {
        DenseMatrix logits(7, 5);
        for (double& v : logits.values()) v = std::normal_distribution<double>(0, 3)(rng);
        std::vector<int> y(7);
        for (int& v : y) v = std::uniform_int_distribution<int>(0, 4)(rng);
        const MatrixLoss l = ce_loss(logits, y);
        CHECK(l.value == doctest::Approx(oracle::ce_brute(logits, y)).epsilon(1e-12));
        for (std::size_t i = 0; i < 7; ++i) {
            double s = 0.0;
            for (double g : l.grad.row(i)) s += g;
            CHECK(std::abs(s) < 1e-15);
        }
        for (std::size_t i = 0; i < logits.size(); ++i) {
            const double numeric =
                oracle::central_difference([&] { return ce_loss(logits, y).value; }, logits.values()[i], 1e-5);
            // Floor 1e-3: tiny softmax entries are checked to ~1e-9 absolute.
            CHECK(oracle::relative_error(l.grad.values()[i], numeric, 1e-3) < 1e-6);
        }
    }
}

TEST_CASE("ce rejects out-of-range labels") {
    const DenseMatrix logits(1, 3, 0.0);
    const std::vector<int> y{3};
    CHECK_THROWS_AS(ce_loss(logits, y), InvalidArgument);
}

TEST_CASE("margin: documented hinge values") {
    const std::vector<double> none;
    const std::vector<double> k09{0.9};
    CHECK(max_margin_loss(k09, none, 0.7, 0.05, 0.05).pos == 0.0);
    const std::vector<double> k07{0.7};
    CHECK(max_margin_loss(k07, none, 0.7, 0.05, 0.05).pos == doctest::Approx(0.05).epsilon(1e-12));
    const std::vector<double> p07{0.7};
    const MarginLoss l = max_margin_loss(k09, p07, 0.7, 0.05, 0.05);
    CHECK(l.neg == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(l.total == doctest::Approx(l.pos + l.neg));
}

TEST_CASE("margin: empty pseudo set contributes zero, empty known set is an error") {
    const std::vector<double> known{0.5, 0.8};
    const std::vector<double> none;
    const MarginLoss l = max_margin_loss(known, none, 0.7, 0.05, 0.05);
    CHECK(l.neg == 0.0);
    CHECK(l.grad_pseudo.empty());
    CHECK_THROWS_AS(max_margin_loss(none, known, 0.7, 0.05, 0.05), InvalidArgument);
}

TEST_CASE("margin: subgradient is zero at the kink") {
    // Dyadic values so both hinges sit exactly at zero.
    const std::vector<double> known{0.75};
    const std::vector<double> pseudo{0.25};
    const MarginLoss l = max_margin_loss(known, pseudo, 0.5, 0.25, 0.25);
    CHECK(l.total == 0.0);
    CHECK(l.grad_known[0] == 0.0);
    CHECK(l.grad_pseudo[0] == 0.0);
}

TEST_CASE("margin: non-negative and monotone in the scores") {
    std::mt19937_64 rng(25);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> known(5), pseudo(4);
        for (double& v : known) v = u(rng);
        for (double& v : pseudo) v = u(rng);
        const MarginLoss base = max_margin_loss(known, pseudo, 0.6, 0.05, 0.05);
        CHECK(base.total >= 0.0);
        std::vector<double> k2 = known, p2 = pseudo;
        k2[trial % 5] += 0.1;
        p2[trial % 4] += 0.1;
        CHECK(max_margin_loss(k2, pseudo, 0.6, 0.05, 0.05).total <= base.total);
        CHECK(max_margin_loss(known, p2, 0.6, 0.05, 0.05).total >= base.total);
        for (std::size_t i = 0; i < known.size(); ++i) {
            const double numeric = oracle::central_difference(
                [&] { return max_margin_loss(known, pseudo, 0.6, 0.05, 0.05).total; }, known[i], 1e-7);
            CHECK(base.grad_known[i] == doctest::Approx(numeric).epsilon(1e-6));
        }
        for (std::size_t i = 0; i < pseudo.size(); ++i) {
            const double numeric = oracle::central_difference(
                [&] { return max_margin_loss(known, pseudo, 0.6, 0.05, 0.05).total; }, pseudo[i], 1e-7);
            CHECK(base.grad_pseudo[i] == doctest::Approx(numeric).epsilon(1e-6));
        }
    }
}

TEST_CASE("total loss arithmetic") {
    CHECK(total_loss(1.0, 2.0, 0.0, 0.3, 0.05) == doctest::Approx(1.6).epsilon(1e-15));
    CHECK(total_loss(1.0, 2.0, 4.0, 0.3, 0.05) == doctest::Approx(1.8).epsilon(1e-15));
    std::mt19937_64 rng(26);
    for (int i = 0; i < 20; ++i) {
        const double ce = std::abs(oracle::random_vector(1, rng)[0]);
        const double sup = std::abs(oracle::random_vector(1, rng)[0]);
        const double mm = std::abs(oracle::random_vector(1, rng)[0]);
        CHECK(total_loss(ce, sup, mm, 0.3, 0.0) == ce + 0.3 * sup);
    }
}

TEST_CASE("loss config validation") {
    LossConfig c;
    CHECK_NOTHROW(c.validate());
    c.temperature = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = LossConfig{};
    c.m_neg = -0.1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

}  // TEST_SUITE
