#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "ltc/datakit.hpp"
#include "ltc/error.hpp"

using namespace ltc;

namespace {

Dataset small_mixture(std::size_t per_class, std::uint64_t seed = 5) {
    SynthSpec s;
    s.dim = 4;
    s.samples_per_class = per_class;
    s.seed = seed;
    return synth_mixture(s);
}

}  // namespace

TEST_SUITE("datakit") {

TEST_CASE("synthetic mixture is deterministic and class-major") {
    const Dataset a = small_mixture(20), b = small_mixture(20), c = small_mixture(20, 6);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    CHECK(a.size() == 200);
    CHECK(a.dim() == 4);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.labels[i] == static_cast<int>(i / 20));
}

TEST_CASE("class means sit at the requested radius") {
    SynthSpec s;
    s.dim = 8;
    s.samples_per_class = 4000;
    s.noise = 0.5;
    s.separation = 3.0;
    s.k_known = 2;
    s.k_novel = 1;
    const Dataset d = synth_mixture(s);
    for (int c = 0; c < 3; ++c) {
        Vector mean(8, 0.0);
        double var = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (d.labels[i] != c) continue;
            for (std::size_t j = 0; j < 8; ++j) mean[j] += d.x(i, j) / 4000.0;
        }
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (d.labels[i] != c) continue;
            var += (d.x(i, 0) - mean[0]) * (d.x(i, 0) - mean[0]) / 3999.0;
        }
        CHECK(l2_norm(mean) == doctest::Approx(3.0).epsilon(0.02));
        CHECK(std::sqrt(var) == doctest::Approx(0.5).epsilon(0.05));
    }
}

TEST_CASE("embeddings csv round trip") {
    const Dataset a = small_mixture(3);
    std::stringstream ss;
    write_embeddings_csv(ss, a);
    CHECK(ss.str().rfind("label,f0,f1,f2,f3\n", 0) == 0);
    const Dataset b = read_embeddings_csv(ss);
    CHECK(a == b);
}

TEST_CASE("embeddings csv errors name the line") {
    std::istringstream short_row("label,f0,f1\n0,1.0,2.0\n1,3.0\n");
    CHECK_THROWS_WITH_AS(read_embeddings_csv(short_row), doctest::Contains("line 3"), InvalidArgument);
    std::istringstream bad_value("label,f0\n0,abc\n");
    CHECK_THROWS_WITH_AS(read_embeddings_csv(bad_value), doctest::Contains("line 2"), InvalidArgument);
    std::istringstream bad_header("y,x0\n0,1\n");
    CHECK_THROWS_AS(read_embeddings_csv(bad_header), InvalidArgument);
    std::istringstream empty("");
    CHECK_THROWS_AS(read_embeddings_csv(empty), InvalidArgument);
    std::istringstream nan_value("label,f0\n0,nan\n");
    CHECK_THROWS_AS(read_embeddings_csv(nan_value), InvalidArgument);
}

TEST_CASE("split sizes, stratification and leakage") {
    const Dataset d = small_mixture(20);
    const OcdSplit s = make_split(d, 5, 0.5, 11);
    CHECK(s.support.size() == 50);
    CHECK(s.query.size() == 150);
    CHECK(s.known_labels == std::vector<int>{0, 1, 2, 3, 4});
    CHECK(s.novel_labels == std::vector<int>{5, 6, 7, 8, 9});

    std::map<int, std::size_t> per_class;
    for (int y : s.support.labels) {
        CHECK(y >= 0);
        CHECK(y < 5);
        ++per_class[y];
    }
    for (const auto& [y, n] : per_class) CHECK(n == 10);

    std::set<std::size_t> support(s.support_source.begin(), s.support_source.end());
    std::set<std::size_t> query(s.query_source.begin(), s.query_source.end());
    CHECK(support.size() == s.support_source.size());
    CHECK(query.size() == s.query_source.size());
    for (std::size_t r : support) CHECK(query.count(r) == 0);
    CHECK(support.size() + query.size() == d.size());

    for (std::size_t i = 0; i < s.query.size(); ++i) {
        const std::size_t src = s.query_source[i];
        CHECK(s.query.labels[i] == d.labels[src]);
        CHECK(s.query_is_old[i] == (d.labels[src] < 5));
    }
    for (std::size_t i = 0; i < s.support.size(); ++i) {
        CHECK(s.known_labels[static_cast<std::size_t>(s.support.labels[i])] == d.labels[s.support_source[i]]);
    }
}

TEST_CASE("split rounding per class stays within floor and ceil") {
    const Dataset d = small_mixture(7);
    for (double frac : {0.3, 0.5, 0.77}) {
        const OcdSplit s = make_split(d, 4, frac, 2);
        std::map<int, std::size_t> n;
        for (int y : s.support.labels) ++n[y];
        for (const auto& [y, c] : n) {
            CHECK(c >= static_cast<std::size_t>(std::floor(frac * 7)));
            CHECK(c <= static_cast<std::size_t>(std::ceil(frac * 7)));
        }
    }
}

TEST_CASE("split is seeded") {
    const Dataset d = small_mixture(10);
    const OcdSplit a = make_split(d, 5, 0.5, 1), b = make_split(d, 5, 0.5, 1), c = make_split(d, 5, 0.5, 2);
    CHECK(a.query_source == b.query_source);
    CHECK(a.support_source == b.support_source);
    CHECK(a.query_source != c.query_source);
    CHECK(split_manifest_json(a) == split_manifest_json(b));
}

TEST_CASE("split argument errors") {
    const Dataset d = small_mixture(10);
    CHECK_THROWS_AS(make_split(d, 10, 0.5, 1), InvalidArgument);
    CHECK_THROWS_AS(make_split(d, 5, 0.0, 1), InvalidArgument);
    CHECK_THROWS_AS(make_split(d, 5, 1.0, 1), InvalidArgument);
}

TEST_CASE("query stream yields items in order once") {
    const OcdSplit s = make_split(small_mixture(6), 5, 0.5, 3);
    QueryStream q(s);
    CHECK(q.size() == s.query.size());
    std::size_t n = 0;
    while (auto item = q.next()) {
        CHECK(item->id == n);
        CHECK(item->x.data() == s.query.x.row(n).data());
        ++n;
    }
    CHECK(n == s.query.size());
    CHECK_FALSE(q.next().has_value());
    q.reset();
    CHECK(q.next()->id == 0);
}

TEST_CASE("truth csv round trip") {
    const OcdSplit s = make_split(small_mixture(6), 5, 0.5, 3);
    std::stringstream ss;
    write_truth_csv(ss, s);
    const auto rows = read_truth_csv(ss);
    REQUIRE(rows.size() == s.query.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].item_id == i);
        CHECK(rows[i].label == s.query.labels[i]);
        CHECK(rows[i].is_old == s.query_is_old[i]);
    }
    std::istringstream bad("item_id,label,is_old\n0,1\n");
    CHECK_THROWS_WITH_AS(read_truth_csv(bad), doctest::Contains("line 2"), InvalidArgument);
}

TEST_CASE("augmentation noise scale") {
    std::mt19937_64 rng(9);
    const Vector x{1.0, -2.0};
    CHECK(augment(x, 0.0, rng) == x);
    double s2 = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const auto v = augment(x, 0.3, rng);
        s2 += (v[0] - 1.0) * (v[0] - 1.0);
    }
    CHECK(std::sqrt(s2 / 20000) == doctest::Approx(0.3).epsilon(0.03));
}

}  // TEST_SUITE
