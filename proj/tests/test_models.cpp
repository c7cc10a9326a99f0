#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cuqr/error.hpp"
#include "cuqr/models.hpp"

using namespace cuqr;

namespace {

Matrix random_matrix(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Matrix x(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x(i, j) = u(rng);
    return x;
}

// Recursive greedy least-squares tree, brute force over every feature and
// every midpoint. Returns the fitted value of `query` for residuals r.
double oracle_tree(const Matrix& x, const std::vector<double>& r, const std::vector<std::size_t>& rows,
                   std::span<const double> query, int depth, int min_leaf) {
    double sum = 0.0;
    for (auto i : rows) sum += r[i];
    const double mean = sum / static_cast<double>(rows.size());
    if (depth == 0) return mean;
    double sse_best = 0.0;
    for (auto i : rows) sse_best += (r[i] - mean) * (r[i] - mean);
    const double sse_parent = sse_best;
    int best_f = -1;
    double best_t = 0.0;
    for (std::size_t f = 0; f < x.cols(); ++f) {
        std::vector<double> vals;
        for (auto i : rows) vals.push_back(x(i, f));
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
            const double t = 0.5 * (vals[k] + vals[k + 1]);
            std::vector<double> l, rr;
            for (auto i : rows) (x(i, f) <= t ? l : rr).push_back(r[i]);
            if (static_cast<int>(l.size()) < min_leaf || static_cast<int>(rr.size()) < min_leaf) continue;
            auto sse = [](const std::vector<double>& v) {
                double m = 0.0;
                for (double a : v) m += a;
                m /= static_cast<double>(v.size());
                double s = 0.0;
                for (double a : v) s += (a - m) * (a - m);
                return s;
            };
            const double s = sse(l) + sse(rr);
            if (s < sse_best - 1e-12 * (1.0 + sse_parent)) {
                sse_best = s;
                best_f = static_cast<int>(f);
                best_t = t;
            }
        }
    }
    if (best_f < 0) return mean;
    std::vector<std::size_t> l, rr;
    for (auto i : rows) (x(i, static_cast<std::size_t>(best_f)) <= best_t ? l : rr).push_back(i);
    const auto& next = query[static_cast<std::size_t>(best_f)] <= best_t ? l : rr;
    return oracle_tree(x, r, next, query, depth - 1, min_leaf);
}

}  // namespace

TEST_CASE("gbt with one tree matches a brute-force greedy tree") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    for (int depth : {1, 2, 3}) {
        const Matrix x = random_matrix(120, 3, rng);
        std::vector<double> y(120);
        for (std::size_t i = 0; i < 120; ++i) y[i] = std::sin(2 * x(i, 0)) + x(i, 1) * x(i, 2) + 0.1 * nd(rng);
        GbtParams p;
        p.n_trees = 1;
        p.max_depth = depth;
        p.learning_rate = 1.0;
        p.min_leaf = 4;
        const auto m = GradientBoostedTrees::fit(x, y, p);
        double base = 0.0;
        for (double v : y) base += v;
        base /= 120.0;
        CHECK(m.base() == doctest::Approx(base).epsilon(1e-12));
        std::vector<double> r(120);
        for (std::size_t i = 0; i < 120; ++i) r[i] = y[i] - base;
        std::vector<std::size_t> all(120);
        std::iota(all.begin(), all.end(), 0);
        const Matrix q = random_matrix(50, 3, rng);
        for (std::size_t i = 0; i < 50; ++i)
            CHECK(m.predict(q.row(i)) == doctest::Approx(base + oracle_tree(x, r, all, q.row(i), depth, 4)).epsilon(1e-9));
    }
}

TEST_CASE("gbt training error is nonincreasing and leaves respect min_leaf") {
    std::mt19937_64 rng(5);
    const Matrix x = random_matrix(300, 2, rng);
    std::vector<double> y(300);
    for (std::size_t i = 0; i < 300; ++i) y[i] = 5 * x(i, 0) + std::abs(x(i, 1));
    GbtParams p;
    p.n_trees = 40;
    p.min_leaf = 7;
    std::vector<double> mse;
    const auto m = GradientBoostedTrees::fit(x, y, p, &mse);
    REQUIRE(mse.size() == 41);
    for (std::size_t t = 1; t < mse.size(); ++t) CHECK(mse[t] <= mse[t - 1] + 1e-12);
    CHECK(mse.back() < 0.1 * mse.front());
    for (const auto& tree : m.trees()) {
        std::vector<int> count(tree.value.size(), 0);
        for (std::size_t i = 0; i < 300; ++i) ++count[tree.leaf_of(x.row(i))];
        for (std::size_t node = 0; node < tree.value.size(); ++node)
            if (tree.feature[node] < 0) CHECK(count[node] >= 7);
    }
}

TEST_CASE("gbt constant response and row limits") {
    Matrix x(10, 1);
    for (std::size_t i = 0; i < 10; ++i) x(i, 0) = static_cast<double>(i);
    const std::vector<double> y(10, 3.5);
    GbtParams p;
    p.n_trees = 5;
    const auto m = GradientBoostedTrees::fit(x, y, p);
    CHECK(m.predict(std::vector<double>{100.0}) == doctest::Approx(3.5));
    Matrix small(9, 1);
    CHECK_THROWS_AS(GradientBoostedTrees::fit(small, std::vector<double>(9, 0.0), p), Error);
    try {
        GradientBoostedTrees::fit(small, std::vector<double>(9, 0.0), p);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TooFewRows);
    }
}

TEST_CASE("gbt is deterministic and round-trips through json") {
    std::mt19937_64 rng(8);
    const Matrix x = random_matrix(200, 4, rng);
    std::vector<double> y(200);
    for (std::size_t i = 0; i < 200; ++i) y[i] = x(i, 0) - 2 * x(i, 3);
    GbtParams p;
    p.n_trees = 25;
    const auto a = GradientBoostedTrees::fit(x, y, p);
    const auto b = GradientBoostedTrees::fit(x, y, p);
    CHECK(a.to_json().dump() == b.to_json().dump());
    const auto back = regressor_from_json(Json::parse(a.to_json().dump()));
    CHECK(back->n_features() == 4);
    for (std::size_t i = 0; i < 200; ++i) CHECK(back->predict(x.row(i)) == a.predict(x.row(i)));
}

TEST_CASE("knn matches a brute-force neighbour search") {
    std::mt19937_64 rng(13);
    const Matrix x = random_matrix(60, 2, rng);
    std::vector<double> y(60);
    for (std::size_t i = 0; i < 60; ++i) y[i] = x(i, 0) * 3 + x(i, 1);
    const auto m = KnnRegressor::fit(x, y, 5);
    const Matrix q = random_matrix(30, 2, rng);
    for (std::size_t r = 0; r < 30; ++r) {
        std::vector<std::pair<double, std::size_t>> d;
        for (std::size_t i = 0; i < 60; ++i) {
            const double a = q(r, 0) - x(i, 0), b = q(r, 1) - x(i, 1);
            d.emplace_back(a * a + b * b, i);
        }
        std::sort(d.begin(), d.end());
        double s = 0.0;
        for (int k = 0; k < 5; ++k) s += y[d[static_cast<std::size_t>(k)].second];
        CHECK(m.predict(q.row(r)) == doctest::Approx(s / 5.0).epsilon(1e-12));
    }
    const auto back = regressor_from_json(m.to_json());
    for (std::size_t r = 0; r < 30; ++r) CHECK(back->predict(q.row(r)) == m.predict(q.row(r)));
}

TEST_CASE("knn ties go to the lower row index; k > n rejected") {
    Matrix x(3, 1, std::vector<double>{1.0, -1.0, 1.0});
    const std::vector<double> y{10.0, 20.0, 30.0};
    const auto m = KnnRegressor::fit(x, y, 1);
    CHECK(m.predict(std::vector<double>{0.0}) == 10.0);
    try {
        KnnRegressor::fit(x, y, 4);
        FAIL("expected KTooLarge");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::KTooLarge);
    }
}

TEST_CASE("regressor_from_json rejects unknown kinds") {
    CHECK_THROWS_AS(regressor_from_json(Json{{"kind", "forest"}}), Error);
}
