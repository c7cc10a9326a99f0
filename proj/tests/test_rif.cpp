#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "cuqr/error.hpp"
#include "cuqr/rif.hpp"

using namespace cuqr;

namespace {

struct ConstantModel final : Regressor {
    double c;
    std::size_t d;
    ConstantModel(double c_, std::size_t d_) : c(c_), d(d_) {}
    double predict(std::span<const double>) const override { return c; }
    std::size_t n_features() const noexcept override { return d; }
    Json to_json() const override { return {}; }
};

}  // namespace

TEST_CASE("influence_function values") {
    CHECK(influence_function(0.5, 0.9, 1.0, 2.0) == doctest::Approx(-0.05));
    CHECK(influence_function(1.0, 0.9, 1.0, 2.0) == doctest::Approx(-0.05));  // e == q counts as below
    CHECK(influence_function(1.5, 0.9, 1.0, 2.0) == doctest::Approx(0.45));
    for (double f : {0.0, -1.0}) {
        try {
            influence_function(0.0, 0.5, 1.0, f);
            FAIL("expected NonpositiveDensity");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::NonpositiveDensity);
        }
    }
}

TEST_CASE("influence function matches a finite-difference contamination derivative") {
    // F is piecewise uniform with density 0.5 on [0, 1], 0.25 on [1, 3].
    // Contaminating by a point mass at z: F_eps = (1 - eps) F + eps 1{. >= z}.
    auto cdf = [](double x) {
        if (x <= 0) return 0.0;
        if (x <= 1) return 0.5 * x;
        if (x <= 3) return 0.5 + 0.25 * (x - 1);
        return 1.0;
    };
    auto pdf = [](double x) { return x < 1 ? 0.5 : 0.25; };
    auto quantile = [&](double a, double eps, double z) {
        double lo = 0.0, hi = 3.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double fm = (1 - eps) * cdf(mid) + (mid >= z ? eps : 0.0);
            (fm >= a ? hi : lo) = mid;
        }
        return hi;
    };
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.0, 3.0), ua(0.05, 0.95);
    const double eps = 1e-4;
    for (int trial = 0; trial < 20; ++trial) {
        const double a = ua(rng);
        const double q = quantile(a, 0.0, 10.0);
        double z = u(rng);
        if (std::abs(z - q) < 0.05) z = q + 0.1;
        const double fd = (quantile(a, eps, z) - q) / eps;
        const double ifv = influence_function(z, a, q, pdf(q));
        CHECK(std::abs(fd - ifv) <= 0.05 * std::abs(ifv));
    }
}

TEST_CASE("enforce_monotonicity carries the previous level forward") {
    CHECK(enforce_monotonicity({3, 4, 2, 5}) == std::vector<double>{3, 3, 2, 2});
    CHECK(enforce_monotonicity({1}) == std::vector<double>{1});
    CHECK(enforce_monotonicity({}).empty());
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> f(1 + rng() % 30);
        for (auto& v : f) v = u(rng);
        const auto g = enforce_monotonicity(f);
        CHECK(g.front() == f.front());
        for (std::size_t k = 1; k < g.size(); ++k) {
            CHECK(g[k] <= g[k - 1]);
            CHECK(g[k] <= f[k]);
        }
        CHECK(enforce_monotonicity(g) == g);
    }
}

TEST_CASE("rif_targets columns recenter on the grid quantiles") {
    std::mt19937_64 rng(3);
    std::exponential_distribution<double> ed(1.0);
    std::vector<double> e(2000);
    for (auto& v : e) v = ed(rng);
    const QuantileGrid grid(20);
    const Kde1d kde = kde_fit(e);
    const auto t = rif_targets(e, grid, kde);
    REQUIRE(t.q_hat.size() == 19);
    REQUIRE(t.rif.rows() == 2000);
    REQUIRE(t.rif.cols() == 19);
    CHECK(std::is_sorted(t.q_hat.begin(), t.q_hat.end()));
    for (std::size_t k = 0; k < 19; ++k) {
        CHECK(t.q_hat[k] == empirical_quantile(e, grid.levels()[k]));
        double mean = 0.0;
        std::size_t below = 0;
        for (std::size_t i = 0; i < 2000; ++i) {
            mean += t.rif(i, k);
            below += e[i] <= t.q_hat[k];
        }
        mean /= 2000.0;
        const double fn = static_cast<double>(below) / 2000.0;
        CHECK(mean == doctest::Approx(t.q_hat[k] + (grid.levels()[k] - fn) / t.f_hat[k]).epsilon(1e-9));
        CHECK(std::abs(mean - t.q_hat[k]) <= 1.0 / (2000.0 * t.f_hat[k]) + 1e-9);
        if (k > 0) CHECK(t.f_hat[k] <= t.f_hat[k - 1]);
    }
    try {
        rif_targets(std::vector<double>(19, 1.0), grid, kde);
        FAIL("expected TooFewResiduals");
    } catch (const Error& err) {
        CHECK(err.code() == ErrorCode::TooFewResiduals);
    }
}

TEST_CASE("fit_index_targets picks the first covering level") {
    const std::vector<double> q{1.0, 2.0, 2.0, 3.0};
    const std::vector<double> e{0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5};
    CHECK(fit_index_targets(e, q) == std::vector<int>{1, 1, 2, 2, 4, 4, 5});
    CHECK_THROWS_AS(fit_index_targets(e, std::vector<double>{2.0, 1.0}), Error);
}

TEST_CASE("nested_half_widths hand example") {
    const QuantileGrid grid(4);  // levels 0.25, 0.5, 0.75
    const std::vector<double> q{1.0, 2.0, 4.0};
    const std::vector<double> f{0.5, 0.25, 0.25};
    // index 2.5: k=1,2 use indicator 0, k=3 uses 1.
    // raw: 1 + 0.5 = 1.5; 2 + 2 = 4; 4 + (0.75 - 1) * 4 = 3 -> clamped to 4.
    CHECK(nested_half_widths(grid, q, f, 2.5) == std::vector<double>{1.5, 4.0, 4.0});
    // index 0: all indicators 1. raw: |1 - 1.5| = 0.5; |2 - 2| = 0; |4 - 1| = 3.
    CHECK(nested_half_widths(grid, q, f, 0.0) == std::vector<double>{0.5, 0.5, 3.0});
    CHECK_THROWS_AS(nested_half_widths(grid, q, std::vector<double>{1.0}, 0.0), Error);
}

TEST_CASE("nested bands are nested for random states") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 2000; ++t) {
        const int K = 2 + static_cast<int>(rng() % 60);
        const QuantileGrid grid(K);
        std::vector<double> q(grid.size()), f(grid.size());
        double acc = 0.0;
        for (auto& v : q) v = (acc += 3 * u(rng));
        for (auto& v : f) v = 0.01 + u(rng);
        f = enforce_monotonicity(f);
        const NestedBandFamily bands{10 * u(rng) - 5, nested_half_widths(grid, q, f, (K + 2) * u(rng) - 1)};
        for (int k = 2; k < K; ++k) {
            const Interval a = bands.band(k - 1), b = bands.band(k);
            CHECK(b.lo <= a.lo);
            CHECK(b.hi >= a.hi);
        }
    }
}

TEST_CASE("fit_rif_model and json round trip") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> u;
    Matrix x(400, 2);
    std::vector<double> y(400);
    for (std::size_t i = 0; i < 400; ++i) {
        x(i, 0) = u(rng);
        x(i, 1) = u(rng);
        y[i] = (0.2 + 2 * x(i, 0)) * nd(rng);
    }
    const ConstantModel mu(0.0, 2);
    RunConfig cfg;
    cfg.index_params.n_trees = 30;
    const QuantileGrid grid(20);
    const RifModel m = fit_rif_model(mu, x, y, grid, cfg);
    CHECK(std::is_sorted(m.q_hat().begin(), m.q_hat().end()));
    for (std::size_t k = 1; k < m.f_hat().size(); ++k) CHECK(m.f_hat()[k] <= m.f_hat()[k - 1]);
    // The index model tracks residual size: it should predict higher
    // indices where the noise is larger.
    CHECK(m.predict_index(std::vector<double>{0.95, 0.5}) > m.predict_index(std::vector<double>{0.05, 0.5}));

    const RifModel back = RifModel::from_json(nlohmann::json::parse(m.to_json().dump()));
    CHECK(back.q_hat() == m.q_hat());
    CHECK(back.f_hat() == m.f_hat());
    CHECK(back.bandwidth() == m.bandwidth());
    for (std::size_t i = 0; i < 400; i += 7) {
        CHECK(back.predict_bands(mu, x.row(i)).half_widths == m.predict_bands(mu, x.row(i)).half_widths);
    }
    CHECK_THROWS_AS(m.predict_bands(mu, std::vector<double>{1.0}), Error);
    CHECK_THROWS_AS(fit_rif_model(mu, Matrix(10, 2), std::vector<double>(10, 0.0), grid, cfg), Error);
}
