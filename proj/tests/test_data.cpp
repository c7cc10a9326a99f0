#include "doctest.h"

#include <algorithm>
#include <random>
#include <set>

#include "cuqr/data.hpp"
#include "cuqr/error.hpp"
#include "test_helpers.hpp"

using namespace cuqr;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected a cuqr::Error");
    return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("load_csv extracts the response column") {
    auto dir = test::scratch_dir("data_load");
    auto path = test::write_file(dir / "d.csv", "x,y\n1,2\n3,4\n5,6\n");
    const Dataset ds = load_csv(path, "y");
    CHECK(ds.n() == 3);
    CHECK(ds.d() == 1);
    CHECK(ds.response() == std::vector<double>{2, 4, 6});
    CHECK(ds.features().column(0) == std::vector<double>{1, 3, 5});
    CHECK(ds.column_names() == std::vector<std::string>{"x"});

    CHECK(code_of([&] { load_csv(path, "z"); }) == ErrorCode::MissingColumn);
}

TEST_CASE("load_csv rejects non-numeric and non-finite cells") {
    auto dir = test::scratch_dir("data_bad");
    auto nan = test::write_file(dir / "nan.csv", "x,y\n1,2\nNaN,4\n");
    auto inf = test::write_file(dir / "inf.csv", "x,y\n1,inf\n");
    auto word = test::write_file(dir / "word.csv", "x,y\n1,abc\n");
    auto empty = test::write_file(dir / "empty.csv", "");
    auto header_only = test::write_file(dir / "header.csv", "x,y\n");
    CHECK(code_of([&] { load_csv(nan, "y"); }) == ErrorCode::NonNumericCell);
    CHECK(code_of([&] { load_csv(inf, "y"); }) == ErrorCode::NonNumericCell);
    CHECK(code_of([&] { load_csv(word, "y"); }) == ErrorCode::NonNumericCell);
    CHECK(code_of([&] { load_csv(empty, "y"); }) == ErrorCode::EmptyFile);
    CHECK(code_of([&] { load_csv(header_only, "y"); }) == ErrorCode::EmptyFile);

    try {
        load_csv(nan, "y");
    } catch (const Error& e) {
        const std::string what = e.what();
        CHECK(what.find("row 2") != std::string::npos);
        CHECK(what.find("'x'") != std::string::npos);
    }
}

TEST_CASE("CSV parser handles quoting and CRLF") {
    const NumericTable t = parse_numeric_csv("\"a\",\"b,c\"\r\n\"1.5\",2e3\r\n");
    CHECK(t.header == std::vector<std::string>{"a", "b,c"});
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0] == std::vector<double>{1.5, 2000.0});
}

TEST_CASE("to_csv round-trips exactly") {
    Matrix x(2, 2, std::vector<double>{0.1, 1.0 / 3.0, -2.5e-300, 7.0});
    Dataset ds(x, {1e17, -0.2}, {"a", "b"}, "y");
    auto dir = test::scratch_dir("data_roundtrip");
    auto path = test::write_file(dir / "d.csv", to_csv(ds));
    CHECK(load_csv(path, "y") == ds);
}

TEST_CASE("split sizes follow 42.5 / 42.5 / 15") {
    const DataSplit s = split_dataset(1000, 1);
    CHECK(s.train.size() == 425);
    CHECK(s.cal1.size() == 213);
    CHECK(s.cal2.size() == 212);
    CHECK(s.test.size() == 150);

    const DataSplit small = split_dataset(8, 3);
    CHECK(!small.train.empty());
    CHECK(!small.cal1.empty());
    CHECK(!small.cal2.empty());
    CHECK(!small.test.empty());

    CHECK(code_of([] { split_dataset(7, 0); }) == ErrorCode::TooFewRows);
}

TEST_CASE("split is disjoint and seed-deterministic (property)") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 8 + rng() % 3000;
        const std::uint64_t seed = rng();
        const DataSplit a = split_dataset(n, seed);
        const DataSplit b = split_dataset(n, seed);
        CHECK(a == b);
        std::set<Index> all;
        for (const auto* part : {&a.train, &a.cal1, &a.cal2, &a.test}) all.insert(part->begin(), part->end());
        CHECK(all.size() == a.train.size() + a.cal1.size() + a.cal2.size() + a.test.size());
        CHECK(*all.rbegin() < n);
        CHECK((a.cal1.size() == a.cal2.size() || a.cal1.size() == a.cal2.size() + 1));
    }
    CHECK(split_dataset(500, 1).train != split_dataset(500, 2).train);
}

TEST_CASE("standardize uses the sample standard deviation of the fit rows") {
    Matrix x(3, 2, std::vector<double>{0, 5, 2, 5, 100, 5});
    Dataset ds(x, {1, 3, 50}, {"a", "c"}, "y");
    const std::vector<Index> fit_rows{0, 1};
    auto [z, params] = standardize(ds, fit_rows);
    // Column a on rows {0, 2}: mean 1, sd sqrt(2).
    CHECK(z.features()(0, 0) == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(z.features()(1, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    // Statistics come from the fit rows only: row 2 is far out.
    CHECK(z.features()(2, 0) == doctest::Approx(99.0 / std::sqrt(2.0)).epsilon(1e-12));
    // Constant column: scale 1.
    CHECK(params.feature_scale[1] == 1.0);
    CHECK(z.features().column(1) == std::vector<double>{0, 0, 0});
    CHECK(params.response_mean == 2.0);
}

TEST_CASE("standardize then inverse is the identity (property)") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd(3.0, 40.0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng() % 60, d = 1 + rng() % 5;
        std::vector<double> v(n * d), y(n);
        for (auto& e : v) e = nd(rng);
        for (auto& e : y) e = nd(rng);
        Dataset ds(Matrix(n, d, v), y, std::vector<std::string>(d, "c"), "y");
        std::vector<Index> rows(n);
        std::iota(rows.begin(), rows.end(), Index{0});
        auto [z, params] = standardize(ds, rows);
        const Dataset back = params.inverse_transform(z);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(back.y(i) - ds.y(i)) <= 1e-12 * std::max(1.0, std::abs(ds.y(i))));
            for (std::size_t j = 0; j < d; ++j) {
                CHECK(std::abs(back.features()(i, j) - ds.features()(i, j)) <=
                      1e-12 * std::max(1.0, std::abs(ds.features()(i, j))));
            }
        }
    }
}

TEST_CASE("dataset construction rejects bad shapes") {
    CHECK(code_of([] { Dataset(Matrix(2, 1), {1.0}, {"a"}, "y"); }) == ErrorCode::DimensionMismatch);
    CHECK(code_of([] { Dataset(Matrix(0, 1), {}, {"a"}, "y"); }) == ErrorCode::TooFewRows);
    CHECK(code_of([] { Dataset(Matrix(1, 1, {std::nan("")}), {1.0}, {"a"}, "y"); }) == ErrorCode::NonNumericCell);
    CHECK(code_of([] { Interval(2.0, 1.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("quantile grid levels") {
    QuantileGrid grid(4);
    CHECK(grid.levels() == std::vector<double>{0.25, 0.5, 0.75});
    CHECK(grid.level(2) == 0.5);
    CHECK(grid.smallest_index_at_least(0.5) == 2);
    CHECK(grid.smallest_index_at_least(0.3) == 2);
    CHECK(grid.smallest_index_at_least(0.1) == 1);
    CHECK(grid.smallest_index_at_least(1.0) == 3);
    CHECK(code_of([] { QuantileGrid(1); }) == ErrorCode::InvalidArgument);
}
