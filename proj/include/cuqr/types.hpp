#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cuqr {

using Index = std::size_t;
using IndexSet = std::vector<Index>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0; }

    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }

    const std::vector<double>& values() const noexcept { return values_; }

    Matrix select_rows(std::span<const Index> idx) const;
    std::vector<double> column(std::size_t c) const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

/// Covariate rows plus one numeric response. Validated on construction:
/// n >= 1, d >= 1, all values finite, shapes consistent.
class Dataset {
public:
    Dataset(Matrix features, std::vector<double> response, std::vector<std::string> column_names,
            std::string response_name);

    std::size_t n() const noexcept { return response_.size(); }
    std::size_t d() const noexcept { return features_.cols(); }

    const Matrix& features() const noexcept { return features_; }
    const std::vector<double>& response() const noexcept { return response_; }
    const std::vector<std::string>& column_names() const noexcept { return column_names_; }
    const std::string& response_name() const noexcept { return response_name_; }

    std::span<const double> x(std::size_t i) const { return features_.row(i); }
    double y(std::size_t i) const { return response_[i]; }

    Dataset subset(std::span<const Index> idx) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    Matrix features_;
    std::vector<double> response_;
    std::vector<std::string> column_names_;
    std::string response_name_;
};

/// Disjoint train / calibration (two halves) / test index sets.
struct DataSplit {
    IndexSet train;
    IndexSet cal1;
    IndexSet cal2;
    IndexSet test;

    IndexSet calibration() const;
    // Throws InvalidArgument unless the parts are nonempty, disjoint and < n.
    void validate(std::size_t n) const;

    friend bool operator==(const DataSplit&, const DataSplit&) = default;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    Interval() = default;
    Interval(double lo_, double hi_);

    double length() const noexcept { return hi - lo; }
    bool contains(double y) const noexcept { return lo <= y && y <= hi; }
};

/// Levels k/K for k = 1..K-1. Level indices are 1-based throughout.
class QuantileGrid {
public:
    explicit QuantileGrid(int K);

    int K() const noexcept { return K_; }
    // Number of levels, K - 1.
    std::size_t size() const noexcept { return levels_.size(); }
    double level(int k) const { return levels_.at(static_cast<std::size_t>(k - 1)); }
    const std::vector<double>& levels() const noexcept { return levels_; }

    // Smallest k with level(k) >= value, or K-1 when none.
    int smallest_index_at_least(double value) const;

private:
    int K_;
    std::vector<double> levels_;
};

}  // namespace cuqr
