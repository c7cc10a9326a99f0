#include "cuqr/types.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "cuqr/error.hpp"

namespace cuqr {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows * cols) {
        fail(ErrorCode::DimensionMismatch, "matrix storage does not match shape");
    }
}

Matrix Matrix::select_rows(std::span<const Index> idx) const {
    Matrix out(idx.size(), cols_);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= rows_) fail(ErrorCode::InvalidArgument, "row index out of range");
        std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(idx[i] * cols_), cols_,
                    out.values_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
    }
    return out;
}

std::vector<double> Matrix::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

Dataset::Dataset(Matrix features, std::vector<double> response, std::vector<std::string> column_names,
                 std::string response_name)
    : features_(std::move(features)),
      response_(std::move(response)),
      column_names_(std::move(column_names)),
      response_name_(std::move(response_name)) {
    if (response_.empty()) fail(ErrorCode::TooFewRows, "dataset needs at least one row");
    if (features_.cols() == 0) fail(ErrorCode::InvalidArgument, "dataset needs at least one feature column");
    if (features_.rows() != response_.size()) {
        fail(ErrorCode::DimensionMismatch, "feature rows and response length differ");
    }
    if (column_names_.size() != features_.cols()) {
        fail(ErrorCode::DimensionMismatch, "column name count does not match feature columns");
    }
    for (double v : features_.values()) {
        if (!std::isfinite(v)) fail(ErrorCode::NonNumericCell, "non-finite feature value");
    }
    for (double v : response_) {
        if (!std::isfinite(v)) fail(ErrorCode::NonNumericCell, "non-finite response value");
    }
}

Dataset Dataset::subset(std::span<const Index> idx) const {
    std::vector<double> y(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) y[i] = response_.at(idx[i]);
    return Dataset(features_.select_rows(idx), std::move(y), column_names_, response_name_);
}

IndexSet DataSplit::calibration() const {
    IndexSet out = cal1;
    out.insert(out.end(), cal2.begin(), cal2.end());
    return out;
}

void DataSplit::validate(std::size_t n) const {
    std::unordered_set<Index> seen;
    for (const IndexSet* part : {&train, &cal1, &cal2, &test}) {
        if (part->empty()) fail(ErrorCode::InvalidArgument, "split part is empty");
        for (Index i : *part) {
            if (i >= n) fail(ErrorCode::InvalidArgument, "split index out of range");
            if (!seen.insert(i).second) fail(ErrorCode::InvalidArgument, "split parts overlap");
        }
    }
}

Interval::Interval(double lo_, double hi_) : lo(lo_), hi(hi_) {
    if (!(lo <= hi)) fail(ErrorCode::InvalidArgument, "interval requires lo <= hi");
}

QuantileGrid::QuantileGrid(int K) : K_(K) {
    if (K < 2) fail(ErrorCode::InvalidArgument, "grid size K must be >= 2");
    levels_.reserve(static_cast<std::size_t>(K - 1));
    for (int k = 1; k < K; ++k) levels_.push_back(static_cast<double>(k) / K);
}

int QuantileGrid::smallest_index_at_least(double value) const {
    auto it = std::lower_bound(levels_.begin(), levels_.end(), value);
    if (it == levels_.end()) return K_ - 1;
    return static_cast<int>(it - levels_.begin()) + 1;
}

}  // namespace cuqr
