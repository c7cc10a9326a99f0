#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cuqr/config.hpp"
#include "cuqr/types.hpp"

namespace cuqr {

/// Raw header + numeric cells of a CSV file. Every cell must parse as a
/// finite double.
struct NumericTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

NumericTable read_numeric_csv(const std::filesystem::path& path);
NumericTable parse_numeric_csv(std::string_view text);

Dataset load_csv(const std::filesystem::path& path, const std::string& response_column);

// Response is written as the last column. Doubles use the shortest
// round-trip representation.
std::string to_csv(const Dataset& ds);
std::string format_double(double v);

/// 42.5% train, 15% test, remainder halved into cal1/cal2 (cal1 takes the
/// odd index). Permutation is seeded by cfg.seed.
DataSplit split_dataset(const Dataset& ds, const RunConfig& cfg);
DataSplit split_dataset(std::size_t n, std::uint64_t seed);

struct ScalerParams {
    std::vector<double> feature_mean;
    std::vector<double> feature_scale;
    double response_mean = 0.0;
    double response_scale = 1.0;

    std::vector<double> transform_row(std::span<const double> x) const;
    double transform_response(double y) const { return (y - response_mean) / response_scale; }
    double inverse_response(double z) const { return z * response_scale + response_mean; }

    Dataset transform(const Dataset& ds) const;
    Dataset inverse_transform(const Dataset& ds) const;
};

/// Zero mean / unit sample standard deviation (n-1 denominator) per column,
/// statistics taken from `fit_rows` only. Constant columns get scale 1.
std::pair<Dataset, ScalerParams> standardize(const Dataset& ds, std::span<const Index> fit_rows);

}  // namespace cuqr
