#include "cuqr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "cuqr/error.hpp"

namespace cuqr {
namespace {

// RFC-4180 record splitter. Returns false at end of input.
bool next_record(std::string_view text, std::size_t& pos, std::vector<std::string>& fields) {
    fields.clear();
    if (pos >= text.size()) return false;
    std::string field;
    bool quoted = false;
    while (pos < text.size()) {
        char c = text[pos];
        if (quoted) {
            if (c == '"') {
                if (pos + 1 < text.size() && text[pos + 1] == '"') {
                    field.push_back('"');
                    pos += 2;
                    continue;
                }
                quoted = false;
            } else {
                field.push_back(c);
            }
            ++pos;
            continue;
        }
        if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\r' || c == '\n') {
            ++pos;
            if (c == '\r' && pos < text.size() && text[pos] == '\n') ++pos;
            fields.push_back(std::move(field));
            return true;
        } else {
            field.push_back(c);
        }
        ++pos;
    }
    if (quoted) fail(ErrorCode::NonNumericCell, "unterminated quoted field");
    fields.push_back(std::move(field));
    return true;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

bool parse_finite(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool blank(const std::vector<std::string>& fields) {
    return fields.size() == 1 && trim(fields[0]).empty();
}

}  // namespace

NumericTable parse_numeric_csv(std::string_view text) {
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    NumericTable table;
    std::size_t pos = 0;
    std::vector<std::string> fields;
    if (!next_record(text, pos, fields) || blank(fields)) fail(ErrorCode::EmptyFile, "CSV has no header row");
    for (auto& f : fields) table.header.emplace_back(trim(f));

    std::size_t row = 0;
    while (next_record(text, pos, fields)) {
        if (blank(fields)) continue;
        ++row;
        if (fields.size() != table.header.size()) {
            fail(ErrorCode::NonNumericCell, "row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                                                " cells, expected " + std::to_string(table.header.size()));
        }
        std::vector<double> values(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (!parse_finite(fields[c], values[c])) {
                fail(ErrorCode::NonNumericCell, "row " + std::to_string(row) + ", column '" + table.header[c] +
                                                    "': cannot parse '" + fields[c] + "' as a finite number");
            }
        }
        table.rows.push_back(std::move(values));
    }
    if (table.rows.empty()) fail(ErrorCode::EmptyFile, "CSV has no data rows");
    return table;
}

NumericTable read_numeric_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    if (text.empty()) fail(ErrorCode::EmptyFile, "'" + path.string() + "' is empty");
    return parse_numeric_csv(text);
}

Dataset load_csv(const std::filesystem::path& path, const std::string& response_column) {
    NumericTable table = read_numeric_csv(path);
    auto it = std::find(table.header.begin(), table.header.end(), response_column);
    if (it == table.header.end()) {
        fail(ErrorCode::MissingColumn, "column '" + response_column + "' not found in '" + path.string() + "'");
    }
    const auto target = static_cast<std::size_t>(it - table.header.begin());
    const std::size_t n = table.rows.size();
    const std::size_t d = table.header.size() - 1;

    std::vector<std::string> names;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c != target) names.push_back(table.header[c]);
    }
    Matrix x(n, d);
    std::vector<double> y(n);
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t j = 0;
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            if (c == target) {
                y[r] = table.rows[r][c];
            } else {
                x(r, j++) = table.rows[r][c];
            }
        }
    }
    return Dataset(std::move(x), std::move(y), std::move(names), response_column);
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string to_csv(const Dataset& ds) {
    std::string out;
    for (const auto& name : ds.column_names()) {
        out += name;
        out += ',';
    }
    out += ds.response_name();
    out += '\n';
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (double v : ds.x(i)) {
            out += format_double(v);
            out += ',';
        }
        out += format_double(ds.y(i));
        out += '\n';
    }
    return out;
}

DataSplit split_dataset(std::size_t n, std::uint64_t seed) {
    if (n < 8) fail(ErrorCode::TooFewRows, "need at least 8 rows to split, got " + std::to_string(n));
    const auto n_train = static_cast<std::size_t>(std::lround(0.425 * static_cast<double>(n)));
    const auto n_test = static_cast<std::size_t>(std::lround(0.15 * static_cast<double>(n)));
    const std::size_t pool = n - n_train - n_test;
    const std::size_t n_cal1 = (pool + 1) / 2;

    IndexSet perm(n);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    auto take = [&](std::size_t from, std::size_t count) {
        IndexSet part(perm.begin() + static_cast<std::ptrdiff_t>(from),
                      perm.begin() + static_cast<std::ptrdiff_t>(from + count));
        std::sort(part.begin(), part.end());
        return part;
    };
    DataSplit split;
    split.train = take(0, n_train);
    split.cal1 = take(n_train, n_cal1);
    split.cal2 = take(n_train + n_cal1, pool - n_cal1);
    split.test = take(n_train + pool, n_test);
    split.validate(n);
    return split;
}

DataSplit split_dataset(const Dataset& ds, const RunConfig& cfg) { return split_dataset(ds.n(), cfg.seed); }

std::vector<double> ScalerParams::transform_row(std::span<const double> x) const {
    if (x.size() != feature_mean.size()) fail(ErrorCode::DimensionMismatch, "row width does not match scaler");
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - feature_mean[j]) / feature_scale[j];
    return out;
}

Dataset ScalerParams::transform(const Dataset& ds) const {
    if (ds.d() != feature_mean.size()) fail(ErrorCode::DimensionMismatch, "dataset width does not match scaler");
    Matrix x(ds.n(), ds.d());
    std::vector<double> y(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t j = 0; j < ds.d(); ++j) x(i, j) = (ds.features()(i, j) - feature_mean[j]) / feature_scale[j];
        y[i] = transform_response(ds.y(i));
    }
    return Dataset(std::move(x), std::move(y), ds.column_names(), ds.response_name());
}

Dataset ScalerParams::inverse_transform(const Dataset& ds) const {
    if (ds.d() != feature_mean.size()) fail(ErrorCode::DimensionMismatch, "dataset width does not match scaler");
    Matrix x(ds.n(), ds.d());
    std::vector<double> y(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t j = 0; j < ds.d(); ++j) x(i, j) = ds.features()(i, j) * feature_scale[j] + feature_mean[j];
        y[i] = inverse_response(ds.y(i));
    }
    return Dataset(std::move(x), std::move(y), ds.column_names(), ds.response_name());
}

namespace {

std::pair<double, double> mean_and_scale(std::span<const double> v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    return {m, sd > 0.0 ? sd : 1.0};
}

}  // namespace

std::pair<Dataset, ScalerParams> standardize(const Dataset& ds, std::span<const Index> fit_rows) {
    if (fit_rows.size() < 2) fail(ErrorCode::TooFewRows, "standardization needs at least 2 rows");
    ScalerParams params;
    std::vector<double> col(fit_rows.size());
    for (std::size_t j = 0; j < ds.d(); ++j) {
        for (std::size_t i = 0; i < fit_rows.size(); ++i) col[i] = ds.features()(fit_rows[i], j);
        auto [m, s] = mean_and_scale(col);
        params.feature_mean.push_back(m);
        params.feature_scale.push_back(s);
    }
    for (std::size_t i = 0; i < fit_rows.size(); ++i) col[i] = ds.y(fit_rows[i]);
    std::tie(params.response_mean, params.response_scale) = mean_and_scale(col);
    Dataset out = params.transform(ds);
    return {std::move(out), std::move(params)};
}

}  // namespace cuqr
