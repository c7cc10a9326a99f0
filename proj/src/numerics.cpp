#include "cuqr/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "cuqr/error.hpp"

namespace cuqr {

namespace {

// Slack absorbing rounding in q * n when q and n are "nice" (q = k/K).
constexpr double kRankSlack = 1e-9;

std::size_t order_rank(double q, std::size_t n) {
    const double raw = std::ceil(q * static_cast<double>(n) - kRankSlack);
    if (raw < 1.0) return 1;
    if (raw > static_cast<double>(n)) return n;
    return static_cast<std::size_t>(raw);
}

}  // namespace

double sorted_quantile(std::span<const double> sorted, double q) {
    if (sorted.empty()) fail(ErrorCode::EmptyVector, "quantile of an empty vector");
    return sorted[order_rank(q, sorted.size()) - 1];
}

double empirical_quantile(std::span<const double> v, double q) {
    if (v.empty()) fail(ErrorCode::EmptyVector, "quantile of an empty vector");
    std::vector<double> tmp(v.begin(), v.end());
    const std::size_t r = order_rank(q, tmp.size()) - 1;
    std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(r), tmp.end());
    return tmp[r];
}

double conformal_quantile(std::span<const double> scores, double alpha) {
    if (scores.empty()) fail(ErrorCode::EmptyVector, "conformal quantile of an empty score set");
    const double n = static_cast<double>(scores.size());
    const double level = (1.0 - alpha) * (1.0 + 1.0 / n);
    if (level >= 1.0 - 1e-12) return *std::max_element(scores.begin(), scores.end());
    return empirical_quantile(scores, level);
}

double sample_sd(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

Kde1d::Kde1d(std::vector<double> samples, double bandwidth, double density_floor)
    : samples_(std::move(samples)), bandwidth_(bandwidth) {
    if (samples_.empty()) fail(ErrorCode::TooFewSamples, "KDE needs at least one sample");
    if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_)) {
        fail(ErrorCode::InvalidArgument, "KDE bandwidth must be positive");
    }
    std::sort(samples_.begin(), samples_.end());
    const double sd = sample_sd(samples_);
    floor_ = density_floor / (sd > 0.0 ? sd : 1.0);
}

double Kde1d::raw_density(double x) const {
    // Kernels beyond 40 bandwidths contribute < 1e-300 and are skipped.
    const double reach = 40.0 * bandwidth_;
    auto lo = std::lower_bound(samples_.begin(), samples_.end(), x - reach);
    auto hi = std::upper_bound(lo, samples_.end(), x + reach);
    double sum = 0.0;
    for (auto it = lo; it != hi; ++it) {
        const double u = (x - *it) / bandwidth_;
        sum += std::exp(-0.5 * u * u);
    }
    return sum * std::numbers::inv_sqrtpi / std::numbers::sqrt2 /
           (static_cast<double>(samples_.size()) * bandwidth_);
}

double Kde1d::density(double x) const { return std::max(raw_density(x), floor_); }

double silverman_bandwidth(std::span<const double> samples) {
    if (samples.size() < 2) fail(ErrorCode::TooFewSamples, "bandwidth selection needs at least 2 samples");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double sd = sample_sd(sorted);
    const double iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);
    const double n = static_cast<double>(sorted.size());
    const double h = 0.9 * std::min(sd, iqr / 1.34) * std::pow(n, -0.2);
    if (h > 0.0) return h;
    const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
    return 1e-3 * std::max(1.0, std::abs(mean));
}

Kde1d kde_fit(std::span<const double> samples, double density_floor) {
    const double h = silverman_bandwidth(samples);
    return Kde1d(std::vector<double>(samples.begin(), samples.end()), h, density_floor);
}

double dkw_lambda(double confidence) {
    if (!(confidence > 0.0 && confidence < 1.0)) fail(ErrorCode::InvalidArgument, "confidence must lie in (0, 1)");
    const double lambda = std::sqrt(std::log(2.0 / (1.0 - confidence)) / 2.0);
    return std::max(lambda, std::sqrt(std::numbers::ln2 / 2.0));
}

double pac_target(double alpha, std::size_t n_g, double lambda) {
    if (n_g == 0) fail(ErrorCode::InvalidArgument, "pac_target needs n_g >= 1");
    return std::min(1.0, (1.0 - alpha) + lambda / std::sqrt(static_cast<double>(n_g)));
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) fail(ErrorCode::InvalidArgument, "normal quantile needs p in (0, 1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement against the exact CDF.
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) fail(ErrorCode::DimensionMismatch, "spearman inputs differ in length");
    if (a.size() < 2) return 0.0;
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace cuqr
