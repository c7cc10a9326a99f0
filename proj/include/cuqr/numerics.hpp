#pragma once

#include <span>
#include <vector>

namespace cuqr {

/// ceil(q * n)-th smallest element (1-indexed order statistic), no
/// interpolation. q is clamped into (0, 1]; q = 1 returns the maximum.
double empirical_quantile(std::span<const double> v, double q);
// Same, for input already sorted ascending.
double sorted_quantile(std::span<const double> sorted, double q);

/// Split-conformal quantile: level (1 - alpha)(1 + 1/n), clamped to the
/// maximum score once the level reaches 1.
double conformal_quantile(std::span<const double> scores, double alpha);

double sample_sd(std::span<const double> v);

/// Gaussian kernel density estimate in one dimension.
class Kde1d {
public:
    // Explicit bandwidth. The density floor is `density_floor / sd(samples)`
    // (sd taken as 1 when fewer than two samples or zero spread).
    Kde1d(std::vector<double> samples, double bandwidth, double density_floor = 1e-6);

    double bandwidth() const noexcept { return bandwidth_; }
    const std::vector<double>& samples() const noexcept { return samples_; }
    double floor() const noexcept { return floor_; }

    // Floored estimate; always >= floor().
    double density(double x) const;
    double raw_density(double x) const;

private:
    std::vector<double> samples_;
    double bandwidth_;
    double floor_;
};

/// Silverman bandwidth h = 0.9 min(sd, IQR/1.34) n^(-1/5), falling back to
/// 1e-3 max(1, |mean|) when that is zero.
double silverman_bandwidth(std::span<const double> samples);

Kde1d kde_fit(std::span<const double> samples, double density_floor = 1e-6);

inline double kde_density(const Kde1d& k, double x) { return k.density(x); }

/// Smallest lambda with 1 - 2 exp(-2 lambda^2) >= confidence, floored at
/// sqrt(ln 2 / 2).
double dkw_lambda(double confidence);

/// min(1, (1 - alpha) + lambda / sqrt(n_g)).
double pac_target(double alpha, std::size_t n_g, double lambda);

/// Standard normal quantile (Acklam's rational approximation plus one
/// Halley step).
double normal_quantile(double p);

/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either input has zero variance.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace cuqr
