#pragma once

#include <span>
#include <vector>

#include "cuqr/config.hpp"
#include "cuqr/models.hpp"
#include "cuqr/numerics.hpp"
#include "cuqr/types.hpp"

namespace cuqr {

/// |mu(x_i) - y_i| for every row, in row order.
std::vector<double> residuals(const Regressor& model, const Matrix& x, std::span<const double> y);

/// Influence function of the level-alpha quantile at observation e:
/// (alpha - 1{e <= q}) / f. Throws NonpositiveDensity unless f > 0.
double influence_function(double e, double alpha, double q, double f);

/// Left-to-right repair: whenever the density rises from one level to the
/// next, the previous level's value is carried forward.
std::vector<double> enforce_monotonicity(std::vector<double> f_hat);

struct RifTargets {
    std::vector<double> q_hat;  // residual quantile per grid level
    std::vector<double> f_hat;  // repaired density at q_hat
    Matrix rif;                 // n x (K - 1) recentered influence values
};

/// Throws TooFewResiduals when fewer than K residuals are given.
RifTargets rif_targets(std::span<const double> residuals, const QuantileGrid& grid, const Kde1d& kde);

/// k*_i = smallest 1-based k with residual_i <= q_hat[k], or K when the
/// residual exceeds every grid quantile.
std::vector<int> fit_index_targets(std::span<const double> residuals, std::span<const double> q_hat);

/// Half-widths |q_k + (a_k - 1{index <= k}) / f_k| for k = 1..K-1 followed
/// by a running-max clamp, so the result is non-decreasing in k.
std::vector<double> nested_half_widths(const QuantileGrid& grid, std::span<const double> q_hat,
                                       std::span<const double> f_hat, double index_prediction);

/// Candidate intervals center +/- half_widths[k-1], nested in k.
struct NestedBandFamily {
    double center = 0.0;
    std::vector<double> half_widths;

    Interval band(int k) const;
};

class RifModel {
public:
    RifModel(QuantileGrid grid, std::vector<double> q_hat, std::vector<double> f_hat, RegressorPtr index_model,
             double bandwidth);

    const QuantileGrid& grid() const noexcept { return grid_; }
    const std::vector<double>& q_hat() const noexcept { return q_hat_; }
    const std::vector<double>& f_hat() const noexcept { return f_hat_; }
    const Regressor& index_model() const noexcept { return *index_model_; }
    double bandwidth() const noexcept { return bandwidth_; }

    // Raw g_theta(x): regression estimate of the residual's grid index.
    double predict_index(std::span<const double> x) const { return index_model_->predict(x); }

    NestedBandFamily predict_bands(const Regressor& mu, std::span<const double> x) const;

    nlohmann::json to_json() const;
    static RifModel from_json(const nlohmann::json& j);

private:
    QuantileGrid grid_;
    std::vector<double> q_hat_;
    std::vector<double> f_hat_;
    RegressorPtr index_model_;
    double bandwidth_;
};

/// Residual KDE, grid quantiles, repaired densities and the index model,
/// all from the first calibration half.
RifModel fit_rif_model(const Regressor& mu, const Matrix& x_cal1, std::span<const double> y_cal1,
                       const QuantileGrid& grid, const RunConfig& cfg);

}  // namespace cuqr
