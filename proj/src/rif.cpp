#include "cuqr/rif.hpp"

#include <algorithm>
#include <cmath>

#include "cuqr/error.hpp"

namespace cuqr {

std::vector<double> residuals(const Regressor& model, const Matrix& x, std::span<const double> y) {
    if (x.rows() != y.size()) fail(ErrorCode::DimensionMismatch, "feature rows and responses differ in length");
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = std::abs(model.predict(x.row(i)) - y[i]);
    return out;
}

double influence_function(double e, double alpha, double q, double f) {
    if (!(f > 0.0)) fail(ErrorCode::NonpositiveDensity, "density at the quantile must be positive");
    return (alpha - (e <= q ? 1.0 : 0.0)) / f;
}

std::vector<double> enforce_monotonicity(std::vector<double> f_hat) {
    for (std::size_t k = 1; k < f_hat.size(); ++k) {
        if (f_hat[k] > f_hat[k - 1]) f_hat[k] = f_hat[k - 1];
    }
    return f_hat;
}

RifTargets rif_targets(std::span<const double> residuals, const QuantileGrid& grid, const Kde1d& kde) {
    if (residuals.size() < static_cast<std::size_t>(grid.K())) {
        fail(ErrorCode::TooFewResiduals, "need at least K = " + std::to_string(grid.K()) + " residuals, got " +
                                             std::to_string(residuals.size()));
    }
    std::vector<double> sorted(residuals.begin(), residuals.end());
    std::sort(sorted.begin(), sorted.end());

    RifTargets out;
    const std::size_t m = grid.size();
    out.q_hat.resize(m);
    std::vector<double> density(m);
    for (std::size_t k = 0; k < m; ++k) {
        out.q_hat[k] = sorted_quantile(sorted, grid.levels()[k]);
        density[k] = kde.density(out.q_hat[k]);
    }
    out.f_hat = enforce_monotonicity(std::move(density));

    out.rif = Matrix(residuals.size(), m);
    for (std::size_t i = 0; i < residuals.size(); ++i) {
        for (std::size_t k = 0; k < m; ++k) {
            out.rif(i, k) = out.q_hat[k] + influence_function(residuals[i], grid.levels()[k], out.q_hat[k], out.f_hat[k]);
        }
    }
    return out;
}

std::vector<int> fit_index_targets(std::span<const double> residuals, std::span<const double> q_hat) {
    if (!std::is_sorted(q_hat.begin(), q_hat.end())) fail(ErrorCode::InvalidArgument, "q_hat must be non-decreasing");
    std::vector<int> out(residuals.size());
    for (std::size_t i = 0; i < residuals.size(); ++i) {
        const auto it = std::lower_bound(q_hat.begin(), q_hat.end(), residuals[i]);
        out[i] = static_cast<int>(it - q_hat.begin()) + 1;
    }
    return out;
}

std::vector<double> nested_half_widths(const QuantileGrid& grid, std::span<const double> q_hat,
                                       std::span<const double> f_hat, double index_prediction) {
    const std::size_t m = grid.size();
    if (q_hat.size() != m || f_hat.size() != m) fail(ErrorCode::DimensionMismatch, "band arrays do not match grid");
    std::vector<double> out(m);
    double running = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double below = index_prediction <= static_cast<double>(k + 1) ? 1.0 : 0.0;
        const double rif = q_hat[k] + (grid.levels()[k] - below) / f_hat[k];
        running = std::max(running, std::abs(rif));
        out[k] = running;
    }
    return out;
}

Interval NestedBandFamily::band(int k) const {
    const double w = half_widths.at(static_cast<std::size_t>(k - 1));
    return {center - w, center + w};
}

RifModel::RifModel(QuantileGrid grid, std::vector<double> q_hat, std::vector<double> f_hat,
                   RegressorPtr index_model, double bandwidth)
    : grid_(std::move(grid)),
      q_hat_(std::move(q_hat)),
      f_hat_(std::move(f_hat)),
      index_model_(std::move(index_model)),
      bandwidth_(bandwidth) {
    if (q_hat_.size() != grid_.size() || f_hat_.size() != grid_.size()) {
        fail(ErrorCode::DimensionMismatch, "q_hat and f_hat must have K - 1 entries");
    }
    if (!std::is_sorted(q_hat_.begin(), q_hat_.end())) fail(ErrorCode::InvalidArgument, "q_hat must be non-decreasing");
    for (double f : f_hat_) {
        if (!(f > 0.0) || !std::isfinite(f)) fail(ErrorCode::NonpositiveDensity, "f_hat entries must be positive");
    }
    if (!index_model_) fail(ErrorCode::InvalidArgument, "RIF model needs an index regressor");
}

NestedBandFamily RifModel::predict_bands(const Regressor& mu, std::span<const double> x) const {
    if (x.size() != index_model_->n_features()) fail(ErrorCode::DimensionMismatch, "row width does not match the model");
    return {mu.predict(x), nested_half_widths(grid_, q_hat_, f_hat_, predict_index(x))};
}

nlohmann::json RifModel::to_json() const {
    return {{"K", grid_.K()},
            {"q_hat", q_hat_},
            {"f_hat", f_hat_},
            {"bandwidth", bandwidth_},
            {"index_model", index_model_->to_json()}};
}

RifModel RifModel::from_json(const nlohmann::json& j) {
    return RifModel(QuantileGrid(j.at("K").get<int>()), j.at("q_hat").get<std::vector<double>>(),
                    j.at("f_hat").get<std::vector<double>>(), regressor_from_json(j.at("index_model")),
                    j.at("bandwidth").get<double>());
}

RifModel fit_rif_model(const Regressor& mu, const Matrix& x_cal1, std::span<const double> y_cal1,
                       const QuantileGrid& grid, const RunConfig& cfg) {
    const std::vector<double> e = residuals(mu, x_cal1, y_cal1);
    if (e.size() < static_cast<std::size_t>(grid.K())) {
        fail(ErrorCode::TooFewResiduals, "first calibration half has fewer than K rows");
    }
    const Kde1d kde = kde_fit(e, cfg.density_floor);
    RifTargets targets = rif_targets(e, grid, kde);
    const std::vector<int> k_star = fit_index_targets(e, targets.q_hat);
    const std::vector<double> k_target(k_star.begin(), k_star.end());
    auto index_model =
        std::make_shared<GradientBoostedTrees>(GradientBoostedTrees::fit(x_cal1, k_target, cfg.index_params));
    return RifModel(grid, std::move(targets.q_hat), std::move(targets.f_hat), std::move(index_model), kde.bandwidth());
}

}  // namespace cuqr
