#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cuqr/models.hpp"
#include "cuqr/partition.hpp"
#include "cuqr/rif.hpp"
#include "cuqr/types.hpp"

namespace cuqr {

enum class Method { split_cp, cuqr, cuqr_pac, cq };

std::string_view to_string(Method m);
Method parse_method(std::string_view s);

/// Calibration outcome for one subgroup. Subgroups with fewer than n_min
/// calibration points carry the pooled (global) selection and fallback=true.
struct SubgroupCalibration {
    int g = 0;
    std::size_t n_g = 0;
    bool fallback = false;
    // Selected level could not reach the target: widest band used.
    bool undercoverage_risk = false;
    // Quantile level requested from the calibration scores.
    double target_level = 0.0;
    // cuqr / cuqr_pac: conformal quantile of the nested scores and the
    // selected 1-based grid index k(g). Zero for the fixed-width methods.
    double score_quantile = 0.0;
    int level_index = 0;
    // split_cp / cq: fixed half-width.
    double half_width = 0.0;
};

struct GuaranteeNote {
    double alpha = 0.0;
    std::size_t n_g = 0;
    double lambda = 0.0;
};

struct PredictionResult {
    Interval interval;
    double y_hat = 0.0;
    // Interval length is exactly 2 * half_width.
    double half_width = 0.0;
    int subgroup = 0;
    std::vector<double> subgroup_centroid;
    GuaranteeNote guarantee;
    bool fallback = false;
    bool undercoverage_risk = false;
};

class CalibratedPredictor {
public:
    CalibratedPredictor(Method method, RegressorPtr mu, std::shared_ptr<const RifModel> rif,
                        std::optional<SubgroupPartition> partition, double alpha, double lambda, int n_min,
                        SubgroupCalibration global, std::vector<SubgroupCalibration> subgroups);

    Method method() const noexcept { return method_; }
    const Regressor& mu() const noexcept { return *mu_; }
    const RegressorPtr& mu_ptr() const noexcept { return mu_; }
    const RifModel* rif() const noexcept { return rif_.get(); }
    const std::optional<SubgroupPartition>& partition() const noexcept { return partition_; }
    double alpha() const noexcept { return alpha_; }
    double lambda() const noexcept { return lambda_; }
    int n_min() const noexcept { return n_min_; }
    const SubgroupCalibration& global() const noexcept { return global_; }
    const std::vector<SubgroupCalibration>& subgroups() const noexcept { return subgroups_; }
    int G() const noexcept { return static_cast<int>(subgroups_.size()); }

    int subgroup_of(std::span<const double> x) const;
    // Throws DimensionMismatch when x has the wrong width.
    PredictionResult predict(std::span<const double> x) const;
    std::vector<PredictionResult> predict_all(const Matrix& x) const;

    nlohmann::json to_json() const;
    static CalibratedPredictor from_json(const nlohmann::json& j);

private:
    Method method_;
    RegressorPtr mu_;
    std::shared_ptr<const RifModel> rif_;
    std::optional<SubgroupPartition> partition_;
    double alpha_;
    double lambda_;
    int n_min_;
    SubgroupCalibration global_;
    std::vector<SubgroupCalibration> subgroups_;
};

/// Smallest grid level whose band covers y; 1 when no band does.
double nested_score(const NestedBandFamily& bands, const QuantileGrid& grid, double y);

/// Split conformal: one half-width, the conformal quantile of |mu(x) - y|.
CalibratedPredictor split_cp_calibrate(RegressorPtr mu, const Matrix& x_cal, std::span<const double> y_cal,
                                       double alpha, std::optional<SubgroupPartition> partition = std::nullopt);

CalibratedPredictor cuqr_calibrate(RegressorPtr mu, std::shared_ptr<const RifModel> rif,
                                   const SubgroupPartition& partition, const Matrix& x_cal2,
                                   std::span<const double> y_cal2, double alpha, int n_min = 30);

/// As cuqr_calibrate, with the per-subgroup target level raised to
/// pac_target(alpha, n_g, dkw_lambda(pac_confidence)).
CalibratedPredictor cuqr_pac_calibrate(RegressorPtr mu, std::shared_ptr<const RifModel> rif,
                                       const SubgroupPartition& partition, const Matrix& x_cal2,
                                       std::span<const double> y_cal2, double alpha, double pac_confidence,
                                       int n_min = 30);

/// Fixed half-width per subgroup from the subgroup's own residuals.
CalibratedPredictor cq_calibrate(RegressorPtr mu, const SubgroupPartition& partition, const Matrix& x_cal2,
                                 std::span<const double> y_cal2, double alpha, int n_min = 30);

}  // namespace cuqr
