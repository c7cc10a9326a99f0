#include "cuqr/conformal.hpp"

#include <algorithm>
#include <cmath>

#include "cuqr/error.hpp"
#include "cuqr/numerics.hpp"

namespace cuqr {

std::string_view to_string(Method m) {
    switch (m) {
    case Method::split_cp: return "split_cp";
    case Method::cuqr: return "cuqr";
    case Method::cuqr_pac: return "cuqr_pac";
    case Method::cq: return "cq";
    }
    return "unknown";
}

Method parse_method(std::string_view s) {
    for (Method m : {Method::split_cp, Method::cuqr, Method::cuqr_pac, Method::cq}) {
        if (s == to_string(m)) return m;
    }
    fail(ErrorCode::InvalidArgument, "unknown method '" + std::string(s) + "'");
}

double nested_score(const NestedBandFamily& bands, const QuantileGrid& grid, double y) {
    if (bands.half_widths.size() != grid.size()) fail(ErrorCode::DimensionMismatch, "band family does not match grid");
    const double dev = std::abs(y - bands.center);
    const auto it = std::lower_bound(bands.half_widths.begin(), bands.half_widths.end(), dev);
    if (it == bands.half_widths.end()) return 1.0;
    return grid.levels()[static_cast<std::size_t>(it - bands.half_widths.begin())];
}

namespace {

bool is_nested_method(Method m) { return m == Method::cuqr || m == Method::cuqr_pac; }

// Quantile level actually requested from n scores for a nominal target.
double conformal_level(double target, std::size_t n) {
    return target * (1.0 + 1.0 / static_cast<double>(n));
}

constexpr double kLevelSlack = 1e-12;

SubgroupCalibration select_band(std::span<const double> scores, const QuantileGrid& grid, double alpha,
                                double lambda) {
    SubgroupCalibration out;
    out.n_g = scores.size();
    out.target_level = lambda > 0.0 ? pac_target(alpha, scores.size(), lambda) : 1.0 - alpha;
    if (conformal_level(out.target_level, scores.size()) >= 1.0 - kLevelSlack) {
        out.score_quantile = 1.0;
        out.level_index = grid.K() - 1;
        out.undercoverage_risk = true;
        return out;
    }
    out.score_quantile = conformal_quantile(scores, 1.0 - out.target_level);
    if (out.score_quantile >= 1.0) {
        out.level_index = grid.K() - 1;
        out.undercoverage_risk = true;
    } else {
        out.level_index = grid.smallest_index_at_least(out.score_quantile);
    }
    return out;
}

SubgroupCalibration select_width(std::span<const double> residuals, double alpha) {
    SubgroupCalibration out;
    out.n_g = residuals.size();
    out.target_level = 1.0 - alpha;
    out.undercoverage_risk = conformal_level(out.target_level, residuals.size()) >= 1.0 - kLevelSlack;
    out.half_width = conformal_quantile(residuals, alpha);
    return out;
}

// Per-subgroup selection with pooled fallback below n_min.
template <class Select>
std::pair<SubgroupCalibration, std::vector<SubgroupCalibration>> per_subgroup(std::span<const double> values,
                                                                                std::span<const int> groups, int G,
                                                                                int n_min, Select select) {
    SubgroupCalibration global = select(values);
    global.g = -1;
    std::vector<std::vector<double>> by_group(static_cast<std::size_t>(G));
    for (std::size_t i = 0; i < values.size(); ++i) by_group[static_cast<std::size_t>(groups[i])].push_back(values[i]);
    std::vector<SubgroupCalibration> out;
    for (int g = 0; g < G; ++g) {
        const auto& v = by_group[static_cast<std::size_t>(g)];
        SubgroupCalibration cal;
        if (v.size() >= static_cast<std::size_t>(n_min)) {
            cal = select(v);
        } else {
            cal = global;
            cal.fallback = true;
            cal.n_g = v.size();
        }
        cal.g = g;
        out.push_back(cal);
    }
    return {global, std::move(out)};
}

void check_calibration(const Matrix& x, std::span<const double> y) {
    if (x.rows() == 0 || y.empty()) fail(ErrorCode::EmptyCalibration, "calibration set is empty");
    if (x.rows() != y.size()) fail(ErrorCode::DimensionMismatch, "calibration rows and responses differ in length");
}

CalibratedPredictor calibrate_nested(Method method, RegressorPtr mu, std::shared_ptr<const RifModel> rif,
                                     const SubgroupPartition& partition, const Matrix& x, std::span<const double> y,
                                     double alpha, double lambda, int n_min) {
    check_calibration(x, y);
    if (!rif) fail(ErrorCode::InvalidArgument, "nested calibration needs a fitted RIF model");
    std::vector<double> scores(x.rows());
    std::vector<int> groups(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        scores[i] = nested_score(rif->predict_bands(*mu, x.row(i)), rif->grid(), y[i]);
        groups[i] = partition.assign(x.row(i));
    }
    auto select = [&](std::span<const double> s) { return select_band(s, rif->grid(), alpha, lambda); };
    auto [global, subgroups] = per_subgroup(scores, groups, partition.G(), n_min, select);
    return CalibratedPredictor(method, std::move(mu), std::move(rif), partition, alpha, lambda, n_min, global,
                               std::move(subgroups));
}

}  // namespace

CalibratedPredictor::CalibratedPredictor(Method method, RegressorPtr mu, std::shared_ptr<const RifModel> rif,
                                         std::optional<SubgroupPartition> partition, double alpha, double lambda,
                                         int n_min, SubgroupCalibration global,
                                         std::vector<SubgroupCalibration> subgroups)
    : method_(method),
      mu_(std::move(mu)),
      rif_(std::move(rif)),
      partition_(std::move(partition)),
      alpha_(alpha),
      lambda_(lambda),
      n_min_(n_min),
      global_(global),
      subgroups_(std::move(subgroups)) {
    if (!mu_) fail(ErrorCode::InvalidArgument, "predictor needs a base model");
    if (is_nested_method(method_) && !rif_) fail(ErrorCode::InvalidArgument, "nested methods need a RIF model");
    const int expected = partition_ ? partition_->G() : 1;
    if (static_cast<int>(subgroups_.size()) != expected) {
        fail(ErrorCode::InvalidModel, "subgroup calibration count does not match the partition");
    }
    if (is_nested_method(method_)) {
        for (const auto& s : subgroups_) {
            if (s.level_index < 1 || s.level_index > rif_->grid().K() - 1) {
                fail(ErrorCode::InvalidModel, "selected level index outside 1..K-1");
            }
        }
    }
}

int CalibratedPredictor::subgroup_of(std::span<const double> x) const {
    if (x.size() != mu_->n_features()) fail(ErrorCode::DimensionMismatch, "row width does not match the model");
    return partition_ ? partition_->assign(x) : 0;
}

PredictionResult CalibratedPredictor::predict(std::span<const double> x) const {
    PredictionResult out;
    out.subgroup = subgroup_of(x);
    const SubgroupCalibration& sel = subgroups_[static_cast<std::size_t>(out.subgroup)];
    double half_width = sel.half_width;
    if (is_nested_method(method_)) {
        const NestedBandFamily bands = rif_->predict_bands(*mu_, x);
        out.y_hat = bands.center;
        half_width = bands.half_widths[static_cast<std::size_t>(sel.level_index - 1)];
    } else {
        out.y_hat = mu_->predict(x);
    }
    out.half_width = half_width;
    out.interval = Interval(out.y_hat - half_width, out.y_hat + half_width);
    if (partition_) {
        const auto c = partition_->centroid(out.subgroup);
        out.subgroup_centroid.assign(c.begin(), c.end());
    }
    out.guarantee = {alpha_, sel.n_g, lambda_};
    out.fallback = sel.fallback;
    out.undercoverage_risk = sel.undercoverage_risk;
    return out;
}

std::vector<PredictionResult> CalibratedPredictor::predict_all(const Matrix& x) const {
    std::vector<PredictionResult> out;
    out.reserve(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out.push_back(predict(x.row(i)));
    return out;
}

namespace {

nlohmann::json calibration_json(const SubgroupCalibration& s) {
    return {{"g", s.g},
            {"n_g", s.n_g},
            {"fallback", s.fallback},
            {"undercoverage_risk", s.undercoverage_risk},
            {"target_level", s.target_level},
            {"score_quantile", s.score_quantile},
            {"level_index", s.level_index},
            {"half_width", s.half_width}};
}

SubgroupCalibration calibration_from_json(const nlohmann::json& j) {
    SubgroupCalibration s;
    s.g = j.at("g").get<int>();
    s.n_g = j.at("n_g").get<std::size_t>();
    s.fallback = j.at("fallback").get<bool>();
    s.undercoverage_risk = j.at("undercoverage_risk").get<bool>();
    s.target_level = j.at("target_level").get<double>();
    s.score_quantile = j.at("score_quantile").get<double>();
    s.level_index = j.at("level_index").get<int>();
    s.half_width = j.at("half_width").get<double>();
    return s;
}

}  // namespace

nlohmann::json CalibratedPredictor::to_json() const {
    nlohmann::json subgroups = nlohmann::json::array();
    for (const auto& s : subgroups_) subgroups.push_back(calibration_json(s));
    return {{"method", to_string(method_)},
            {"alpha", alpha_},
            {"lambda", lambda_},
            {"n_min", n_min_},
            {"mu", mu_->to_json()},
            {"rif", rif_ ? rif_->to_json() : nlohmann::json(nullptr)},
            {"partition", partition_ ? partition_->to_json() : nlohmann::json(nullptr)},
            {"global", calibration_json(global_)},
            {"subgroups", std::move(subgroups)}};
}

CalibratedPredictor CalibratedPredictor::from_json(const nlohmann::json& j) {
    try {
        std::shared_ptr<const RifModel> rif;
        if (!j.at("rif").is_null()) rif = std::make_shared<RifModel>(RifModel::from_json(j.at("rif")));
        std::optional<SubgroupPartition> partition;
        if (!j.at("partition").is_null()) partition = SubgroupPartition::from_json(j.at("partition"));
        std::vector<SubgroupCalibration> subgroups;
        for (const auto& s : j.at("subgroups")) subgroups.push_back(calibration_from_json(s));
        return CalibratedPredictor(parse_method(j.at("method").get<std::string>()), regressor_from_json(j.at("mu")),
                                   std::move(rif), std::move(partition), j.at("alpha").get<double>(),
                                   j.at("lambda").get<double>(), j.at("n_min").get<int>(),
                                   calibration_from_json(j.at("global")), std::move(subgroups));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidModel, std::string("malformed predictor: ") + e.what());
    }
}

CalibratedPredictor split_cp_calibrate(RegressorPtr mu, const Matrix& x_cal, std::span<const double> y_cal,
                                       double alpha, std::optional<SubgroupPartition> partition) {
    check_calibration(x_cal, y_cal);
    const std::vector<double> res = residuals(*mu, x_cal, y_cal);
    SubgroupCalibration global = select_width(res, alpha);
    global.g = -1;
    std::vector<SubgroupCalibration> subgroups;
    if (partition) {
        std::vector<std::size_t> counts(static_cast<std::size_t>(partition->G()), 0);
        for (std::size_t i = 0; i < x_cal.rows(); ++i) ++counts[static_cast<std::size_t>(partition->assign(x_cal.row(i)))];
        for (int g = 0; g < partition->G(); ++g) {
            SubgroupCalibration s = global;
            s.g = g;
            s.n_g = counts[static_cast<std::size_t>(g)];
            subgroups.push_back(s);
        }
    } else {
        SubgroupCalibration s = global;
        s.g = 0;
        subgroups.push_back(s);
    }
    return CalibratedPredictor(Method::split_cp, std::move(mu), nullptr, std::move(partition), alpha, 0.0, 1, global,
                               std::move(subgroups));
}

CalibratedPredictor cuqr_calibrate(RegressorPtr mu, std::shared_ptr<const RifModel> rif,
                                   const SubgroupPartition& partition, const Matrix& x_cal2,
                                   std::span<const double> y_cal2, double alpha, int n_min) {
    return calibrate_nested(Method::cuqr, std::move(mu), std::move(rif), partition, x_cal2, y_cal2, alpha, 0.0, n_min);
}

CalibratedPredictor cuqr_pac_calibrate(RegressorPtr mu, std::shared_ptr<const RifModel> rif,
                                       const SubgroupPartition& partition, const Matrix& x_cal2,
                                       std::span<const double> y_cal2, double alpha, double pac_confidence,
                                       int n_min) {
    return calibrate_nested(Method::cuqr_pac, std::move(mu), std::move(rif), partition, x_cal2, y_cal2, alpha,
                            dkw_lambda(pac_confidence), n_min);
}

CalibratedPredictor cq_calibrate(RegressorPtr mu, const SubgroupPartition& partition, const Matrix& x_cal2,
                                 std::span<const double> y_cal2, double alpha, int n_min) {
    check_calibration(x_cal2, y_cal2);
    const std::vector<double> res = residuals(*mu, x_cal2, y_cal2);
    const std::vector<int> groups = partition.assign_all(x_cal2);
    auto select = [&](std::span<const double> r) { return select_width(r, alpha); };
    auto [global, subgroups] = per_subgroup(res, groups, partition.G(), n_min, select);
    return CalibratedPredictor(Method::cq, std::move(mu), nullptr, partition, alpha, 0.0, n_min, global,
                               std::move(subgroups));
}

}  // namespace cuqr
