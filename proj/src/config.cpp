#include "cuqr/config.hpp"

#include <cmath>

#include "cuqr/error.hpp"

namespace cuqr {

void GbtParams::validate() const {
    if (n_trees < 1) fail(ErrorCode::InvalidArgument, "n_trees must be >= 1");
    if (max_depth < 1) fail(ErrorCode::InvalidArgument, "max_depth must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
        fail(ErrorCode::InvalidArgument, "learning_rate must lie in (0, 1]");
    }
    if (min_leaf < 1) fail(ErrorCode::InvalidArgument, "min_leaf must be >= 1");
}

std::string_view to_string(BaseModel m) { return m == BaseModel::gbt ? "gbt" : "knn"; }

BaseModel parse_base_model(std::string_view s) {
    if (s == "gbt") return BaseModel::gbt;
    if (s == "knn") return BaseModel::knn;
    fail(ErrorCode::InvalidArgument, "unknown base model '" + std::string(s) + "'");
}

void RunConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
    if (G < 1) fail(ErrorCode::InvalidArgument, "G must be >= 1");
    if (K < 2) fail(ErrorCode::InvalidArgument, "K must be >= 2");
    if (!(pac_confidence > 0.0 && pac_confidence < 1.0)) {
        fail(ErrorCode::InvalidArgument, "pac_confidence must lie in (0, 1)");
    }
    if (n_min < 1) fail(ErrorCode::InvalidArgument, "n_min must be >= 1");
    if (!(density_floor > 0.0) || !std::isfinite(density_floor)) {
        fail(ErrorCode::InvalidArgument, "density_floor must be positive");
    }
    if (knn_k < 1) fail(ErrorCode::InvalidArgument, "knn_k must be >= 1");
    mu_params.validate();
    index_params.validate();
}

}  // namespace cuqr
