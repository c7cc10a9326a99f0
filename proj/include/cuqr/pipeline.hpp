#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "json.hpp"

#include "cuqr/conformal.hpp"
#include "cuqr/config.hpp"
#include "cuqr/data.hpp"
#include "cuqr/models.hpp"
#include "cuqr/partition.hpp"
#include "cuqr/rif.hpp"

namespace cuqr {

/// Split + train-only standardization of a raw dataset, with the four
/// parts materialized in standardized units.
struct PreparedData {
    DataSplit split;
    ScalerParams scaler;
    Dataset train;
    Dataset cal1;
    Dataset cal2;
    Dataset test;
};

PreparedData prepare(const Dataset& raw, const RunConfig& cfg);

/// mu on the training part and, for the nested methods, the RIF model on
/// cal1. Neither depends on G, so one BaseFit serves every subgroup count.
struct BaseFit {
    RegressorPtr mu;
    std::shared_ptr<const RifModel> rif;
};

BaseFit fit_base(const PreparedData& data, const RunConfig& cfg, bool with_rif = true);

SubgroupPartition fit_partition(const PreparedData& data, int G, std::uint64_t seed);

/// Calibrates `method` on cal2 (split_cp and cq included, so G = 1 cq and
/// split_cp see the same residuals).
CalibratedPredictor calibrate(Method method, const PreparedData& data, const BaseFit& base,
                              const SubgroupPartition& partition, const RunConfig& cfg);

struct DataProvenance {
    std::string source;
    std::string fingerprint;
    std::size_t n = 0;
};

/// Everything needed to predict and evaluate without refitting.
struct FittedModel {
    RunConfig cfg;
    Method method = Method::cuqr;
    std::vector<std::string> columns;
    std::string response;
    ScalerParams scaler;
    DataSplit split;
    DataProvenance data;
    CalibratedPredictor predictor;
};

FittedModel fit_model(const Dataset& raw, Method method, const RunConfig& cfg, DataProvenance provenance = {});

inline constexpr int kModelFormatVersion = 1;

nlohmann::json model_to_json(const FittedModel& model);
FittedModel model_from_json(const nlohmann::json& j);

nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j);

/// FNV-1a 64-bit hash of a file's bytes, as 16 hex digits.
std::string file_fingerprint(const std::filesystem::path& path);

}  // namespace cuqr
