#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "cuqr/conformal.hpp"
#include "cuqr/config.hpp"
#include "cuqr/partition.hpp"
#include "cuqr/types.hpp"

namespace cuqr {

/// y = 5 x1 + (noise_base + noise_slope x1) eps, x ~ U[0,1]^d, eps ~ N(0,1).
struct SyntheticSpec {
    std::size_t n = 1000;
    std::size_t d = 3;
    double noise_base = 0.5;
    double noise_slope = 2.0;
    std::uint64_t seed = 0;

    void validate() const;
    double noise_scale(double x1) const { return noise_base + noise_slope * x1; }
};

Dataset generate(const SyntheticSpec& spec);

/// Conditional level-q quantile of y given x (raw units).
double oracle_quantile(const SyntheticSpec& spec, std::span<const double> x, double q);

nlohmann::json spec_to_json(const SyntheticSpec& spec);

struct SubgroupMetrics {
    int g = 0;
    std::size_t n_test = 0;
    double coverage = 0.0;
    double mean_length = 0.0;
    double mean_abs_error = 0.0;
    // Position when subgroups are sorted by mean_abs_error ascending.
    int error_rank = 0;
};

struct EvaluationReport {
    std::string method;
    double c_av = 0.0;
    double l_av = 0.0;
    double c_wc = 0.0;
    // Standard deviation of coverage across populated subgroups.
    double coverage_dispersion = 0.0;
    std::size_t n_test = 0;
    double alpha = 0.0;
    double lambda = 0.0;
    int G = 0;
    std::vector<SubgroupMetrics> per_subgroup;  // populated subgroups only, ordered by g

    nlohmann::json to_json() const;
    // One row per subgroup, in error_rank order.
    std::string subgroup_csv() const;
};

/// Coverage and length of cp's intervals on a test set in standardized
/// units, grouped by `partition`. Throws EmptyTestSet.
EvaluationReport evaluate(const CalibratedPredictor& cp, const Matrix& x_test, std::span<const double> y_test,
                          const SubgroupPartition& partition);

struct AuditRow {
    int g = 0;
    std::size_t n = 0;
    double mean_length = 0.0;
    double mean_abs_error = 0.0;
};

struct AuditTable {
    std::vector<AuditRow> rows;
    double spearman = 0.0;
    double length_variance = 0.0;
    // Lengths identical across audit subgroups: correlation undefined,
    // reported as 0.
    bool degenerate = false;

    nlohmann::json to_json() const;
    std::string csv() const;
};

AuditTable adaptivity_audit(const CalibratedPredictor& cp, const Matrix& x_test, std::span<const double> y_test,
                            const SubgroupPartition& audit_partition);

struct SweepCell {
    int G = 0;
    EvaluationReport report;
};

/// One fit-calibrate-evaluate cycle per G with a shared seed. The base
/// model and RIF model do not depend on G and are fitted once.
std::vector<SweepCell> g_sweep(const Dataset& raw, const RunConfig& cfg, Method method,
                               const std::vector<int>& G_values);

}  // namespace cuqr
