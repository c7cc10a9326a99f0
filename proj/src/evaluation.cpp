#include "cuqr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cuqr/data.hpp"
#include "cuqr/error.hpp"
#include "cuqr/numerics.hpp"
#include "cuqr/pipeline.hpp"

namespace cuqr {

void SyntheticSpec::validate() const {
    if (n < 1) fail(ErrorCode::InvalidArgument, "synthetic n must be >= 1");
    if (d < 1) fail(ErrorCode::InvalidArgument, "synthetic d must be >= 1");
    if (!(noise_base > 0.0) || !std::isfinite(noise_base)) fail(ErrorCode::InvalidArgument, "noise_base must be > 0");
    if (!(noise_slope >= 0.0) || !std::isfinite(noise_slope)) {
        fail(ErrorCode::InvalidArgument, "noise_slope must be >= 0");
    }
}

Dataset generate(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    Matrix x(spec.n, spec.d);
    std::vector<double> y(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        for (std::size_t j = 0; j < spec.d; ++j) x(i, j) = unit(rng);
        y[i] = 5.0 * x(i, 0) + spec.noise_scale(x(i, 0)) * noise(rng);
    }
    std::vector<std::string> names;
    for (std::size_t j = 0; j < spec.d; ++j) names.push_back("x" + std::to_string(j + 1));
    return Dataset(std::move(x), std::move(y), std::move(names), "y");
}

double oracle_quantile(const SyntheticSpec& spec, std::span<const double> x, double q) {
    if (x.empty()) fail(ErrorCode::DimensionMismatch, "oracle needs at least x1");
    return 5.0 * x[0] + spec.noise_scale(x[0]) * normal_quantile(q);
}

nlohmann::json spec_to_json(const SyntheticSpec& spec) {
    return {{"generator", "heteroscedastic-linear"},
            {"n", spec.n},
            {"d", spec.d},
            {"noise_base", spec.noise_base},
            {"noise_slope", spec.noise_slope},
            {"seed", spec.seed}};
}

namespace {

// Incremental mean: exact for constant input.
struct RunningMean {
    double value = 0.0;
    std::size_t count = 0;
    void add(double x) {
        ++count;
        value += (x - value) / static_cast<double>(count);
    }
};

double population_sd(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    RunningMean m;
    for (double x : v) m.add(x);
    double ss = 0.0;
    for (double x : v) ss += (x - m.value) * (x - m.value);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace

EvaluationReport evaluate(const CalibratedPredictor& cp, const Matrix& x_test, std::span<const double> y_test,
                          const SubgroupPartition& partition) {
    if (x_test.rows() == 0) fail(ErrorCode::EmptyTestSet, "test set is empty");
    if (x_test.rows() != y_test.size()) fail(ErrorCode::DimensionMismatch, "test rows and responses differ in length");

    const auto G = static_cast<std::size_t>(partition.G());
    std::vector<std::size_t> count(G, 0), covered(G, 0);
    std::vector<RunningMean> length(G), error(G);
    std::size_t covered_total = 0;
    RunningMean length_total;
    for (std::size_t i = 0; i < x_test.rows(); ++i) {
        const PredictionResult p = cp.predict(x_test.row(i));
        const auto g = static_cast<std::size_t>(partition.assign(x_test.row(i)));
        const bool hit = p.interval.contains(y_test[i]);
        ++count[g];
        covered[g] += hit ? 1 : 0;
        covered_total += hit ? 1 : 0;
        length[g].add(2.0 * p.half_width);
        length_total.add(2.0 * p.half_width);
        error[g].add(std::abs(p.y_hat - y_test[i]));
    }

    EvaluationReport r;
    r.method = std::string(to_string(cp.method()));
    r.n_test = x_test.rows();
    r.c_av = static_cast<double>(covered_total) / static_cast<double>(r.n_test);
    r.l_av = length_total.value;
    r.alpha = cp.alpha();
    r.lambda = cp.lambda();
    r.G = partition.G();
    r.c_wc = 1.0;
    std::vector<double> coverages;
    for (std::size_t g = 0; g < G; ++g) {
        if (count[g] == 0) continue;
        SubgroupMetrics m;
        m.g = static_cast<int>(g);
        m.n_test = count[g];
        m.coverage = static_cast<double>(covered[g]) / static_cast<double>(count[g]);
        m.mean_length = length[g].value;
        m.mean_abs_error = error[g].value;
        r.c_wc = std::min(r.c_wc, m.coverage);
        coverages.push_back(m.coverage);
        r.per_subgroup.push_back(m);
    }
    r.coverage_dispersion = population_sd(coverages);

    std::vector<std::size_t> order(r.per_subgroup.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return r.per_subgroup[a].mean_abs_error < r.per_subgroup[b].mean_abs_error;
    });
    for (std::size_t rank = 0; rank < order.size(); ++rank) r.per_subgroup[order[rank]].error_rank = static_cast<int>(rank);
    return r;
}

nlohmann::json EvaluationReport::to_json() const {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& m : per_subgroup) {
        groups.push_back({{"g", m.g},
                          {"n_test", m.n_test},
                          {"coverage", m.coverage},
                          {"mean_length", m.mean_length},
                          {"mean_abs_error", m.mean_abs_error},
                          {"error_rank", m.error_rank}});
    }
    return {{"method", method},
            {"alpha", alpha},
            {"lambda", lambda},
            {"G", G},
            {"n_test", n_test},
            {"c_av", c_av},
            {"l_av", l_av},
            {"c_wc", c_wc},
            {"coverage_dispersion", coverage_dispersion},
            {"per_subgroup", std::move(groups)}};
}

std::string EvaluationReport::subgroup_csv() const {
    std::vector<const SubgroupMetrics*> rows;
    for (const auto& m : per_subgroup) rows.push_back(&m);
    std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->error_rank < b->error_rank; });
    std::string out = "error_rank,g,n_test,coverage,mean_length,mean_abs_error\n";
    for (const auto* m : rows) {
        out += std::to_string(m->error_rank) + ',' + std::to_string(m->g) + ',' + std::to_string(m->n_test) + ',' +
               format_double(m->coverage) + ',' + format_double(m->mean_length) + ',' +
               format_double(m->mean_abs_error) + '\n';
    }
    return out;
}

AuditTable adaptivity_audit(const CalibratedPredictor& cp, const Matrix& x_test, std::span<const double> y_test,
                            const SubgroupPartition& audit_partition) {
    if (x_test.rows() != y_test.size()) fail(ErrorCode::DimensionMismatch, "test rows and responses differ in length");
    const auto G = static_cast<std::size_t>(audit_partition.G());
    std::vector<RunningMean> length(G), error(G);
    for (std::size_t i = 0; i < x_test.rows(); ++i) {
        const PredictionResult p = cp.predict(x_test.row(i));
        const auto g = static_cast<std::size_t>(audit_partition.assign(x_test.row(i)));
        length[g].add(2.0 * p.half_width);
        error[g].add(std::abs(p.y_hat - y_test[i]));
    }
    AuditTable table;
    std::vector<double> lengths, errors;
    for (std::size_t g = 0; g < G; ++g) {
        if (length[g].count == 0) continue;
        table.rows.push_back({static_cast<int>(g), length[g].count, length[g].value, error[g].value});
        lengths.push_back(length[g].value);
        errors.push_back(error[g].value);
    }
    const double sd = population_sd(lengths);
    table.length_variance = sd * sd;
    table.degenerate = table.length_variance == 0.0;
    table.spearman = table.degenerate ? 0.0 : spearman(lengths, errors);
    return table;
}

nlohmann::json AuditTable::to_json() const {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& r : rows) {
        groups.push_back(
            {{"g", r.g}, {"n", r.n}, {"mean_length", r.mean_length}, {"mean_abs_error", r.mean_abs_error}});
    }
    return {{"spearman", spearman},
            {"length_variance", length_variance},
            {"degenerate", degenerate},
            {"subgroups", std::move(groups)}};
}

std::string AuditTable::csv() const {
    std::string out = "g,n,mean_length,mean_abs_error\n";
    for (const auto& r : rows) {
        out += std::to_string(r.g) + ',' + std::to_string(r.n) + ',' + format_double(r.mean_length) + ',' +
               format_double(r.mean_abs_error) + '\n';
    }
    return out;
}

std::vector<SweepCell> g_sweep(const Dataset& raw, const RunConfig& cfg, Method method,
                               const std::vector<int>& G_values) {
    const PreparedData data = prepare(raw, cfg);
    for (int G : G_values) {
        if (G < 1 || static_cast<std::size_t>(G) > data.train.n()) {
            fail(ErrorCode::InvalidArgument, "sweep G = " + std::to_string(G) + " outside 1..n_train");
        }
    }
    const BaseFit base = fit_base(data, cfg, method == Method::cuqr || method == Method::cuqr_pac);
    std::vector<SweepCell> cells;
    for (int G : G_values) {
        const SubgroupPartition partition = fit_partition(data, G, cfg.seed);
        const CalibratedPredictor cp = calibrate(method, data, base, partition, cfg);
        cells.push_back({G, evaluate(cp, data.test.features(), data.test.response(), partition)});
    }
    return cells;
}

}  // namespace cuqr
