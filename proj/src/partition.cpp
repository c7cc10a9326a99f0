#include "cuqr/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>

#include "cuqr/error.hpp"

namespace cuqr {
namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return s;
}

// Nearest centroid and its squared distance; ties to the lowest index.
std::pair<int, double> nearest(const Matrix& centroids, std::span<const double> x) {
    int best = 0;
    double best_d = squared_distance(centroids.row(0), x);
    for (std::size_t g = 1; g < centroids.rows(); ++g) {
        const double d = squared_distance(centroids.row(g), x);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(g);
        }
    }
    return {best, best_d};
}

Matrix plus_plus_seed(const Matrix& x, int G, std::mt19937_64& rng) {
    const std::size_t n = x.rows();
    Matrix centroids(static_cast<std::size_t>(G), x.cols());
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto place = [&](std::size_t g, std::size_t i) { std::ranges::copy(x.row(i), centroids.row(g).begin()); };
    place(0, first(rng));
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x.row(i), centroids.row(0));

    for (std::size_t g = 1; g < static_cast<std::size_t>(G); ++g) {
        double total = 0.0;
        for (double v : d2) total += v;
        if (!(total > 0.0)) fail(ErrorCode::TooFewPoints, "fewer distinct points than subgroups");
        const double target = unit(rng) * total;
        double acc = 0.0;
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (d2[i] <= 0.0) continue;
            acc += d2[i];
            pick = i;
            if (acc > target) break;
        }
        place(g, pick);
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(x.row(i), centroids.row(g)));
    }
    return centroids;
}

struct LloydResult {
    Matrix centroids;
    double inertia;
};

LloydResult lloyd(const Matrix& x, Matrix centroids, const KmeansOptions& opts, std::vector<double>* trace) {
    const std::size_t n = x.rows();
    const std::size_t G = centroids.rows();
    const std::size_t d = x.cols();
    std::vector<int> label(n);
    std::vector<double> dist(n);

    auto assign_step = [&]() {
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto [g, dd] = nearest(centroids, x.row(i));
            label[i] = g;
            dist[i] = dd;
            inertia += dd;
        }
        return inertia;
    };

    double inertia = assign_step();
    if (trace) trace->push_back(inertia);
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        Matrix next(G, d);
        std::vector<std::size_t> count(G, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto g = static_cast<std::size_t>(label[i]);
            auto row = next.row(g);
            const auto xi = x.row(i);
            for (std::size_t j = 0; j < d; ++j) row[j] += xi[j];
            ++count[g];
        }
        std::vector<bool> taken(n, false);
        for (std::size_t g = 0; g < G; ++g) {
            if (count[g] > 0) {
                for (double& v : next.row(g)) v /= static_cast<double>(count[g]);
                continue;
            }
            // Empty cluster: move it onto the point farthest from its centroid.
            std::size_t far = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (!taken[i] && (far == n || dist[i] > dist[far])) far = i;
            }
            taken[far] = true;
            dist[far] = 0.0;
            std::ranges::copy(x.row(far), next.row(g).begin());
        }
        double shift = 0.0;
        for (std::size_t g = 0; g < G; ++g) shift = std::max(shift, std::sqrt(squared_distance(next.row(g), centroids.row(g))));
        centroids = std::move(next);
        inertia = assign_step();
        if (trace) trace->push_back(inertia);
        if (shift < opts.tolerance) break;
    }
    return {std::move(centroids), inertia};
}

}  // namespace

SubgroupPartition::SubgroupPartition(Matrix centroids, std::uint64_t seed, double inertia)
    : centroids_(std::move(centroids)), seed_(seed), inertia_(inertia) {
    if (centroids_.rows() == 0 || centroids_.cols() == 0) {
        fail(ErrorCode::InvalidArgument, "partition needs at least one centroid");
    }
    for (std::size_t a = 0; a < centroids_.rows(); ++a) {
        for (std::size_t b = a + 1; b < centroids_.rows(); ++b) {
            if (std::ranges::equal(centroids_.row(a), centroids_.row(b))) {
                fail(ErrorCode::InvalidArgument, "partition centroids must be distinct");
            }
        }
    }
}

int SubgroupPartition::assign(std::span<const double> x) const {
    if (x.size() != centroids_.cols()) {
        fail(ErrorCode::DimensionMismatch, "row has " + std::to_string(x.size()) + " features, partition expects " +
                                               std::to_string(centroids_.cols()));
    }
    return nearest(centroids_, x).first;
}

std::vector<int> SubgroupPartition::assign_all(const Matrix& x) const {
    std::vector<int> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = assign(x.row(i));
    return out;
}

nlohmann::json SubgroupPartition::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t g = 0; g < centroids_.rows(); ++g) {
        const auto r = centroids_.row(g);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return {{"G", G()}, {"seed", seed_}, {"inertia", inertia_}, {"centroids", std::move(rows)}};
}

SubgroupPartition SubgroupPartition::from_json(const nlohmann::json& j) {
    const auto rows = j.at("centroids").get<std::vector<std::vector<double>>>();
    if (rows.empty() || static_cast<int>(rows.size()) != j.at("G").get<int>()) {
        fail(ErrorCode::InvalidModel, "centroid count does not match G");
    }
    std::vector<double> values;
    for (const auto& r : rows) {
        if (r.size() != rows.front().size()) fail(ErrorCode::InvalidModel, "ragged centroid matrix");
        values.insert(values.end(), r.begin(), r.end());
    }
    return SubgroupPartition(Matrix(rows.size(), rows.front().size(), std::move(values)),
                             j.at("seed").get<std::uint64_t>(), j.at("inertia").get<double>());
}

SubgroupPartition kmeans_fit(const Matrix& x, int G, std::uint64_t seed, const KmeansOptions& opts,
                             KmeansTrace* trace) {
    if (G < 1) fail(ErrorCode::InvalidArgument, "G must be >= 1");
    if (x.rows() < static_cast<std::size_t>(G)) {
        fail(ErrorCode::TooFewPoints, "k-means needs at least G = " + std::to_string(G) + " points, got " +
                                          std::to_string(x.rows()));
    }
    std::mt19937_64 rng(seed);
    if (trace) trace->inertia.clear();
    std::optional<LloydResult> best;
    for (int r = 0; r < std::max(1, opts.restarts); ++r) {
        std::vector<double>* t = nullptr;
        if (trace) t = &trace->inertia.emplace_back();
        LloydResult run = lloyd(x, plus_plus_seed(x, G, rng), opts, t);
        if (!best || run.inertia < best->inertia) best = std::move(run);
    }
    return SubgroupPartition(std::move(best->centroids), seed, best->inertia);
}

}  // namespace cuqr
