#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

#include "cuqr/types.hpp"

namespace cuqr {

/// Relevance subgroups as a Voronoi partition of standardized feature
/// space: a row belongs to its nearest centroid, ties to the lowest index.
class SubgroupPartition {
public:
    SubgroupPartition(Matrix centroids, std::uint64_t seed, double inertia);

    int G() const noexcept { return static_cast<int>(centroids_.rows()); }
    std::size_t d() const noexcept { return centroids_.cols(); }
    const Matrix& centroids() const noexcept { return centroids_; }
    std::span<const double> centroid(int g) const { return centroids_.row(static_cast<std::size_t>(g)); }
    std::uint64_t seed() const noexcept { return seed_; }
    double inertia() const noexcept { return inertia_; }

    int assign(std::span<const double> x) const;
    std::vector<int> assign_all(const Matrix& x) const;

    nlohmann::json to_json() const;
    static SubgroupPartition from_json(const nlohmann::json& j);

private:
    Matrix centroids_;
    std::uint64_t seed_;
    double inertia_;
};

struct KmeansOptions {
    int restarts = 5;
    int max_iterations = 300;
    double tolerance = 1e-8;
};

/// Inertia after every assignment step of every restart, for diagnostics.
struct KmeansTrace {
    std::vector<std::vector<double>> inertia;
};

/// k-means++ seeding followed by Lloyd iterations; best restart by inertia.
/// Throws TooFewPoints when there are fewer distinct rows than G.
SubgroupPartition kmeans_fit(const Matrix& x, int G, std::uint64_t seed, const KmeansOptions& opts = {},
                             KmeansTrace* trace = nullptr);

}  // namespace cuqr
