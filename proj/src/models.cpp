#include "cuqr/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cuqr/error.hpp"

namespace cuqr {

std::vector<double> Regressor::predict_all(const Matrix& x) const {
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict(x.row(i));
    return out;
}

std::size_t RegressionTree::leaf_of(std::span<const double> x) const {
    std::size_t node = 0;
    while (feature[node] >= 0) {
        node = static_cast<std::size_t>(x[static_cast<std::size_t>(feature[node])] <= threshold[node] ? left[node]
                                                                                                       : right[node]);
    }
    return node;
}

double RegressionTree::predict(std::span<const double> x) const { return value[leaf_of(x)]; }

namespace {

struct SplitCandidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

double midpoint(double a, double b) {
    const double m = a + (b - a) / 2.0;
    return m < b ? m : a;
}

// Grows one tree on `residual` level by level. Every level is a single
// sweep per feature over the presorted row order. Returns leaf index per row.
RegressionTree grow_tree(const Matrix& x, const std::vector<std::vector<std::size_t>>& sorted,
                         std::span<const double> residual, const GbtParams& params, std::vector<int>& node_of) {
    const std::size_t n = x.rows();
    RegressionTree tree;
    auto add_node = [&]() {
        tree.feature.push_back(-1);
        tree.threshold.push_back(0.0);
        tree.left.push_back(-1);
        tree.right.push_back(-1);
        tree.value.push_back(0.0);
        return static_cast<int>(tree.feature.size() - 1);
    };

    std::vector<double> node_sum{std::accumulate(residual.begin(), residual.end(), 0.0)};
    std::vector<std::size_t> node_count{n};
    add_node();
    std::fill(node_of.begin(), node_of.end(), 0);

    std::vector<int> frontier{0};
    const auto min_leaf = static_cast<std::size_t>(params.min_leaf);

    for (int depth = 0; depth < params.max_depth && !frontier.empty(); ++depth) {
        // slot[node] = position of node in frontier, or -1.
        std::vector<int> slot(tree.feature.size(), -1);
        for (std::size_t s = 0; s < frontier.size(); ++s) {
            if (node_count[static_cast<std::size_t>(frontier[s])] >= 2 * min_leaf) {
                slot[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);
            }
        }
        std::vector<SplitCandidate> best(frontier.size());
        std::vector<double> left_sum(frontier.size());
        std::vector<std::size_t> left_count(frontier.size());
        std::vector<double> last_value(frontier.size());

        for (std::size_t f = 0; f < x.cols(); ++f) {
            std::fill(left_sum.begin(), left_sum.end(), 0.0);
            std::fill(left_count.begin(), left_count.end(), 0);
            for (std::size_t i : sorted[f]) {
                const int s = slot[static_cast<std::size_t>(node_of[i])];
                if (s < 0) continue;
                const auto su = static_cast<std::size_t>(s);
                const auto node = static_cast<std::size_t>(frontier[su]);
                const double v = x(i, f);
                const std::size_t nl = left_count[su];
                const std::size_t nr = node_count[node] - nl;
                if (nl >= min_leaf && nr >= min_leaf && v > last_value[su]) {
                    const double sl = left_sum[su];
                    const double sr = node_sum[node] - sl;
                    const double gain = sl * sl / static_cast<double>(nl) + sr * sr / static_cast<double>(nr) -
                                        node_sum[node] * node_sum[node] / static_cast<double>(node_count[node]);
                    if (gain > best[su].gain) {
                        best[su] = {gain, static_cast<int>(f), midpoint(last_value[su], v)};
                    }
                }
                left_sum[su] += residual[i];
                left_count[su] += 1;
                last_value[su] = v;
            }
        }

        std::vector<int> next;
        for (std::size_t s = 0; s < frontier.size(); ++s) {
            if (best[s].feature < 0) continue;
            const auto node = static_cast<std::size_t>(frontier[s]);
            const int l = add_node();
            const int r = add_node();
            tree.feature[node] = best[s].feature;
            tree.threshold[node] = best[s].threshold;
            tree.left[node] = l;
            tree.right[node] = r;
            node_sum.resize(tree.feature.size(), 0.0);
            node_count.resize(tree.feature.size(), 0);
            next.push_back(l);
            next.push_back(r);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto node = static_cast<std::size_t>(node_of[i]);
            if (node >= slot.size() || tree.feature[node] < 0) continue;
            const int child = x(i, static_cast<std::size_t>(tree.feature[node])) <= tree.threshold[node]
                                  ? tree.left[node]
                                  : tree.right[node];
            node_of[i] = child;
            node_sum[static_cast<std::size_t>(child)] += residual[i];
            node_count[static_cast<std::size_t>(child)] += 1;
        }
        frontier = std::move(next);
    }

    for (std::size_t node = 0; node < tree.feature.size(); ++node) {
        if (tree.feature[node] < 0 && node_count[node] > 0) {
            tree.value[node] = params.learning_rate * node_sum[node] / static_cast<double>(node_count[node]);
        }
    }
    return tree;
}

double mse(std::span<const double> y, std::span<const double> fitted) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - fitted[i]) * (y[i] - fitted[i]);
    return s / static_cast<double>(y.size());
}

}  // namespace

GradientBoostedTrees GradientBoostedTrees::fit(const Matrix& x, std::span<const double> y, const GbtParams& params,
                                               std::vector<double>* stage_mse) {
    params.validate();
    if (x.rows() != y.size()) fail(ErrorCode::DimensionMismatch, "feature rows and targets differ in length");
    if (x.rows() < 2 * static_cast<std::size_t>(params.min_leaf)) {
        fail(ErrorCode::TooFewRows, "boosting needs at least 2 * min_leaf rows, got " + std::to_string(x.rows()));
    }
    const std::size_t n = x.rows();

    GradientBoostedTrees model;
    model.params_ = params;
    model.n_features_ = x.cols();
    model.base_ = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

    std::vector<std::vector<std::size_t>> sorted(x.cols(), std::vector<std::size_t>(n));
    for (std::size_t f = 0; f < x.cols(); ++f) {
        std::iota(sorted[f].begin(), sorted[f].end(), std::size_t{0});
        std::stable_sort(sorted[f].begin(), sorted[f].end(),
                         [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
    }

    std::vector<double> fitted(n, model.base_);
    std::vector<double> residual(n);
    std::vector<int> node_of(n, 0);
    if (stage_mse) stage_mse->assign(1, mse(y, fitted));

    model.trees_.reserve(static_cast<std::size_t>(params.n_trees));
    for (int t = 0; t < params.n_trees; ++t) {
        for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - fitted[i];
        RegressionTree tree = grow_tree(x, sorted, residual, params, node_of);
        for (std::size_t i = 0; i < n; ++i) fitted[i] += tree.value[static_cast<std::size_t>(node_of[i])];
        model.trees_.push_back(std::move(tree));
        if (stage_mse) stage_mse->push_back(mse(y, fitted));
    }
    return model;
}

double GradientBoostedTrees::predict(std::span<const double> x) const {
    if (x.size() != n_features_) fail(ErrorCode::DimensionMismatch, "row width does not match the model");
    double out = base_;
    for (const auto& tree : trees_) out += tree.predict(x);
    return out;
}

Json GradientBoostedTrees::to_json() const {
    Json trees = Json::array();
    for (const auto& t : trees_) {
        trees.push_back({{"feature", t.feature},
                         {"threshold", t.threshold},
                         {"left", t.left},
                         {"right", t.right},
                         {"value", t.value}});
    }
    return {{"kind", "gbt"},
            {"n_features", n_features_},
            {"params",
             {{"n_trees", params_.n_trees},
              {"max_depth", params_.max_depth},
              {"learning_rate", params_.learning_rate},
              {"min_leaf", params_.min_leaf},
              {"seed", params_.seed}}},
            {"base", base_},
            {"trees", std::move(trees)}};
}

GradientBoostedTrees GradientBoostedTrees::from_json(const Json& j) {
    GradientBoostedTrees model;
    const auto& p = j.at("params");
    model.params_.n_trees = p.at("n_trees").get<int>();
    model.params_.max_depth = p.at("max_depth").get<int>();
    model.params_.learning_rate = p.at("learning_rate").get<double>();
    model.params_.min_leaf = p.at("min_leaf").get<int>();
    model.params_.seed = p.at("seed").get<std::uint64_t>();
    model.n_features_ = j.at("n_features").get<std::size_t>();
    model.base_ = j.at("base").get<double>();
    for (const auto& t : j.at("trees")) {
        RegressionTree tree;
        t.at("feature").get_to(tree.feature);
        t.at("threshold").get_to(tree.threshold);
        t.at("left").get_to(tree.left);
        t.at("right").get_to(tree.right);
        t.at("value").get_to(tree.value);
        const std::size_t m = tree.feature.size();
        if (m == 0 || tree.threshold.size() != m || tree.left.size() != m || tree.right.size() != m ||
            tree.value.size() != m) {
            fail(ErrorCode::InvalidModel, "malformed tree arrays");
        }
        for (std::size_t node = 0; node < m; ++node) {
            if (tree.feature[node] < 0) continue;
            if (static_cast<std::size_t>(tree.feature[node]) >= model.n_features_ || tree.left[node] <= 0 ||
                tree.right[node] <= 0 || static_cast<std::size_t>(tree.left[node]) >= m ||
                static_cast<std::size_t>(tree.right[node]) >= m) {
                fail(ErrorCode::InvalidModel, "tree node references are out of range");
            }
        }
        model.trees_.push_back(std::move(tree));
    }
    return model;
}

KnnRegressor KnnRegressor::fit(const Matrix& x, std::span<const double> y, int k) {
    if (x.rows() != y.size()) fail(ErrorCode::DimensionMismatch, "feature rows and targets differ in length");
    if (k < 1) fail(ErrorCode::InvalidArgument, "k must be >= 1");
    if (static_cast<std::size_t>(k) > x.rows()) {
        fail(ErrorCode::KTooLarge, "k = " + std::to_string(k) + " exceeds " + std::to_string(x.rows()) + " rows");
    }
    KnnRegressor model;
    model.x_ = x;
    model.y_.assign(y.begin(), y.end());
    model.k_ = k;
    return model;
}

double KnnRegressor::predict(std::span<const double> x) const {
    if (x.size() != x_.cols()) fail(ErrorCode::DimensionMismatch, "row width does not match the model");
    std::vector<std::pair<double, std::size_t>> dist(x_.rows());
    for (std::size_t i = 0; i < x_.rows(); ++i) {
        double s = 0.0;
        const auto r = x_.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) s += (r[j] - x[j]) * (r[j] - x[j]);
        dist[i] = {s, i};
    }
    const auto k = static_cast<std::size_t>(k_);
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += y_[dist[i].second];
    return sum / static_cast<double>(k);
}

Json KnnRegressor::to_json() const {
    return {{"kind", "knn"},
            {"k", k_},
            {"n_features", x_.cols()},
            {"features", x_.values()},
            {"targets", y_}};
}

KnnRegressor KnnRegressor::from_json(const Json& j) {
    const auto d = j.at("n_features").get<std::size_t>();
    auto values = j.at("features").get<std::vector<double>>();
    auto targets = j.at("targets").get<std::vector<double>>();
    if (d == 0 || values.size() != d * targets.size()) fail(ErrorCode::InvalidModel, "malformed knn model");
    return fit(Matrix(targets.size(), d, std::move(values)), targets, j.at("k").get<int>());
}

RegressorPtr fit_base_model(BaseModel kind, const Matrix& x, std::span<const double> y, const GbtParams& gbt,
                            int knn_k) {
    if (kind == BaseModel::knn) return std::make_shared<KnnRegressor>(KnnRegressor::fit(x, y, knn_k));
    return std::make_shared<GradientBoostedTrees>(GradientBoostedTrees::fit(x, y, gbt));
}

RegressorPtr regressor_from_json(const Json& j) {
    try {
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "gbt") return std::make_shared<GradientBoostedTrees>(GradientBoostedTrees::from_json(j));
        if (kind == "knn") return std::make_shared<KnnRegressor>(KnnRegressor::from_json(j));
        fail(ErrorCode::InvalidModel, "unknown regressor kind '" + kind + "'");
    } catch (const Json::exception& e) {
        fail(ErrorCode::InvalidModel, std::string("malformed regressor: ") + e.what());
    }
}

}  // namespace cuqr
