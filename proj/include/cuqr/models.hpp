#pragma once

#include <memory>
#include <span>
#include <vector>

#include "json.hpp"

#include "cuqr/config.hpp"
#include "cuqr/types.hpp"

namespace cuqr {

using Json = nlohmann::json;

/// Point-prediction regressor. Immutable once fitted.
class Regressor {
public:
    virtual ~Regressor() = default;

    virtual double predict(std::span<const double> x) const = 0;
    virtual std::size_t n_features() const noexcept = 0;
    virtual Json to_json() const = 0;

    std::vector<double> predict_all(const Matrix& x) const;
};

using RegressorPtr = std::shared_ptr<const Regressor>;

/// Binary regression tree in flat arrays. feature < 0 marks a leaf; a row
/// goes left when x[feature] <= threshold.
struct RegressionTree {
    std::vector<int> feature;
    std::vector<double> threshold;
    std::vector<int> left;
    std::vector<int> right;
    std::vector<double> value;

    double predict(std::span<const double> x) const;
    std::size_t leaf_of(std::span<const double> x) const;
};

/// Least-squares gradient boosting with exact greedy variance-reduction
/// splits. Leaf values are stored already scaled by the learning rate.
class GradientBoostedTrees final : public Regressor {
public:
    // Throws TooFewRows when fewer than 2 * min_leaf rows. If
    // `stage_mse` is given it receives the training MSE after stage 0 and
    // after each tree.
    static GradientBoostedTrees fit(const Matrix& x, std::span<const double> y, const GbtParams& params,
                                    std::vector<double>* stage_mse = nullptr);
    static GradientBoostedTrees from_json(const Json& j);

    double predict(std::span<const double> x) const override;
    std::size_t n_features() const noexcept override { return n_features_; }
    Json to_json() const override;

    double base() const noexcept { return base_; }
    const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
    const GbtParams& params() const noexcept { return params_; }

private:
    GbtParams params_{};
    std::size_t n_features_ = 0;
    double base_ = 0.0;
    std::vector<RegressionTree> trees_;
};

/// Mean response of the k Euclidean-nearest training rows; distance ties
/// go to the lower row index.
class KnnRegressor final : public Regressor {
public:
    // Throws KTooLarge when k > n.
    static KnnRegressor fit(const Matrix& x, std::span<const double> y, int k);
    static KnnRegressor from_json(const Json& j);

    double predict(std::span<const double> x) const override;
    std::size_t n_features() const noexcept override { return x_.cols(); }
    Json to_json() const override;

    int k() const noexcept { return k_; }

private:
    Matrix x_;
    std::vector<double> y_;
    int k_ = 1;
};

RegressorPtr fit_base_model(BaseModel kind, const Matrix& x, std::span<const double> y, const GbtParams& gbt,
                            int knn_k);
RegressorPtr regressor_from_json(const Json& j);

}  // namespace cuqr
