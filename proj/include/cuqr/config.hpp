#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace cuqr {

struct GbtParams {
    int n_trees = 300;
    int max_depth = 3;
    double learning_rate = 0.1;
    int min_leaf = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

enum class BaseModel { gbt, knn };

std::string_view to_string(BaseModel m);
BaseModel parse_base_model(std::string_view s);

struct RunConfig {
    double alpha = 0.1;
    int G = 10;
    int K = 20;
    double pac_confidence = 0.9;
    std::uint64_t seed = 0;
    int n_min = 30;
    BaseModel base_model = BaseModel::gbt;
    double density_floor = 1e-6;
    int knn_k = 10;
    GbtParams mu_params{};
    GbtParams index_params{};

    void validate() const;
};

}  // namespace cuqr
