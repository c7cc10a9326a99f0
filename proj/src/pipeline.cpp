#include "cuqr/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

#include "cuqr/error.hpp"

namespace cuqr {

PreparedData prepare(const Dataset& raw, const RunConfig& cfg) {
    cfg.validate();
    DataSplit split = split_dataset(raw, cfg);
    auto [z, scaler] = standardize(raw, split.train);
    return PreparedData{split,
                        std::move(scaler),
                        z.subset(split.train),
                        z.subset(split.cal1),
                        z.subset(split.cal2),
                        z.subset(split.test)};
}

BaseFit fit_base(const PreparedData& data, const RunConfig& cfg, bool with_rif) {
    BaseFit fit;
    fit.mu = fit_base_model(cfg.base_model, data.train.features(), data.train.response(), cfg.mu_params, cfg.knn_k);
    if (with_rif) {
        fit.rif = std::make_shared<RifModel>(
            fit_rif_model(*fit.mu, data.cal1.features(), data.cal1.response(), QuantileGrid(cfg.K), cfg));
    }
    return fit;
}

SubgroupPartition fit_partition(const PreparedData& data, int G, std::uint64_t seed) {
    return kmeans_fit(data.train.features(), G, seed);
}

CalibratedPredictor calibrate(Method method, const PreparedData& data, const BaseFit& base,
                              const SubgroupPartition& partition, const RunConfig& cfg) {
    const Matrix& x = data.cal2.features();
    const auto& y = data.cal2.response();
    switch (method) {
    case Method::split_cp: return split_cp_calibrate(base.mu, x, y, cfg.alpha, partition);
    case Method::cq: return cq_calibrate(base.mu, partition, x, y, cfg.alpha, cfg.n_min);
    case Method::cuqr: return cuqr_calibrate(base.mu, base.rif, partition, x, y, cfg.alpha, cfg.n_min);
    case Method::cuqr_pac:
        return cuqr_pac_calibrate(base.mu, base.rif, partition, x, y, cfg.alpha, cfg.pac_confidence, cfg.n_min);
    }
    fail(ErrorCode::InvalidArgument, "unknown method");
}

FittedModel fit_model(const Dataset& raw, Method method, const RunConfig& cfg, DataProvenance provenance) {
    const PreparedData data = prepare(raw, cfg);
    const bool nested = method == Method::cuqr || method == Method::cuqr_pac;
    const BaseFit base = fit_base(data, cfg, nested);
    const SubgroupPartition partition = fit_partition(data, cfg.G, cfg.seed);
    provenance.n = raw.n();
    return FittedModel{cfg,
                       method,
                       raw.column_names(),
                       raw.response_name(),
                       data.scaler,
                       data.split,
                       std::move(provenance),
                       calibrate(method, data, base, partition, cfg)};
}

namespace {

nlohmann::json gbt_params_json(const GbtParams& p) {
    return {{"n_trees", p.n_trees},
            {"max_depth", p.max_depth},
            {"learning_rate", p.learning_rate},
            {"min_leaf", p.min_leaf},
            {"seed", p.seed}};
}

GbtParams gbt_params_from_json(const nlohmann::json& j) {
    GbtParams p;
    p.n_trees = j.at("n_trees").get<int>();
    p.max_depth = j.at("max_depth").get<int>();
    p.learning_rate = j.at("learning_rate").get<double>();
    p.min_leaf = j.at("min_leaf").get<int>();
    p.seed = j.at("seed").get<std::uint64_t>();
    return p;
}

}  // namespace

nlohmann::json config_to_json(const RunConfig& cfg) {
    return {{"alpha", cfg.alpha},
            {"G", cfg.G},
            {"K", cfg.K},
            {"pac_confidence", cfg.pac_confidence},
            {"seed", cfg.seed},
            {"n_min", cfg.n_min},
            {"base_model", to_string(cfg.base_model)},
            {"density_floor", cfg.density_floor},
            {"knn_k", cfg.knn_k},
            {"mu_params", gbt_params_json(cfg.mu_params)},
            {"index_params", gbt_params_json(cfg.index_params)}};
}

RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    cfg.alpha = j.at("alpha").get<double>();
    cfg.G = j.at("G").get<int>();
    cfg.K = j.at("K").get<int>();
    cfg.pac_confidence = j.at("pac_confidence").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.n_min = j.at("n_min").get<int>();
    cfg.base_model = parse_base_model(j.at("base_model").get<std::string>());
    cfg.density_floor = j.at("density_floor").get<double>();
    cfg.knn_k = j.at("knn_k").get<int>();
    cfg.mu_params = gbt_params_from_json(j.at("mu_params"));
    cfg.index_params = gbt_params_from_json(j.at("index_params"));
    cfg.validate();
    return cfg;
}

nlohmann::json model_to_json(const FittedModel& m) {
    return {{"format", "cuqr-model"},
            {"version", kModelFormatVersion},
            {"method", to_string(m.method)},
            {"config", config_to_json(m.cfg)},
            {"data",
             {{"source", m.data.source},
              {"fingerprint", m.data.fingerprint},
              {"n", m.data.n},
              {"columns", m.columns},
              {"response", m.response}}},
            {"scaler",
             {{"feature_mean", m.scaler.feature_mean},
              {"feature_scale", m.scaler.feature_scale},
              {"response_mean", m.scaler.response_mean},
              {"response_scale", m.scaler.response_scale}}},
            {"split",
             {{"train", m.split.train}, {"cal1", m.split.cal1}, {"cal2", m.split.cal2}, {"test", m.split.test}}},
            {"predictor", m.predictor.to_json()}};
}

FittedModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "cuqr-model") fail(ErrorCode::InvalidModel, "not a cuqr model file");
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion) {
            fail(ErrorCode::InvalidModel, "unsupported model version " + std::to_string(version));
        }
        ScalerParams scaler;
        const auto& s = j.at("scaler");
        s.at("feature_mean").get_to(scaler.feature_mean);
        s.at("feature_scale").get_to(scaler.feature_scale);
        scaler.response_mean = s.at("response_mean").get<double>();
        scaler.response_scale = s.at("response_scale").get<double>();

        DataSplit split;
        const auto& sp = j.at("split");
        sp.at("train").get_to(split.train);
        sp.at("cal1").get_to(split.cal1);
        sp.at("cal2").get_to(split.cal2);
        sp.at("test").get_to(split.test);

        const auto& d = j.at("data");
        DataProvenance provenance{d.at("source").get<std::string>(), d.at("fingerprint").get<std::string>(),
                                  d.at("n").get<std::size_t>()};
        split.validate(provenance.n);

        FittedModel m{config_from_json(j.at("config")),
                      parse_method(j.at("method").get<std::string>()),
                      d.at("columns").get<std::vector<std::string>>(),
                      d.at("response").get<std::string>(),
                      std::move(scaler),
                      std::move(split),
                      std::move(provenance),
                      CalibratedPredictor::from_json(j.at("predictor"))};
        if (m.columns.size() != m.scaler.feature_mean.size() || m.columns.size() != m.scaler.feature_scale.size() ||
            m.columns.size() != m.predictor.mu().n_features()) {
            fail(ErrorCode::InvalidModel, "column count does not match the fitted model");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidModel, std::string("malformed model file: ") + e.what());
    }
}

std::string file_fingerprint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open '" + path.string() + "'");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::istreambuf_iterator<char> it(in), end; it != end; ++it) {
        h ^= static_cast<unsigned char>(*it);
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace cuqr
