#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cuqr/data.hpp"
#include "cuqr/error.hpp"
#include "cuqr/evaluation.hpp"
#include "cuqr/pipeline.hpp"

namespace fs = std::filesystem;

namespace cuqr::cli {
namespace {

/// Buffers every output of a command and writes them only once the command
/// has succeeded: each file goes to a temporary sibling and is renamed in
/// place, so a failure leaves no partial outputs behind.
class OutputBatch {
public:
    void add(fs::path path, std::string content) { files_.emplace_back(std::move(path), std::move(content)); }

    void commit() {
        std::vector<fs::path> written;
        try {
            for (const auto& [path, content] : files_) {
                if (path.has_parent_path()) fs::create_directories(path.parent_path());
                fs::path tmp = path;
                tmp += ".tmp";
                std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
                written.push_back(tmp);
                if (!out) fail(ErrorCode::IoError, "cannot write '" + path.string() + "'");
                out << content;
                out.close();
                if (!out) fail(ErrorCode::IoError, "failed writing '" + path.string() + "'");
            }
            for (const auto& [path, content] : files_) {
                fs::path tmp = path;
                tmp += ".tmp";
                fs::rename(tmp, path);
            }
        } catch (const fs::filesystem_error& e) {
            cleanup(written);
            fail(ErrorCode::IoError, e.what());
        } catch (...) {
            cleanup(written);
            throw;
        }
    }

private:
    static void cleanup(const std::vector<fs::path>& paths) {
        std::error_code ec;
        for (const auto& p : paths) fs::remove(p, ec);
    }

    std::vector<std::pair<fs::path, std::string>> files_;
};

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidModel, "'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

struct SynthOptions {
    SyntheticSpec spec;
    std::string out;
};

void cmd_synth(const SynthOptions& o) {
    const Dataset ds = generate(o.spec);
    OutputBatch batch;
    batch.add(o.out, to_csv(ds));
    batch.add(o.out + ".json", dump(spec_to_json(o.spec)));
    batch.commit();
}

struct FitOptions {
    std::string data;
    std::string response = "y";
    std::string method = "cuqr";
    std::string base_model = "gbt";
    RunConfig cfg;
    int trees = 300;
    int depth = 3;
    double learning_rate = 0.1;
    int min_leaf = 5;
    std::string out;
};

void cmd_fit(FitOptions o) {
    GbtParams gbt{o.trees, o.depth, o.learning_rate, o.min_leaf, o.cfg.seed};
    o.cfg.mu_params = gbt;
    o.cfg.index_params = gbt;
    o.cfg.base_model = parse_base_model(o.base_model);
    o.cfg.validate();
    const Method method = parse_method(o.method);
    const Dataset raw = load_csv(o.data, o.response);
    const FittedModel model = fit_model(raw, method, o.cfg, DataProvenance{o.data, file_fingerprint(o.data), raw.n()});
    OutputBatch batch;
    batch.add(o.out, dump(model_to_json(model)));
    batch.commit();
}

FittedModel load_model(const std::string& path) { return model_from_json(read_json(path)); }

// Feature matrix of `table` ordered like the model's training columns.
Matrix select_features(const NumericTable& table, const std::vector<std::string>& columns) {
    std::vector<std::size_t> pos;
    for (const auto& c : columns) {
        auto it = std::find(table.header.begin(), table.header.end(), c);
        if (it == table.header.end()) fail(ErrorCode::SchemaMismatch, "input is missing training column '" + c + "'");
        pos.push_back(static_cast<std::size_t>(it - table.header.begin()));
    }
    Matrix x(table.rows.size(), columns.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        for (std::size_t j = 0; j < pos.size(); ++j) x(i, j) = table.rows[i][pos[j]];
    }
    return x;
}

struct PredictOptions {
    std::string model;
    std::string input;
    std::string out;
};

void cmd_predict(const PredictOptions& o) {
    const FittedModel model = load_model(o.model);
    const NumericTable table = read_numeric_csv(o.input);
    const Matrix raw = select_features(table, model.columns);
    std::string csv = "row_id,y_hat,lo,hi,subgroup,n_g,lambda,length_std\n";
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        const PredictionResult p = model.predictor.predict(model.scaler.transform_row(raw.row(i)));
        csv += std::to_string(i) + ',' + format_double(model.scaler.inverse_response(p.y_hat)) + ',' +
               format_double(model.scaler.inverse_response(p.interval.lo)) + ',' +
               format_double(model.scaler.inverse_response(p.interval.hi)) + ',' + std::to_string(p.subgroup) + ',' +
               std::to_string(p.guarantee.n_g) + ',' + format_double(p.guarantee.lambda) + ',' +
               format_double(2.0 * p.half_width) + '\n';
    }
    OutputBatch batch;
    batch.add(o.out, std::move(csv));
    batch.commit();
}

struct EvaluateOptions {
    std::string model;
    std::string data;
    int audit_groups = 0;
    std::uint64_t audit_seed = 1;
    std::vector<int> sweep_groups;
    std::string out_dir;
};

Dataset reload_training_data(const FittedModel& model) {
    if (model.data.source.empty()) fail(ErrorCode::InvalidArgument, "model has no recorded data source; pass --data");
    if (file_fingerprint(model.data.source) != model.data.fingerprint) {
        fail(ErrorCode::SchemaMismatch, "'" + model.data.source + "' changed since the model was fitted");
    }
    Dataset raw = load_csv(model.data.source, model.response);
    if (raw.column_names() != model.columns || raw.n() != model.data.n) {
        fail(ErrorCode::SchemaMismatch, "recorded data source no longer matches the model");
    }
    return raw;
}

void cmd_evaluate(const EvaluateOptions& o) {
    const FittedModel model = load_model(o.model);
    Dataset test_raw = [&] {
        if (!o.data.empty()) {
            const NumericTable table = read_numeric_csv(o.data);
            auto it = std::find(table.header.begin(), table.header.end(), model.response);
            if (it == table.header.end()) {
                fail(ErrorCode::SchemaMismatch, "test data lacks response column '" + model.response + "'");
            }
            const auto r = static_cast<std::size_t>(it - table.header.begin());
            std::vector<double> y;
            for (const auto& row : table.rows) y.push_back(row[r]);
            return Dataset(select_features(table, model.columns), std::move(y), model.columns, model.response);
        }
        return reload_training_data(model).subset(model.split.test);
    }();
    const Dataset test = model.scaler.transform(test_raw);
    if (!model.predictor.partition()) fail(ErrorCode::InvalidModel, "model has no subgroup partition");
    const SubgroupPartition& partition = *model.predictor.partition();

    EvaluationReport report = evaluate(model.predictor, test.features(), test.response(), partition);
    nlohmann::json doc = report.to_json();
    doc["config"] = config_to_json(model.cfg);
    doc["seed"] = model.cfg.seed;
    doc["test_source"] = o.data.empty() ? std::string("stored-test-split") : o.data;

    const fs::path dir(o.out_dir);
    OutputBatch batch;
    if (o.audit_groups > 0) {
        // Audit partition: a fresh k-means on the training rows, with its own
        // seed and subgroup count.
        const Dataset raw = reload_training_data(model);
        const Dataset train = model.scaler.transform(raw.subset(model.split.train));
        const SubgroupPartition audit = kmeans_fit(train.features(), o.audit_groups, o.audit_seed);
        const AuditTable table = adaptivity_audit(model.predictor, test.features(), test.response(), audit);
        nlohmann::json a = table.to_json();
        a["audit_groups"] = o.audit_groups;
        a["audit_seed"] = o.audit_seed;
        doc["audit"] = {{"spearman", table.spearman}, {"degenerate", table.degenerate}};
        batch.add(dir / "audit.json", dump(a));
        batch.add(dir / "audit.csv", table.csv());
    }
    if (!o.sweep_groups.empty()) {
        const Dataset raw = reload_training_data(model);
        nlohmann::json sweep = nlohmann::json::array();
        for (const SweepCell& cell : g_sweep(raw, model.cfg, model.method, o.sweep_groups)) {
            nlohmann::json r = cell.report.to_json();
            sweep.push_back({{"G", cell.G}, {"c_av", r["c_av"]}, {"l_av", r["l_av"]}, {"c_wc", r["c_wc"]},
                             {"coverage_dispersion", r["coverage_dispersion"]}});
            batch.add(dir / ("sweep_G" + std::to_string(cell.G) + ".json"), dump(r));
            batch.add(dir / ("sweep_G" + std::to_string(cell.G) + ".csv"), cell.report.subgroup_csv());
        }
        batch.add(dir / "sweep.json", dump(sweep));
    }
    batch.add(dir / "report.json", dump(doc));
    batch.add(dir / "subgroups.csv", report.subgroup_csv());
    batch.commit();
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Conformalized unconditional quantile regression: adaptive prediction intervals with "
                 "per-subgroup coverage"};
    app.require_subcommand(1);

    SynthOptions synth;
    auto* s = app.add_subcommand("synth", "Generate a heteroscedastic synthetic dataset");
    s->add_option("--n", synth.spec.n, "Rows")->default_val(1000);
    s->add_option("--d", synth.spec.d, "Feature dimension")->default_val(3);
    s->add_option("--noise-base", synth.spec.noise_base, "Noise scale at x1 = 0")->default_val(0.5);
    s->add_option("--noise-slope", synth.spec.noise_slope, "Noise scale slope in x1")->default_val(2.0);
    s->add_option("--seed", synth.spec.seed, "RNG seed")->default_val(0);
    s->add_option("-o,--output", synth.out, "Output CSV")->required();

    FitOptions fit;
    auto* f = app.add_subcommand("fit", "Fit, partition and calibrate a predictor");
    f->add_option("--data", fit.data, "Input CSV")->required()->check(CLI::ExistingFile);
    f->add_option("--response", fit.response, "Response column")->default_val("y");
    f->add_option("--method", fit.method, "split_cp | cuqr | cuqr_pac | cq")->default_val("cuqr");
    f->add_option("--alpha", fit.cfg.alpha, "Miscoverage level")->default_val(0.1);
    f->add_option("--groups", fit.cfg.G, "Number of relevance subgroups G")->default_val(10);
    f->add_option("--grid", fit.cfg.K, "Quantile grid size K")->default_val(20);
    f->add_option("--seed", fit.cfg.seed, "RNG seed")->default_val(0);
    f->add_option("--pac-confidence", fit.cfg.pac_confidence, "Confidence for the PAC slack")->default_val(0.9);
    f->add_option("--n-min", fit.cfg.n_min, "Minimum calibration points per subgroup")->default_val(30);
    f->add_option("--base-model", fit.base_model, "gbt | knn")->default_val("gbt");
    f->add_option("--knn-k", fit.cfg.knn_k, "Neighbours for the knn base model")->default_val(10);
    f->add_option("--density-floor", fit.cfg.density_floor, "KDE density floor (times 1/sd)")->default_val(1e-6);
    f->add_option("--trees", fit.trees, "Boosting stages")->default_val(300);
    f->add_option("--depth", fit.depth, "Tree depth")->default_val(3);
    f->add_option("--learning-rate", fit.learning_rate, "Shrinkage")->default_val(0.1);
    f->add_option("--min-leaf", fit.min_leaf, "Minimum rows per leaf")->default_val(5);
    f->add_option("-o,--output", fit.out, "Output model JSON")->required();

    PredictOptions predict;
    auto* p = app.add_subcommand("predict", "Emit intervals for the rows of a CSV");
    p->add_option("--model", predict.model, "Model JSON")->required()->check(CLI::ExistingFile);
    p->add_option("--input", predict.input, "Input CSV")->required()->check(CLI::ExistingFile);
    p->add_option("-o,--output", predict.out, "Output predictions CSV")->required();

    EvaluateOptions evaluate_opts;
    auto* e = app.add_subcommand("evaluate", "Coverage/length report on held-out data");
    e->add_option("--model", evaluate_opts.model, "Model JSON")->required()->check(CLI::ExistingFile);
    e->add_option("--data", evaluate_opts.data, "Explicit test CSV (default: stored test split)")
        ->check(CLI::ExistingFile);
    e->add_option("--audit-groups", evaluate_opts.audit_groups, "Audit k-means subgroup count (0 = off)")
        ->default_val(0);
    e->add_option("--audit-seed", evaluate_opts.audit_seed, "Audit k-means seed")->default_val(1);
    e->add_option("--sweep-groups", evaluate_opts.sweep_groups, "Comma-separated G values to sweep")
        ->delimiter(',');
    e->add_option("-o,--output-dir", evaluate_opts.out_dir, "Report directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err);
    }

    try {
        if (s->parsed()) cmd_synth(synth);
        if (f->parsed()) cmd_fit(fit);
        if (p->parsed()) cmd_predict(predict);
        if (e->parsed()) cmd_evaluate(evaluate_opts);
    } catch (const Error& err) {
        std::cerr << "error: " << to_string(err.code()) << ": " << err.what() << '\n';
        return exit_status(err.code());
    } catch (const std::exception& err) {
        std::cerr << "error: INTERNAL: " << err.what() << '\n';
        return 70;
    }
    return 0;
}

}  // namespace cuqr::cli
