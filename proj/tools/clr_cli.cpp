#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "clr/eval.hpp"

namespace {

using clr::ClrError;
using nlohmann::json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Settings {
    std::string config;
    std::string dataset, recipe = "generic", target, constraint, name;
    std::string method = "lr", k = "2", gamma = "0", clr_kind = "hard", weighted = "0";
    std::string n_estimators = "20", regressor = "ols", lambda = "0", classifier = "forest";
    std::string members = "1", max_iter = "5";
    std::string folds = "10", repeats = "5", seed = "0", jobs = "1", share_labels = "0";
    std::string out, format = "table";
    std::string model;
    std::string split = "0.5";
    std::string scenario = "planted_lines", n = "300", d = "2", noise = "0";
    std::string groups_per_cluster = "4", truth;
};

struct FlagReg {
    CLI::App* sub;
    std::string key;
    CLI::Option* opt;
    std::string* storage;
};

std::vector<FlagReg> g_registry;

CLI::Option* reg(CLI::App* sub, const std::string& flag, std::string& storage,
                 const std::string& help) {
    CLI::Option* opt = sub->add_option(flag, storage, help);
    g_registry.push_back({sub, flag.substr(2), opt, &storage});
    return opt;
}

int to_int(const std::string& v, const char* flag) {
    try {
        std::size_t used;
        const int out = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw UsageError(std::string(flag) + ": expected an integer, got '" + v + "'");
    }
}

double to_double(const std::string& v, const char* flag) {
    try {
        std::size_t used;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw UsageError(std::string(flag) + ": expected a number, got '" + v + "'");
    }
}

std::uint64_t to_u64(const std::string& v, const char* flag) {
    try {
        std::size_t used;
        const unsigned long long out = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw UsageError(std::string(flag) + ": expected an unsigned integer, got '" + v + "'");
    }
}

bool to_bool(const std::string& v, const char* flag) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw UsageError(std::string(flag) + ": expected 0/1/true/false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(v);
    while (std::getline(is, cur, ',')) out.push_back(cur);
    if (out.empty()) out.push_back("");
    return out;
}

void ensure_single(const std::string& v, const char* flag) {
    if (v.find(',') != std::string::npos)
        throw UsageError(std::string(flag) + ": takes one value here; lists are for `grid`");
}

clr::ClassifierSpec::Kind classifier_from_flag(const std::string& v) {
    if (v == "logistic") return clr::ClassifierSpec::Kind::logistic;
    if (v == "forest" || v == "random_forest") return clr::ClassifierSpec::Kind::random_forest;
    throw UsageError("--classifier: expected logistic or forest, got '" + v + "'");
}

bool soft_from_flag(const std::string& v) {
    if (v == "hard") return false;
    if (v == "soft") return true;
    throw UsageError("--clr: expected hard or soft, got '" + v + "'");
}

clr::MethodConfig build_cell(const Settings& s) {
    for (const auto& [value, flag] :
         std::initializer_list<std::pair<const std::string*, const char*>>{
             {&s.k, "--k"},
             {&s.gamma, "--gamma"},
             {&s.clr_kind, "--clr"},
             {&s.weighted, "--weighted"},
             {&s.lambda, "--lambda"}})
        ensure_single(*value, flag);

    clr::MethodConfig c;
    try {
        c.method = clr::method_from_string(s.method);
        c.regressor.kind = clr::regressor_kind_from_string(s.regressor);
    } catch (const ClrError& e) {
        throw UsageError(e.what());
    }
    c.k = to_int(s.k, "--k");
    c.gamma = to_double(s.gamma, "--gamma");
    c.soft = soft_from_flag(s.clr_kind);
    c.weighted = to_bool(s.weighted, "--weighted");
    c.max_iter = to_int(s.max_iter, "--max-iter");
    c.n_members = to_int(s.members, "--members");
    c.n_estimators = to_int(s.n_estimators, "--n-estimators");
    c.regressor.lambda = to_double(s.lambda, "--lambda");
    c.classifier.kind = classifier_from_flag(s.classifier);
    return c;
}

clr::CvPlan build_plan(const Settings& s, bool scale) {
    clr::CvPlan plan;
    plan.n_folds = to_int(s.folds, "--folds");
    plan.n_repeats = to_int(s.repeats, "--repeats");
    plan.seed = to_u64(s.seed, "--seed");
    plan.jobs = to_int(s.jobs, "--jobs");
    plan.share_labels = to_bool(s.share_labels, "--share-labels");
    plan.scale = scale;
    return plan;
}

clr::LoadedData load_for(const Settings& s, bool require_target = true) {
    if (s.dataset.empty()) throw UsageError("--dataset is required");
    clr::PreprocessRecipe recipe;
    try {
        recipe = clr::builtin_recipe(s.recipe);
    } catch (const clr::UnknownRecipe& e) {
        throw UsageError(e.what());
    }
    if (!s.target.empty()) recipe.target_column = s.target;
    if (!s.constraint.empty()) recipe.constraint_column = s.constraint;
    return clr::load_table(s.dataset, recipe, require_target);
}

std::string dataset_display_name(const Settings& s) {
    if (!s.name.empty()) return s.name;
    std::string base = s.dataset;
    const auto slash = base.find_last_of('/');
    if (slash != std::string::npos) base = base.substr(slash + 1);
    const auto dot = base.find_last_of('.');
    if (dot != std::string::npos && dot > 0) base = base.substr(0, dot);
    return base.empty() ? s.recipe : base;
}

std::string echo_settings(const Settings& s, std::initializer_list<const char*> keys) {
    const std::map<std::string, const std::string*> all = {
        {"dataset", &s.dataset},     {"recipe", &s.recipe},
        {"target", &s.target},       {"constraint", &s.constraint},
        {"method", &s.method},       {"k", &s.k},
        {"gamma", &s.gamma},         {"clr", &s.clr_kind},
        {"weighted", &s.weighted},   {"n-estimators", &s.n_estimators},
        {"regressor", &s.regressor}, {"lambda", &s.lambda},
        {"classifier", &s.classifier}, {"members", &s.members},
        {"max-iter", &s.max_iter},   {"folds", &s.folds},
        {"repeats", &s.repeats},     {"seed", &s.seed},
        {"jobs", &s.jobs},           {"share-labels", &s.share_labels},
        {"split", &s.split},         {"scenario", &s.scenario},
        {"n", &s.n},                 {"d", &s.d},
        {"noise", &s.noise},         {"groups-per-cluster", &s.groups_per_cluster}};
    json echo;
    for (const char* key : keys) echo[key] = *all.at(key);
    return echo.dump();
}

void write_doc(const std::string& doc, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << doc;
        return;
    }
    std::ofstream f(out);
    if (!f) throw clr::IoError("cannot write " + out);
    f << doc;
    if (!f) throw clr::IoError("failed writing " + out);
}

json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw clr::IoError("cannot open " + path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw clr::ParseError(path + ": " + e.what());
    }
}

void apply_config(CLI::App* parsed, const Settings& s) {
    if (s.config.empty()) return;
    const json cfg = read_json_file(s.config);
    if (!cfg.is_object()) throw UsageError(s.config + ": config must be a JSON object");
    for (const auto& [raw_key, value] : cfg.items()) {
        std::string key = raw_key;
        for (auto& ch : key)
            if (ch == '_') ch = '-';
        bool found = false;
        for (const auto& entry : g_registry) {
            if (entry.sub != parsed || entry.key != key) continue;
            found = true;
            if (entry.opt->count() == 0) {  // command line wins
                if (value.is_string())
                    *entry.storage = value.get<std::string>();
                else
                    *entry.storage = value.dump();
            }
            break;
        }
        if (!found) throw UsageError("config key '" + raw_key + "' is not a flag of this verb");
    }
}

int run_fit(const Settings& s) {
    const clr::LoadedData ld = load_for(s);
    clr::Scaler scaler;
    clr::Dataset train = ld.data;
    if (ld.wants_scaling) {
        scaler = clr::fit_scaler(train.X);
        train.X = scaler.apply(train.X);
    }
    const clr::MethodConfig cell = build_cell(s);
    const clr::EnsemblePredictor ens =
        clr::fit_method_ensemble(train, cell, to_u64(s.seed, "--seed"));

    json doc;
    doc["format"] = "clr-model";
    doc["version"] = 1;
    doc["method"] = cell.name();
    doc["recipe"] = clr::recipe_to_json(ld.recipe);
    doc["scaler"] = ld.wants_scaling ? clr::scaler_to_json(scaler) : json(nullptr);
    doc["ensemble"] = clr::ensemble_to_json(ens);
    write_doc(doc.dump(2) + "\n", s.out.empty() ? "model.json" : s.out);
    return 0;
}

int run_predict(const Settings& s) {
    if (s.model.empty()) throw UsageError("--model is required");
    const json doc = read_json_file(s.model);
    if (doc.value("format", "") != "clr-model")
        throw clr::ParseError(s.model + ": not a model document");
    const clr::PreprocessRecipe recipe = clr::recipe_from_json(doc.at("recipe"));
    if (s.dataset.empty()) throw UsageError("--dataset is required");
    const clr::LoadedData ld = clr::load_table(s.dataset, recipe, false);

    clr::Matd X = ld.data.X;
    if (!doc.at("scaler").is_null()) X = clr::scaler_from_json(doc["scaler"]).apply(X);
    const clr::EnsemblePredictor ens = clr::ensemble_from_json(doc.at("ensemble"));
    if (ens.members.empty()) throw clr::ParseError(s.model + ": empty ensemble");
    if (X.cols() != ens.members[0].clusterwise.centroids.cols())
        throw clr::DimensionMismatch(
            s.dataset + ": " + std::to_string(X.cols()) + " features after preprocessing, model has " +
            std::to_string(ens.members[0].clusterwise.centroids.cols()));

    const std::vector<std::string>* groups =
        ld.data.has_constraints() ? &ld.data.constraint_ids : nullptr;
    const clr::Vecd pred = clr::predict_ensemble(ens, X, groups);

    std::ostringstream os;
    os.precision(17);
    os << "prediction\n";
    for (int j = 0; j < pred.size(); ++j) os << pred[j] << "\n";
    write_doc(os.str(), s.out.empty() ? "predictions.csv" : s.out);
    if (ld.has_target)
        std::cerr << "mse " << clr::mse(ld.data.y, pred) << " r2 " << clr::r2(ld.data.y, pred)
                  << "\n";
    return 0;
}

int run_cv(const Settings& s) {
    const clr::LoadedData ld = load_for(s);
    const clr::MethodConfig cell = build_cell(s);
    const clr::CvPlan plan = build_plan(s, ld.wants_scaling);
    clr::EvalReport report;
    report.dataset_name = dataset_display_name(s);
    report.plan = plan;
    report.config_echo = echo_settings(
        s, {"dataset", "recipe", "method", "k", "gamma", "clr", "weighted", "n-estimators",
            "regressor", "lambda", "classifier", "members", "max-iter", "folds", "repeats",
            "seed", "jobs"});
    report.rows.push_back(clr::cross_validate(ld.data, cell, plan));
    report.best_index = 0;
    write_doc(clr::emit_report(report, s.format), s.out);
    return 0;
}

int run_grid(const Settings& s) {
    const clr::LoadedData ld = load_for(s);
    Settings base_s = s;
    base_s.k = split_list(s.k)[0];
    base_s.gamma = split_list(s.gamma)[0];
    base_s.clr_kind = split_list(s.clr_kind)[0];
    base_s.weighted = split_list(s.weighted)[0];
    base_s.lambda = split_list(s.lambda)[0];
    const clr::MethodConfig base = build_cell(base_s);

    clr::GridAxes axes;
    for (const auto& v : split_list(s.k)) axes.ks.push_back(to_int(v, "--k"));
    for (const auto& v : split_list(s.gamma)) axes.gammas.push_back(to_double(v, "--gamma"));
    for (const auto& v : split_list(s.clr_kind)) axes.softs.push_back(soft_from_flag(v) ? 1 : 0);
    for (const auto& v : split_list(s.weighted))
        axes.weighteds.push_back(to_bool(v, "--weighted") ? 1 : 0);
    for (const auto& v : split_list(s.lambda)) axes.lambdas.push_back(to_double(v, "--lambda"));

    const clr::GridSpec grid = clr::make_grid(base, axes);
    std::cerr << "grid: " << grid.size() << " cells\n";
    const clr::CvPlan plan = build_plan(s, ld.wants_scaling);
    clr::EvalReport report = clr::grid_search(ld.data, grid, plan, dataset_display_name(s));
    report.config_echo = echo_settings(
        s, {"dataset", "recipe", "method", "k", "gamma", "clr", "weighted", "n-estimators",
            "regressor", "lambda", "classifier", "members", "max-iter", "folds", "repeats",
            "seed", "jobs", "share-labels"});
    write_doc(clr::emit_report(report, s.format), s.out);
    return 0;
}

int run_oracle(const Settings& s) {
    const clr::LoadedData ld = load_for(s);
    const clr::MethodConfig cell = build_cell(s);
    clr::HardClrConfig hc;
    hc.k = cell.k;
    hc.gamma = cell.gamma;
    hc.max_iter = cell.max_iter;
    hc.seed = to_u64(s.seed, "--seed");
    hc.regressor = cell.regressor;
    const clr::OracleResult res = clr::oracle_label_experiment(
        ld.data, to_double(s.split, "--split"), hc, cell.classifier, ld.wants_scaling);

    if (s.format == "json") {
        json j = {{"best_r2", res.best_r2},
                  {"classifier_accuracy", res.classifier_accuracy},
                  {"centroid_accuracy", res.centroid_accuracy},
                  {"classifier_label_r2", res.classifier_label_r2},
                  {"classifier_weighted_r2", res.classifier_weighted_r2},
                  {"centroid_label_r2", res.centroid_label_r2},
                  {"n_train", res.n_train},
                  {"n_test", res.n_test},
                  {"config", echo_settings(s, {"dataset", "recipe", "k", "gamma", "regressor",
                                               "lambda", "classifier", "max-iter", "seed",
                                               "split"})}};
        write_doc(j.dump(2) + "\n", s.out);
        return 0;
    }
    std::ostringstream os;
    os << "best_r2 " << res.best_r2 << "\n"
       << "classifier_accuracy " << res.classifier_accuracy << "\n"
       << "centroid_accuracy " << res.centroid_accuracy << "\n"
       << "classifier_label_r2 " << res.classifier_label_r2 << "\n"
       << "classifier_weighted_r2 " << res.classifier_weighted_r2 << "\n"
       << "centroid_label_r2 " << res.centroid_label_r2 << "\n";
    write_doc(os.str(), s.out);
    return 0;
}

int run_synth(const Settings& s) {
    clr::SyntheticSpec spec;
    try {
        spec.scenario = clr::scenario_from_string(s.scenario);
    } catch (const ClrError& e) {
        throw UsageError(e.what());
    }
    spec.n = to_int(s.n, "--n");
    spec.d = to_int(s.d, "--d");
    spec.k = to_int(s.k, "--k");
    spec.noise_sd = to_double(s.noise, "--noise");
    spec.groups_per_cluster = to_int(s.groups_per_cluster, "--groups-per-cluster");
    spec.seed = to_u64(s.seed, "--seed");
    const clr::SyntheticData data = clr::generate_synthetic(spec);

    const std::string out = s.out.empty() ? "synth.csv" : s.out;
    clr::write_dataset_csv(data.data, out);

    json truth;
    truth["format"] = "clr-synth-truth";
    truth["version"] = 1;
    truth["spec"] = {{"scenario", clr::to_string(spec.scenario)},
                     {"n", spec.n},
                     {"d", spec.d},
                     {"k", spec.k},
                     {"noise_sd", spec.noise_sd},
                     {"groups_per_cluster", spec.groups_per_cluster},
                     {"seed", spec.seed}};
    truth["labels"] = std::vector<int>(data.truth.labels.data(),
                                       data.truth.labels.data() + data.truth.labels.size());
    json models = json::array();
    for (const auto& m : data.models) {
        json w = json::array();
        for (int i = 0; i < m.w.size(); ++i) w.push_back(m.w[i]);
        models.push_back({{"w", std::move(w)}, {"b", m.b}});
    }
    truth["models"] = std::move(models);
    const std::string truth_path = s.truth.empty() ? out + ".truth.json" : s.truth;
    std::ofstream tf(truth_path);
    if (!tf) throw clr::IoError("cannot write " + truth_path);
    tf << truth.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    Settings s;
    CLI::App app{"clusterwise linear regression toolkit"};
    app.require_subcommand(1);

    CLI::App* fit = app.add_subcommand("fit", "fit a model on a full CSV and serialize it");
    CLI::App* predict = app.add_subcommand("predict", "apply a serialized model to a CSV");
    CLI::App* cv = app.add_subcommand("cv", "repeated k-fold cross-validation of one cell");
    CLI::App* grid = app.add_subcommand("grid", "grid search over comma-separated axes");
    CLI::App* oracle = app.add_subcommand("oracle", "oracle-label diagnostic experiment");
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset + truth sidecar");

    for (CLI::App* sub : {fit, predict, cv, grid, oracle, synth}) {
        reg(sub, "--config", s.config, "JSON config; command-line flags override it");
        reg(sub, "--seed", s.seed, "base random seed");
        reg(sub, "--out", s.out, "output path ('-' for stdout)");
    }
    for (CLI::App* sub : {fit, cv, grid, oracle}) {
        reg(sub, "--dataset", s.dataset, "input CSV path");
        reg(sub, "--recipe", s.recipe, "boston|abalone|auto_mpg|generic");
        reg(sub, "--target", s.target, "target column (generic recipe)");
        reg(sub, "--constraint", s.constraint, "constraint column (generic recipe)");
        reg(sub, "--name", s.name, "dataset display name in reports");
    }
    for (CLI::App* sub : {fit, cv, grid}) {
        reg(sub, "--method", s.method, "lr|clr_p|clr_c|kplane|rf");
        reg(sub, "--weighted", s.weighted, "0|1 weighted prediction");
        reg(sub, "--n-estimators", s.n_estimators, "trees of the rf baseline");
        reg(sub, "--members", s.members, "ensemble size");
    }
    for (CLI::App* sub : {fit, cv, grid, oracle, synth}) reg(sub, "--k", s.k, "cluster count");
    for (CLI::App* sub : {fit, cv, grid, oracle}) {
        reg(sub, "--gamma", s.gamma, "k-means regularization weight");
        reg(sub, "--clr", s.clr_kind, "hard|soft");
        reg(sub, "--regressor", s.regressor, "ols|ridge|lasso");
        reg(sub, "--lambda", s.lambda, "regressor penalty");
        reg(sub, "--classifier", s.classifier, "logistic|forest");
        reg(sub, "--max-iter", s.max_iter, "CLR iterations");
    }
    for (CLI::App* sub : {cv, grid}) {
        reg(sub, "--folds", s.folds, "folds per repeat");
        reg(sub, "--repeats", s.repeats, "CV repeats");
        reg(sub, "--jobs", s.jobs, "parallel fold jobs");
        reg(sub, "--format", s.format, "table|csv|json");
    }
    reg(grid, "--share-labels", s.share_labels, "reuse identical CLR fits across cells");
    reg(oracle, "--split", s.split, "held-out fraction in (0,1)");
    reg(oracle, "--format", s.format, "table|json");
    reg(predict, "--model", s.model, "serialized model path");
    reg(predict, "--dataset", s.dataset, "input CSV path");
    reg(synth, "--scenario", s.scenario,
        "planted_lines|indistinguishable_pair|grouped_mixture");
    reg(synth, "--n", s.n, "rows");
    reg(synth, "--d", s.d, "features");
    reg(synth, "--noise", s.noise, "noise standard deviation");
    reg(synth, "--groups-per-cluster", s.groups_per_cluster, "grouped_mixture groups per cluster");
    reg(synth, "--truth", s.truth, "truth sidecar path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        CLI::App* parsed = app.get_subcommands().at(0);
        apply_config(parsed, s);
        if (parsed == fit) return run_fit(s);
        if (parsed == predict) return run_predict(s);
        if (parsed == cv) return run_cv(s);
        if (parsed == grid) return run_grid(s);
        if (parsed == oracle) return run_oracle(s);
        if (parsed == synth) return run_synth(s);
        throw UsageError("no verb given");
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const ClrError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
