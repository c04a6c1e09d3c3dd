#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "clr/classifiers.hpp"
#include "clr/data_io.hpp"
#include "clr/hard_clr.hpp"
#include "clr/predictors.hpp"
#include "clr/soft_clr.hpp"

namespace clr {

struct CvPlan {
    int n_folds = 10;
    int n_repeats = 5;
    std::uint64_t seed = 0;
    bool scale = true;  // per-fold [-1,1] scaling fitted on training rows only
    int jobs = 1;
    // reuse identical CLR fits across cells of one grid (same k, gamma, kind,
    // regressor, member seed); purely a caching knob, reports are unchanged
    bool share_labels = false;
};

struct MethodConfig {
    enum class Method { lr, clr_p, clr_c, kplane, rf, svr_external };
    Method method = Method::lr;

    int k = 2;
    double gamma = 0.0;
    bool soft = false;
    int max_iter = 5;
    RegressorSpec regressor;
    ClassifierSpec classifier;  // clr_p label model
    bool weighted = false;
    int n_members = 1;

    int n_estimators = 20;  // rf baseline

    // quoted numbers for comparisons run outside this toolkit (e.g. SVR)
    double external_mse = 0.0, external_mse_std = 0.0;
    double external_r2 = 0.0, external_r2_std = 0.0;

    std::string name() const;
};

MethodConfig::Method method_from_string(const std::string& s);
std::string to_string(MethodConfig::Method m);

struct EvalRow {
    MethodConfig cell;
    double mean_mse = 0.0, std_mse = 0.0;
    double mean_r2 = 0.0, std_r2 = 0.0;
    double wall_seconds = 0.0;
    std::vector<double> repeat_mse, repeat_r2;  // pooled out-of-fold, one per repeat
    std::vector<double> fold_mse, fold_r2;      // repeat-major fold-level scores
};

struct EvalReport {
    std::string dataset_name;
    CvPlan plan;
    std::vector<EvalRow> rows;
    int best_index = -1;
    std::string config_echo;  // resolved invocation, embedded for provenance
};

// contiguous blocks of one seeded shuffle; sizes differ by at most one
std::vector<std::vector<int>> make_folds(int n, int n_folds, std::uint64_t seed);

EvalRow cross_validate(const Dataset& data, const MethodConfig& cfg, const CvPlan& plan);

struct GridSpec {
    std::vector<MethodConfig> cells;
    std::size_t size() const { return cells.size(); }
};

struct GridAxes {
    std::vector<int> ks;
    std::vector<double> gammas;
    std::vector<int> softs;      // 0 hard, 1 soft
    std::vector<int> weighteds;  // 0 label, 1 weighted
    std::vector<double> lambdas;
};

// cartesian product over the non-empty axes, base values elsewhere;
// cell order is k, gamma, soft, weighted, lambda (outer to inner)
GridSpec make_grid(const MethodConfig& base, const GridAxes& axes);

EvalReport grid_search(const Dataset& data, const GridSpec& grid, const CvPlan& plan,
                       const std::string& dataset_name);

// best row of each method present, preferring lower mean MSE, then smaller k,
// then smaller gamma; .first is the method, .second the row index
std::vector<std::pair<MethodConfig::Method, int>> best_per_method(const EvalReport& report);

struct OracleResult {
    double best_r2 = 0.0;  // oracle-label assignment on the held-out half
    double classifier_accuracy = 0.0;
    double centroid_accuracy = 0.0;
    double classifier_label_r2 = 0.0;
    double classifier_weighted_r2 = 0.0;
    double centroid_label_r2 = 0.0;
    int n_train = 0, n_test = 0;
};

// fits hard CLR on train+test jointly, then measures how well the oracle
// labels can be predicted from x and what that costs in test R^2
OracleResult oracle_label_experiment(const Dataset& data, double test_fraction,
                                     const HardClrConfig& config, const ClassifierSpec& classifier,
                                     bool scale = true);

// one fitted predictor per member (seeds mix_seed(seed, m)) on the whole
// training set; lr runs as a k=1 hard CLR so every method serializes the
// same way
EnsemblePredictor fit_method_ensemble(const Dataset& train, const MethodConfig& cfg,
                                      std::uint64_t seed);

// format: table (alias table-text), csv, json
std::string emit_report(const EvalReport& report, const std::string& format);
nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

}  // namespace clr
