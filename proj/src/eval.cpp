#include "clr/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace clr {

using nlohmann::json;

namespace {

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, v);
    return buf;
}

}  // namespace

std::string MethodConfig::name() const {
    std::ostringstream os;
    os << to_string(method);
    switch (method) {
        case Method::lr:
            if (regressor.kind != RegressorSpec::Kind::ols)
                os << " " << to_string(regressor.kind) << " l=" << fmt("%g", regressor.lambda);
            break;
        case Method::rf:
            os << " t=" << n_estimators;
            break;
        case Method::svr_external:
            os << " (external)";
            break;
        case Method::clr_p:
        case Method::clr_c:
        case Method::kplane:
            os << " k=" << k << " g=" << fmt("%g", gamma) << (soft ? " soft" : " hard");
            if (method != Method::clr_c) os << (weighted ? " wt" : " lbl");
            if (method == Method::clr_p)
                os << " " << (classifier.kind == ClassifierSpec::Kind::random_forest ? "rf"
                                                                                     : "logit");
            if (regressor.kind != RegressorSpec::Kind::ols)
                os << " " << to_string(regressor.kind) << " l=" << fmt("%g", regressor.lambda);
            if (n_members > 1) os << " ens=" << n_members;
            break;
    }
    return os.str();
}

MethodConfig::Method method_from_string(const std::string& s) {
    if (s == "lr") return MethodConfig::Method::lr;
    if (s == "clr_p") return MethodConfig::Method::clr_p;
    if (s == "clr_c") return MethodConfig::Method::clr_c;
    if (s == "kplane") return MethodConfig::Method::kplane;
    if (s == "rf") return MethodConfig::Method::rf;
    if (s == "svr_external") return MethodConfig::Method::svr_external;
    throw InvalidSpec("unknown method: " + s);
}

std::string to_string(MethodConfig::Method m) {
    switch (m) {
        case MethodConfig::Method::lr: return "lr";
        case MethodConfig::Method::clr_p: return "clr_p";
        case MethodConfig::Method::clr_c: return "clr_c";
        case MethodConfig::Method::kplane: return "kplane";
        case MethodConfig::Method::rf: return "rf";
        case MethodConfig::Method::svr_external: return "svr_external";
    }
    return "lr";
}

std::vector<std::vector<int>> make_folds(int n, int n_folds, std::uint64_t seed) {
    if (n_folds < 2) throw FoldTooSmall("need at least 2 folds");
    if (n_folds > n) throw FoldTooSmall("more folds than rows");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<int>> folds(n_folds);
    const int base = n / n_folds, rem = n % n_folds;
    int at = 0;
    for (int f = 0; f < n_folds; ++f) {
        const int len = base + (f < rem ? 1 : 0);
        folds[f].assign(order.begin() + at, order.begin() + at + len);
        at += len;
    }
    return folds;
}

namespace {

struct CachedClrFit {
    ClusterwiseModel cm;
    Vecd pi;  // empty for hard fits
};

struct FitCache {
    std::mutex mu;
    std::unordered_map<std::string, std::shared_ptr<const CachedClrFit>> map;
};

std::string clr_cache_key(const MethodConfig& cfg, std::uint64_t member_seed) {
    std::ostringstream os;
    os << cfg.k << '|' << cfg.gamma << '|' << cfg.soft << '|' << cfg.max_iter << '|'
       << to_string(cfg.regressor.kind) << '|' << cfg.regressor.lambda << '|'
       << (cfg.method == MethodConfig::Method::clr_c) << '|' << member_seed;
    return os.str();
}

std::shared_ptr<const CachedClrFit> fit_clr_member(const Dataset& train, const MethodConfig& cfg,
                                                   std::uint64_t member_seed,
                                                   const ConstraintSet* constraints) {
    HardClrConfig hc;
    hc.k = cfg.k;
    hc.gamma = cfg.gamma;
    hc.max_iter = cfg.max_iter;
    hc.seed = member_seed;
    hc.regressor = cfg.regressor;
    auto out = std::make_shared<CachedClrFit>();
    if (cfg.soft) {
        SoftClrFit sf = fit_soft_clr(train, hc);
        out->cm.config = hc;
        out->cm.models = sf.params.models;
        out->cm.centroids = sf.params.mu;
        out->cm.train_partition = harden(sf.q);
        out->cm.sizes.assign(cfg.k, 0);
        for (int j = 0; j < out->cm.train_partition.labels.size(); ++j)
            ++out->cm.sizes[out->cm.train_partition.labels[j]];
        out->pi = sf.params.pi;
    } else {
        out->cm = fit_hard_clr(train, hc, constraints);
    }
    return out;
}

ClrPredictor make_member_predictor(const CachedClrFit& fit, const MethodConfig& cfg,
                                   const Matd& Xtr, const std::vector<std::string>& tokens_tr,
                                   std::uint64_t member_seed) {
    ClrPredictor pred;
    pred.clusterwise = fit.cm;
    pred.mixture_pi = fit.pi;

    switch (cfg.method) {
        case MethodConfig::Method::kplane:
            if (cfg.weighted) {
                pred.strategy.mode = PredictionStrategy::Mode::weighted;
                pred.strategy.weight_source = PredictionStrategy::WeightSource::kplane_distance;
            } else {
                pred.strategy.mode = PredictionStrategy::Mode::label;
                pred.strategy.label_source = PredictionStrategy::LabelSource::nearest_centroid;
            }
            return pred;
        case MethodConfig::Method::clr_p: {
            ClassifierSpec cls = cfg.classifier;
            cls.forest.seed = mix_seed(member_seed, 0x9e3779b97f4a7c15ull);
            pred.predictor = fit_classifier(Xtr, fit.cm.train_partition, cls);
            if (cfg.weighted) {
                pred.strategy.mode = PredictionStrategy::Mode::weighted;
                pred.strategy.weight_source = PredictionStrategy::WeightSource::classifier_proba;
            } else {
                pred.strategy.mode = PredictionStrategy::Mode::label;
                pred.strategy.label_source = PredictionStrategy::LabelSource::classifier;
            }
            return pred;
        }
        case MethodConfig::Method::clr_c: {
            std::unordered_map<std::string, int> table;
            for (std::size_t j = 0; j < tokens_tr.size(); ++j)
                table.emplace(tokens_tr[j], fit.cm.train_partition.labels[static_cast<int>(j)]);
            pred.predictor = constraint_lookup_predictor(std::move(table), cfg.k);
            pred.strategy.mode = PredictionStrategy::Mode::label;
            pred.strategy.label_source = PredictionStrategy::LabelSource::constraint_lookup;
            return pred;
        }
        default: break;
    }
    throw InvalidSpec("make_member_predictor: not a CLR-family method");
}

Vecd predict_cell_member(const CachedClrFit& fit, const MethodConfig& cfg, const Matd& Xtr,
                         const std::vector<std::string>& tokens_tr, const Matd& Xte,
                         const std::vector<std::string>& tokens_te, std::uint64_t member_seed) {
    const ClrPredictor pred = make_member_predictor(fit, cfg, Xtr, tokens_tr, member_seed);
    if (cfg.method == MethodConfig::Method::clr_c) return predict(pred, Xte, &tokens_te);
    return predict(pred, Xte);
}

Vecd fit_predict_fold(const Dataset& data, const MethodConfig& cfg, const std::vector<int>& train,
                      const std::vector<int>& test, std::uint64_t fold_seed, bool scale,
                      FitCache* cache) {
    const Eigen::Index d = data.X.cols();
    Matd Xtr(static_cast<int>(train.size()), d), Xte(static_cast<int>(test.size()), d);
    Vecd ytr(static_cast<int>(train.size()));
    for (std::size_t j = 0; j < train.size(); ++j) {
        Xtr.row(static_cast<int>(j)) = data.X.row(train[j]);
        ytr[static_cast<int>(j)] = data.y[train[j]];
    }
    for (std::size_t j = 0; j < test.size(); ++j) Xte.row(static_cast<int>(j)) = data.X.row(test[j]);
    if (scale) {
        const Scaler sc = fit_scaler(Xtr);
        Xtr = sc.apply(Xtr);
        Xte = sc.apply(Xte);
    }

    switch (cfg.method) {
        case MethodConfig::Method::lr: {
            const LinearModel m = fit_linear(Xtr, ytr, cfg.regressor);
            return predict_affine(Xte, m.w, m.b);
        }
        case MethodConfig::Method::rf: {
            ClassifierSpec::Forest f = cfg.classifier.forest;
            f.n_trees = cfg.n_estimators;
            f.seed = fold_seed;
            return fit_forest_regressor(Xtr, ytr, f).predict(Xte);
        }
        case MethodConfig::Method::clr_p:
        case MethodConfig::Method::clr_c:
        case MethodConfig::Method::kplane: {
            std::vector<std::string> tokens_tr, tokens_te;
            const ConstraintSet* cs_ptr = nullptr;
            ConstraintSet cs;
            if (cfg.method == MethodConfig::Method::clr_c) {
                if (!data.has_constraints())
                    throw InvalidSpec("clr_c needs a dataset with constraint ids");
                tokens_tr.reserve(train.size());
                tokens_te.reserve(test.size());
                for (int j : train) tokens_tr.push_back(data.constraint_ids[j]);
                for (int j : test) tokens_te.push_back(data.constraint_ids[j]);
                cs = ConstraintSet::from_tokens(tokens_tr);
                cs_ptr = &cs;
            }
            Dataset dtr{Xtr, ytr, tokens_tr};
            if (cfg.n_members < 1) throw InvalidSpec("n_members must be >= 1");
            Vecd acc = Vecd::Zero(Xte.rows());
            for (int m = 0; m < cfg.n_members; ++m) {
                const std::uint64_t member_seed = mix_seed(fold_seed, static_cast<std::uint64_t>(m));
                std::shared_ptr<const CachedClrFit> fit;
                if (cache != nullptr) {
                    const std::string key = clr_cache_key(cfg, member_seed);
                    {
                        std::lock_guard<std::mutex> lock(cache->mu);
                        auto it = cache->map.find(key);
                        if (it != cache->map.end()) fit = it->second;
                    }
                    if (!fit) {
                        fit = fit_clr_member(dtr, cfg, member_seed, cs_ptr);
                        std::lock_guard<std::mutex> lock(cache->mu);
                        cache->map.emplace(key, fit);
                    }
                } else {
                    fit = fit_clr_member(dtr, cfg, member_seed, cs_ptr);
                }
                acc += predict_cell_member(*fit, cfg, Xtr, tokens_tr, Xte, tokens_te, member_seed);
            }
            return acc / static_cast<double>(cfg.n_members);
        }
        default: break;
    }
    throw InvalidSpec("unsupported method in fold fit");
}

double sample_std(const std::vector<double>& v) {
    const int n = static_cast<int>(v.size());
    if (n < 2) return 0.0;
    double mean = 0;
    for (double x : v) mean += x;
    mean /= n;
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / (n - 1));
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

EvalRow cross_validate_impl(const Dataset& data, const MethodConfig& cfg, const CvPlan& plan,
                            FitCache* cache) {
    EvalRow row;
    row.cell = cfg;
    if (cfg.method == MethodConfig::Method::svr_external) {
        row.mean_mse = cfg.external_mse;
        row.std_mse = cfg.external_mse_std;
        row.mean_r2 = cfg.external_r2;
        row.std_r2 = cfg.external_r2_std;
        return row;
    }
    data.validate();
    const int n = static_cast<int>(data.n());
    if (plan.n_repeats < 1) throw InvalidSpec("n_repeats must be >= 1");

    struct Job {
        int rep, fold;
    };
    std::vector<std::vector<std::vector<int>>> folds(plan.n_repeats);
    std::vector<Job> jobs;
    for (int rep = 0; rep < plan.n_repeats; ++rep) {
        folds[rep] = make_folds(n, plan.n_folds, mix_seed(plan.seed, static_cast<std::uint64_t>(rep)));
        for (int f = 0; f < plan.n_folds; ++f) jobs.push_back({rep, f});
    }

    Matd pooled(n, plan.n_repeats);
    std::vector<double> fold_mse(jobs.size()), fold_r2(jobs.size());
    std::mutex wall_mu;
    double wall = 0.0;

    auto run_job = [&](std::size_t ji) {
        const Job job = jobs[ji];
        const auto& test = folds[job.rep][job.fold];
        std::vector<int> train;
        train.reserve(n - static_cast<int>(test.size()));
        for (int f = 0; f < plan.n_folds; ++f)
            if (f != job.fold) train.insert(train.end(), folds[job.rep][f].begin(),
                                            folds[job.rep][f].end());
        const std::uint64_t fold_seed =
            mix_seed(mix_seed(plan.seed, static_cast<std::uint64_t>(job.rep)),
                     static_cast<std::uint64_t>(job.fold) + 1);
        const auto t0 = std::chrono::steady_clock::now();
        const Vecd pred = fit_predict_fold(data, cfg, train, test, fold_seed, plan.scale, cache);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        {
            std::lock_guard<std::mutex> lock(wall_mu);
            wall += secs;
        }
        Vecd ytest(static_cast<int>(test.size()));
        for (std::size_t j = 0; j < test.size(); ++j) {
            pooled(test[j], job.rep) = pred[static_cast<int>(j)];
            ytest[static_cast<int>(j)] = data.y[test[j]];
        }
        fold_mse[ji] = mse(ytest, pred);
        try {
            fold_r2[ji] = r2(ytest, pred);
        } catch (const ZeroVariance&) {
            fold_r2[ji] = 0.0;  // constant-target fold, R^2 undefined
        }
    };

    const int workers = std::min<int>(std::max(plan.jobs, 1), static_cast<int>(jobs.size()));
    if (workers <= 1) {
        for (std::size_t ji = 0; ji < jobs.size(); ++ji) run_job(ji);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t ji = next.fetch_add(1); ji < jobs.size(); ji = next.fetch_add(1))
                    run_job(ji);
            });
        for (auto& t : pool) t.join();
    }

    for (int rep = 0; rep < plan.n_repeats; ++rep) {
        const Vecd rep_pred = pooled.col(rep);
        row.repeat_mse.push_back(mse(data.y, rep_pred));
        try {
            row.repeat_r2.push_back(r2(data.y, rep_pred));
        } catch (const ZeroVariance&) {
            row.repeat_r2.push_back(0.0);
        }
    }
    row.fold_mse = std::move(fold_mse);
    row.fold_r2 = std::move(fold_r2);
    row.mean_mse = mean_of(row.repeat_mse);
    row.std_mse = sample_std(row.repeat_mse);
    row.mean_r2 = mean_of(row.repeat_r2);
    row.std_r2 = sample_std(row.repeat_r2);
    row.wall_seconds = wall;
    return row;
}

bool better_cell(const EvalRow& a, const EvalRow& b) {
    // lower MSE wins; near-ties prefer smaller k, then smaller gamma
    if (a.mean_mse < b.mean_mse - 1e-12) return true;
    if (b.mean_mse < a.mean_mse - 1e-12) return false;
    if (a.cell.k != b.cell.k) return a.cell.k < b.cell.k;
    return a.cell.gamma < b.cell.gamma;
}

}  // namespace

EvalRow cross_validate(const Dataset& data, const MethodConfig& cfg, const CvPlan& plan) {
    if (plan.share_labels) {
        FitCache cache;
        return cross_validate_impl(data, cfg, plan, &cache);
    }
    return cross_validate_impl(data, cfg, plan, nullptr);
}

GridSpec make_grid(const MethodConfig& base, const GridAxes& axes) {
    auto or_default = [](auto axis, auto fallback) {
        if (axis.empty()) axis.push_back(fallback);
        return axis;
    };
    const auto ks = or_default(axes.ks, base.k);
    const auto gammas = or_default(axes.gammas, base.gamma);
    const auto softs = or_default(axes.softs, static_cast<int>(base.soft));
    const auto weighteds = or_default(axes.weighteds, static_cast<int>(base.weighted));
    const auto lambdas = or_default(axes.lambdas, base.regressor.lambda);

    GridSpec grid;
    for (int k : ks)
        for (double g : gammas)
            for (int s : softs)
                for (int w : weighteds)
                    for (double l : lambdas) {
                        MethodConfig cell = base;
                        cell.k = k;
                        cell.gamma = g;
                        cell.soft = s != 0;
                        cell.weighted = w != 0;
                        cell.regressor.lambda = l;
                        grid.cells.push_back(cell);
                    }
    return grid;
}

EvalReport grid_search(const Dataset& data, const GridSpec& grid, const CvPlan& plan,
                       const std::string& dataset_name) {
    if (grid.cells.empty()) throw InvalidSpec("empty grid");
    EvalReport report;
    report.dataset_name = dataset_name;
    report.plan = plan;
    FitCache cache;
    FitCache* cache_ptr = plan.share_labels ? &cache : nullptr;
    for (const auto& cell : grid.cells)
        report.rows.push_back(cross_validate_impl(data, cell, plan, cache_ptr));
    report.best_index = 0;
    for (int i = 1; i < static_cast<int>(report.rows.size()); ++i)
        if (better_cell(report.rows[i], report.rows[report.best_index])) report.best_index = i;
    return report;
}

std::vector<std::pair<MethodConfig::Method, int>> best_per_method(const EvalReport& report) {
    std::vector<std::pair<MethodConfig::Method, int>> best;
    for (int i = 0; i < static_cast<int>(report.rows.size()); ++i) {
        const auto m = report.rows[i].cell.method;
        auto it = std::find_if(best.begin(), best.end(),
                               [&](const auto& p) { return p.first == m; });
        if (it == best.end())
            best.emplace_back(m, i);
        else if (better_cell(report.rows[i], report.rows[it->second]))
            it->second = i;
    }
    return best;
}

EnsemblePredictor fit_method_ensemble(const Dataset& train, const MethodConfig& cfg_in,
                                      std::uint64_t seed) {
    MethodConfig cfg = cfg_in;
    if (cfg.method == MethodConfig::Method::lr) {
        cfg.method = MethodConfig::Method::kplane;  // k=1 label mode is plain lr
        cfg.k = 1;
        cfg.gamma = 0.0;
        cfg.soft = false;
        cfg.weighted = false;
        cfg.n_members = 1;
        cfg.max_iter = 1;
    }
    if (cfg.method != MethodConfig::Method::kplane && cfg.method != MethodConfig::Method::clr_p &&
        cfg.method != MethodConfig::Method::clr_c)
        throw InvalidSpec("fit_method_ensemble supports lr, kplane, clr_p, clr_c");
    if (cfg.n_members < 1) throw InvalidSpec("n_members must be >= 1");

    ConstraintSet cs;
    const ConstraintSet* cs_ptr = nullptr;
    if (cfg.method == MethodConfig::Method::clr_c) {
        if (!train.has_constraints()) throw InvalidSpec("clr_c needs constraint ids");
        cs = ConstraintSet::from_tokens(train.constraint_ids);
        cs_ptr = &cs;
    }
    EnsemblePredictor ens;
    for (int m = 0; m < cfg.n_members; ++m) {
        const std::uint64_t member_seed = mix_seed(seed, static_cast<std::uint64_t>(m));
        auto fit = fit_clr_member(train, cfg, member_seed, cs_ptr);
        ens.members.push_back(
            make_member_predictor(*fit, cfg, train.X, train.constraint_ids, member_seed));
    }
    return ens;
}

OracleResult oracle_label_experiment(const Dataset& data, double test_fraction,
                                     const HardClrConfig& config, const ClassifierSpec& classifier,
                                     bool scale) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw InvalidSpec("test_fraction must be inside (0, 1)");
    data.validate();
    const int n = static_cast<int>(data.n());
    const int n_test = std::max(1, static_cast<int>(std::lround(test_fraction * n)));
    if (n_test >= n) throw InsufficientData("oracle experiment: empty train side");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix_seed(config.seed, 0x0bacd1a65e5e5e5eull));
    std::shuffle(order.begin(), order.end(), rng);
    const std::vector<int> test(order.begin(), order.begin() + n_test);
    const std::vector<int> train(order.begin() + n_test, order.end());

    Matd Xtr(static_cast<int>(train.size()), data.X.cols());
    for (std::size_t j = 0; j < train.size(); ++j)
        Xtr.row(static_cast<int>(j)) = data.X.row(train[j]);
    Matd Xall = data.X;
    if (scale) {
        const Scaler sc = fit_scaler(Xtr);
        Xall = sc.apply(Xall);
        for (std::size_t j = 0; j < train.size(); ++j)
            Xtr.row(static_cast<int>(j)) = Xall.row(train[j]);
    }

    Dataset all{Xall, data.y, {}};
    const ClusterwiseModel cm = fit_hard_clr(all, config);
    const VecXi& labels = cm.train_partition.labels;

    Matd Xte(n_test, Xall.cols());
    Vecd yte(n_test);
    VecXi oracle_te(n_test);
    for (int j = 0; j < n_test; ++j) {
        Xte.row(j) = Xall.row(test[j]);
        yte[j] = data.y[test[j]];
        oracle_te[j] = labels[test[j]];
    }

    Matd P(n_test, config.k);
    for (int i = 0; i < config.k; ++i) P.col(i) = predict_affine(Xte, cm.models[i].w, cm.models[i].b);

    OracleResult out;
    out.n_train = static_cast<int>(train.size());
    out.n_test = n_test;

    Vecd best_pred(n_test);
    for (int j = 0; j < n_test; ++j) best_pred[j] = P(j, oracle_te[j]);
    out.best_r2 = r2(yte, best_pred);

    Partition train_part;
    train_part.k = config.k;
    train_part.labels = VecXi(static_cast<int>(train.size()));
    for (std::size_t j = 0; j < train.size(); ++j)
        train_part.labels[static_cast<int>(j)] = labels[train[j]];

    const LabelPredictor cls = fit_classifier(Xtr, train_part, classifier);
    const VecXi cls_labels = predict_label(cls, Xte);
    const Matd cls_proba = predict_proba(cls, Xte);

    const LabelPredictor cent = nearest_centroid_predictor(cm.centroids);
    const VecXi cent_labels = predict_label(cent, Xte);

    int cls_hits = 0, cent_hits = 0;
    Vecd cls_pred(n_test), cent_pred(n_test);
    for (int j = 0; j < n_test; ++j) {
        cls_hits += cls_labels[j] == oracle_te[j];
        cent_hits += cent_labels[j] == oracle_te[j];
        cls_pred[j] = P(j, cls_labels[j]);
        cent_pred[j] = P(j, cent_labels[j]);
    }
    out.classifier_accuracy = static_cast<double>(cls_hits) / n_test;
    out.centroid_accuracy = static_cast<double>(cent_hits) / n_test;
    out.classifier_label_r2 = r2(yte, cls_pred);
    out.centroid_label_r2 = r2(yte, cent_pred);
    out.classifier_weighted_r2 = r2(yte, (cls_proba.array() * P.array()).rowwise().sum().matrix());
    return out;
}

namespace {

json cell_to_json(const MethodConfig& c) {
    json j;
    j["method"] = to_string(c.method);
    j["k"] = c.k;
    j["gamma"] = c.gamma;
    j["soft"] = c.soft;
    j["max_iter"] = c.max_iter;
    j["regressor"] = {{"kind", to_string(c.regressor.kind)}, {"lambda", c.regressor.lambda}};
    j["classifier"] = {{"kind", to_string(c.classifier.kind)},
                       {"alpha", c.classifier.logistic.alpha},
                       {"n_trees", c.classifier.forest.n_trees},
                       {"max_depth", c.classifier.forest.max_depth},
                       {"min_samples_split", c.classifier.forest.min_samples_split},
                       {"min_samples_leaf", c.classifier.forest.min_samples_leaf},
                       {"max_features", c.classifier.forest.max_features}};
    j["weighted"] = c.weighted;
    j["n_members"] = c.n_members;
    j["n_estimators"] = c.n_estimators;
    if (c.method == MethodConfig::Method::svr_external)
        j["external"] = {{"mse", c.external_mse},
                         {"mse_std", c.external_mse_std},
                         {"r2", c.external_r2},
                         {"r2_std", c.external_r2_std}};
    return j;
}

MethodConfig cell_from_json(const json& j) {
    MethodConfig c;
    c.method = method_from_string(j.at("method").get<std::string>());
    c.k = j.at("k").get<int>();
    c.gamma = j.at("gamma").get<double>();
    c.soft = j.at("soft").get<bool>();
    c.max_iter = j.at("max_iter").get<int>();
    c.regressor.kind = regressor_kind_from_string(j.at("regressor").at("kind").get<std::string>());
    c.regressor.lambda = j.at("regressor").at("lambda").get<double>();
    const auto& cj = j.at("classifier");
    c.classifier.kind = classifier_kind_from_string(cj.at("kind").get<std::string>());
    c.classifier.logistic.alpha = cj.at("alpha").get<double>();
    c.classifier.forest.n_trees = cj.at("n_trees").get<int>();
    c.classifier.forest.max_depth = cj.at("max_depth").get<int>();
    c.classifier.forest.min_samples_split = cj.at("min_samples_split").get<int>();
    c.classifier.forest.min_samples_leaf = cj.at("min_samples_leaf").get<int>();
    c.classifier.forest.max_features = cj.at("max_features").get<int>();
    c.weighted = j.at("weighted").get<bool>();
    c.n_members = j.at("n_members").get<int>();
    c.n_estimators = j.at("n_estimators").get<int>();
    if (j.contains("external")) {
        c.external_mse = j["external"].at("mse").get<double>();
        c.external_mse_std = j["external"].at("mse_std").get<double>();
        c.external_r2 = j["external"].at("r2").get<double>();
        c.external_r2_std = j["external"].at("r2_std").get<double>();
    }
    return c;
}

}  // namespace

json report_to_json(const EvalReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows) {
        json rj;
        rj["name"] = r.cell.name();
        rj["cell"] = cell_to_json(r.cell);
        rj["mean_mse"] = r.mean_mse;
        rj["std_mse"] = r.std_mse;
        rj["mean_r2"] = r.mean_r2;
        rj["std_r2"] = r.std_r2;
        rj["wall_seconds"] = r.wall_seconds;
        rj["repeat_mse"] = r.repeat_mse;
        rj["repeat_r2"] = r.repeat_r2;
        rj["fold_mse"] = r.fold_mse;
        rj["fold_r2"] = r.fold_r2;
        rows.push_back(std::move(rj));
    }
    json j;
    j["format"] = "clr-report";
    j["version"] = 1;
    j["dataset"] = report.dataset_name;
    j["plan"] = {{"n_folds", report.plan.n_folds},
                 {"n_repeats", report.plan.n_repeats},
                 {"seed", report.plan.seed},
                 {"scale", report.plan.scale},
                 {"jobs", report.plan.jobs},
                 {"share_labels", report.plan.share_labels}};
    j["config_echo"] = report.config_echo;
    j["best_index"] = report.best_index;
    j["rows"] = std::move(rows);
    return j;
}

EvalReport report_from_json(const json& j) {
    if (j.value("format", "") != "clr-report") throw ParseError("not a report document");
    EvalReport report;
    report.dataset_name = j.at("dataset").get<std::string>();
    const auto& pj = j.at("plan");
    report.plan.n_folds = pj.at("n_folds").get<int>();
    report.plan.n_repeats = pj.at("n_repeats").get<int>();
    report.plan.seed = pj.at("seed").get<std::uint64_t>();
    report.plan.scale = pj.at("scale").get<bool>();
    report.plan.jobs = pj.at("jobs").get<int>();
    report.plan.share_labels = pj.at("share_labels").get<bool>();
    report.config_echo = j.at("config_echo").get<std::string>();
    report.best_index = j.at("best_index").get<int>();
    for (const auto& rj : j.at("rows")) {
        EvalRow r;
        r.cell = cell_from_json(rj.at("cell"));
        r.mean_mse = rj.at("mean_mse").get<double>();
        r.std_mse = rj.at("std_mse").get<double>();
        r.mean_r2 = rj.at("mean_r2").get<double>();
        r.std_r2 = rj.at("std_r2").get<double>();
        r.wall_seconds = rj.at("wall_seconds").get<double>();
        r.repeat_mse = rj.at("repeat_mse").get<std::vector<double>>();
        r.repeat_r2 = rj.at("repeat_r2").get<std::vector<double>>();
        r.fold_mse = rj.at("fold_mse").get<std::vector<double>>();
        r.fold_r2 = rj.at("fold_r2").get<std::vector<double>>();
        report.rows.push_back(std::move(r));
    }
    return report;
}

std::string emit_report(const EvalReport& report, const std::string& format) {
    if (report.rows.empty()) throw InvalidSpec("emit_report: empty report");
    if (format == "json") return report_to_json(report).dump(2) + "\n";

    if (format == "csv") {
        std::ostringstream os;
        os << "name,method,k,gamma,soft,weighted,regressor,lambda,n_members,n_estimators,"
              "mean_mse,std_mse,mean_r2,std_r2,wall_seconds,best\n";
        for (int i = 0; i < static_cast<int>(report.rows.size()); ++i) {
            const auto& r = report.rows[i];
            const auto& c = r.cell;
            os << '"' << c.name() << "\"," << to_string(c.method) << ',' << c.k << ','
               << fmt("%g", c.gamma) << ',' << (c.soft ? 1 : 0) << ',' << (c.weighted ? 1 : 0)
               << ',' << to_string(c.regressor.kind) << ',' << fmt("%g", c.regressor.lambda) << ','
               << c.n_members << ',' << c.n_estimators << ',' << fmt("%.6f", r.mean_mse) << ','
               << fmt("%.6f", r.std_mse) << ',' << fmt("%.6f", r.mean_r2) << ','
               << fmt("%.6f", r.std_r2) << ',' << fmt("%.3f", r.wall_seconds) << ','
               << (i == report.best_index ? 1 : 0) << "\n";
        }
        return os.str();
    }

    if (format == "table" || format == "table-text") {
        const auto best = best_per_method(report);
        auto is_method_best = [&](int i) {
            for (const auto& [m, idx] : best)
                if (idx == i) return true;
            return false;
        };
        std::size_t name_w = 6;
        for (const auto& r : report.rows) name_w = std::max(name_w, r.cell.name().size());
        std::ostringstream os;
        os << "# dataset: " << report.dataset_name << "  folds: " << report.plan.n_folds
           << "  repeats: " << report.plan.n_repeats << "  seed: " << report.plan.seed << "\n";
        if (!report.config_echo.empty()) os << "# config: " << report.config_echo << "\n";
        os << "  " << std::string(name_w, ' ') << "  "
           << "MSE               R2                time(s)\n";
        for (int i = 0; i < static_cast<int>(report.rows.size()); ++i) {
            const auto& r = report.rows[i];
            std::string name = r.cell.name();
            name.resize(name_w, ' ');
            os << (is_method_best(i) ? "* " : "  ") << name << "  " << fmt("%8.2f", r.mean_mse)
               << " +- " << fmt("%-5.2f", r.std_mse) << "  " << fmt("%6.3f", r.mean_r2) << " +- "
               << fmt("%-6.3f", r.std_r2) << "  " << fmt("%8.2f", r.wall_seconds) << "\n";
        }
        return os.str();
    }
    throw InvalidSpec("unknown report format: " + format);
}

}  // namespace clr
