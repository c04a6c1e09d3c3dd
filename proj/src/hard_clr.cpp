#include "clr/hard_clr.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace clr {

namespace {

// per-point criterion matrix: crit(j,i) = r_ji^2 + gamma * |x_j - c_i|^2
Matd criterion_matrix(const Dataset& ds, const std::vector<LinearModel>& models,
                      const Matd& centroids, double gamma) {
    const Eigen::Index n = ds.n();
    const int k = static_cast<int>(models.size());
    Matd crit(n, k);
    for (int i = 0; i < k; ++i) {
        Vecd resid = ds.y - predict_linear(models[i], ds.X);
        crit.col(i) = resid.array().square().matrix();
        if (gamma > 0.0)
            crit.col(i) += gamma * (ds.X.rowwise() - centroids.row(i)).rowwise().squaredNorm();
    }
    return crit;
}

int argmin_row(const Matd& crit, Eigen::Index j) {
    int best = 0;
    double best_v = crit(j, 0);
    for (int i = 1; i < crit.cols(); ++i)
        if (crit(j, i) < best_v) { best_v = crit(j, i); best = i; }
    return best;
}

std::vector<int> count_sizes(const VecXi& labels, int k) {
    std::vector<int> s(static_cast<size_t>(k), 0);
    for (Eigen::Index j = 0; j < labels.size(); ++j) ++s[static_cast<size_t>(labels[j])];
    return s;
}

struct FitState {
    std::vector<LinearModel> models;
    Matd centroids;
};

void refit_clusters(const Dataset& ds, const VecXi& labels, int k, const RegressorSpec& spec,
                    FitState& st) {
    const Eigen::Index d = ds.d();
    if (st.centroids.rows() != k) st.centroids = Matd::Zero(k, d);
    if (st.models.size() != static_cast<size_t>(k)) st.models.assign(static_cast<size_t>(k), LinearModel{Vecd::Zero(d), 0.0});
    std::vector<std::vector<int>> members(static_cast<size_t>(k));
    for (Eigen::Index j = 0; j < labels.size(); ++j)
        members[static_cast<size_t>(labels[j])].push_back(static_cast<int>(j));
    for (int i = 0; i < k; ++i) {
        const auto& idx = members[static_cast<size_t>(i)];
        if (idx.empty()) continue;  // stale model kept for labeling
        Matd Xi(idx.size(), d);
        Vecd yi(idx.size());
        for (size_t t = 0; t < idx.size(); ++t) {
            Xi.row(static_cast<Eigen::Index>(t)) = ds.X.row(idx[t]);
            yi[static_cast<Eigen::Index>(t)] = ds.y[idx[t]];
        }
        st.models[static_cast<size_t>(i)] =
            fit_linear_warm(Xi, yi, Vecd::Ones(Xi.rows()), spec, st.models[static_cast<size_t>(i)]);
        st.centroids.row(i) = Xi.colwise().mean();
    }
}

double penalized_objective(const Dataset& ds, const VecXi& labels, const FitState& st,
                           double gamma, const RegressorSpec& spec, double* raw_out) {
    double raw = 0.0;
    for (Eigen::Index j = 0; j < labels.size(); ++j) {
        const int i = labels[j];
        const double r = ds.y[j] - ds.X.row(j).dot(st.models[static_cast<size_t>(i)].w) -
                         st.models[static_cast<size_t>(i)].b;
        raw += r * r;
        if (gamma > 0.0)
            raw += gamma * (ds.X.row(j) - st.centroids.row(i)).squaredNorm();
    }
    double pen = 0.0;
    auto sizes = count_sizes(labels, static_cast<int>(st.models.size()));
    for (size_t i = 0; i < st.models.size(); ++i)
        if (sizes[i] > 0) pen += penalty_value(st.models[i], spec);
    if (raw_out) *raw_out = raw;
    return raw + pen;
}

}  // namespace

ConstraintSet ConstraintSet::from_tokens(const std::vector<std::string>& tokens) {
    ConstraintSet cs;
    for (size_t j = 0; j < tokens.size(); ++j) {
        auto it = cs.group_of.find(tokens[j]);
        if (it == cs.group_of.end()) {
            it = cs.group_of.emplace(tokens[j], static_cast<int>(cs.groups.size())).first;
            cs.groups.emplace_back();
        }
        cs.groups[static_cast<size_t>(it->second)].push_back(static_cast<int>(j));
    }
    return cs;
}

void ConstraintSet::validate(Eigen::Index n) const {
    std::vector<char> seen(static_cast<size_t>(n), 0);
    for (size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) throw EmptyGroup("constraint group " + std::to_string(g) + " is empty");
        for (int j : groups[g]) {
            if (j < 0 || j >= n || seen[static_cast<size_t>(j)])
                throw InvalidSpec("constraint groups must be disjoint and in range");
            seen[static_cast<size_t>(j)] = 1;
        }
    }
    for (char c : seen)
        if (!c) throw InvalidSpec("constraint groups must cover all points");
}

double clr_objective(const Dataset& dataset, const ClusterwiseModel& model, double gamma) {
    if (dataset.d() != model.centroids.cols())
        throw DimensionMismatch("clr_objective: dimension mismatch");
    if (dataset.n() != model.train_partition.labels.size())
        throw DimensionMismatch("clr_objective: partition length mismatch");
    double total = 0.0;
    for (Eigen::Index j = 0; j < dataset.n(); ++j) {
        const int i = model.train_partition.labels[j];
        const auto& m = model.models[static_cast<size_t>(i)];
        const double r = dataset.y[j] - dataset.X.row(j).dot(m.w) - m.b;
        total += r * r + gamma * (dataset.X.row(j) - model.centroids.row(i)).squaredNorm();
    }
    return total;
}

Partition labeling_step(const Dataset& dataset, const std::vector<LinearModel>& models,
                        const Matd& centroids, double gamma) {
    if (models.empty()) throw InvalidSpec("labeling_step: no models");
    Matd crit = criterion_matrix(dataset, models, centroids, gamma);
    Partition p;
    p.k = static_cast<int>(models.size());
    p.labels.resize(dataset.n());
    for (Eigen::Index j = 0; j < dataset.n(); ++j) p.labels[j] = argmin_row(crit, j);
    return p;
}

Partition constrained_labeling_step(const Dataset& dataset, const std::vector<LinearModel>& models,
                                    const Matd& centroids, double gamma,
                                    const ConstraintSet& constraints) {
    constraints.validate(dataset.n());
    Matd crit = criterion_matrix(dataset, models, centroids, gamma);
    const int k = static_cast<int>(models.size());
    Partition p;
    p.k = k;
    p.labels.resize(dataset.n());
    for (const auto& group : constraints.groups) {
        int best = 0;
        double best_v = std::numeric_limits<double>::infinity();
        for (int i = 0; i < k; ++i) {
            double v = 0.0;
            for (int j : group) v += crit(j, i);
            if (v < best_v) { best_v = v; best = i; }
        }
        for (int j : group) p.labels[j] = best;
    }
    return p;
}

Partition random_partition(Eigen::Index n, int k, std::mt19937_64& rng) {
    if (n < k) throw InsufficientData("random_partition: n < k");
    Partition p;
    p.k = k;
    p.labels.resize(n);
    std::uniform_int_distribution<int> pick(0, k - 1);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        for (Eigen::Index j = 0; j < n; ++j) p.labels[j] = pick(rng);
        auto sizes = count_sizes(p.labels, k);
        if (std::all_of(sizes.begin(), sizes.end(), [](int s) { return s > 0; })) return p;
    }
    // deterministic fill: hand points from the largest clusters to the empty ones
    auto sizes = count_sizes(p.labels, k);
    for (int i = 0; i < k; ++i) {
        while (sizes[static_cast<size_t>(i)] == 0) {
            int big = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
            for (Eigen::Index j = 0; j < n; ++j)
                if (p.labels[j] == big) {
                    p.labels[j] = i;
                    ++sizes[static_cast<size_t>(i)];
                    --sizes[static_cast<size_t>(big)];
                    break;
                }
        }
    }
    return p;
}

Partition random_group_partition(const ConstraintSet& constraints, Eigen::Index n, int k,
                                 std::mt19937_64& rng) {
    const int m = static_cast<int>(constraints.groups.size());
    if (m < k)
        throw InvalidSpec("constrained fit: fewer constraint groups than clusters");
    std::vector<int> glabel(static_cast<size_t>(m));
    std::uniform_int_distribution<int> pick(0, k - 1);
    auto assign = [&] {
        Partition p;
        p.k = k;
        p.labels.resize(n);
        for (int g = 0; g < m; ++g)
            for (int j : constraints.groups[static_cast<size_t>(g)])
                p.labels[j] = glabel[static_cast<size_t>(g)];
        return p;
    };
    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<int> used(static_cast<size_t>(k), 0);
        for (int g = 0; g < m; ++g) {
            glabel[static_cast<size_t>(g)] = pick(rng);
            ++used[static_cast<size_t>(glabel[static_cast<size_t>(g)])];
        }
        if (std::all_of(used.begin(), used.end(), [](int s) { return s > 0; })) return assign();
    }
    for (int i = 0; i < k; ++i) glabel[static_cast<size_t>(i)] = i;  // m >= k
    return assign();
}

ClusterwiseModel fit_hard_clr(const Dataset& dataset, const HardClrConfig& config,
                              const ConstraintSet* constraints, const IterObserver& observer) {
    dataset.validate();
    const Eigen::Index n = dataset.n();
    const int k = config.k;
    if (k < 1 || config.max_iter < 1) throw InvalidSpec("fit_hard_clr: k and max_iter must be >= 1");
    if (n < k) throw InsufficientData("fit_hard_clr: n < k");
    if (constraints) constraints->validate(n);

    std::mt19937_64 rng(config.seed);
    Partition labels = constraints ? random_group_partition(*constraints, n, k, rng)
                                   : random_partition(n, k, rng);

    ClusterwiseModel out;
    out.config = config;
    out.init_partition = labels;

    FitState st;
    const double gamma = config.gamma;

    // maps point -> group index, for constrained reseeding
    std::vector<int> group_idx;
    if (constraints) {
        group_idx.assign(static_cast<size_t>(n), -1);
        for (size_t g = 0; g < constraints->groups.size(); ++g)
            for (int j : constraints->groups[g]) group_idx[static_cast<size_t>(j)] = static_cast<int>(g);
    }

    int it = 0;
    for (; it < config.max_iter; ++it) {
        refit_clusters(dataset, labels.labels, k, config.regressor, st);

        Partition next = constraints
                             ? constrained_labeling_step(dataset, st.models, st.centroids, gamma, *constraints)
                             : labeling_step(dataset, st.models, st.centroids, gamma);

        // fix empty clusters
        auto sizes = count_sizes(next.labels, k);
        for (int i = 0; i < k; ++i) {
            if (sizes[static_cast<size_t>(i)] > 0) continue;
            ++out.n_reseeds;
            if (!constraints) {
                // worst criterion point from a donor cluster that stays non-empty;
                // singleton refit (w=0, b=y) keeps the objective non-increasing
                Matd crit = criterion_matrix(dataset, st.models, st.centroids, gamma);
                int best_j = -1;
                double worst = -1.0;
                for (Eigen::Index j = 0; j < n; ++j) {
                    if (sizes[static_cast<size_t>(next.labels[j])] < 2) continue;
                    const double v = crit(j, next.labels[j]);
                    if (v > worst) { worst = v; best_j = static_cast<int>(j); }
                }
                if (best_j < 0) throw InsufficientData("fit_hard_clr: cannot reseed empty cluster");
                --sizes[static_cast<size_t>(next.labels[best_j])];
                next.labels[best_j] = i;
                ++sizes[static_cast<size_t>(i)];
                st.models[static_cast<size_t>(i)] = LinearModel{Vecd::Zero(dataset.d()), dataset.y[best_j]};
                st.centroids.row(i) = dataset.X.row(best_j);
            } else {
                // move the worst whole group; reuse the donor cluster's model so
                // residuals are unchanged and only the centroid term improves
                Matd crit = criterion_matrix(dataset, st.models, st.centroids, gamma);
                std::vector<int> cluster_groups(static_cast<size_t>(k), 0);
                std::vector<int> glab(constraints->groups.size(), -1);
                for (size_t g = 0; g < constraints->groups.size(); ++g) {
                    glab[g] = next.labels[constraints->groups[g][0]];
                    ++cluster_groups[static_cast<size_t>(glab[g])];
                }
                int best_g = -1;
                double worst = -1.0;
                for (size_t g = 0; g < constraints->groups.size(); ++g) {
                    if (cluster_groups[static_cast<size_t>(glab[g])] < 2) continue;
                    double v = 0.0;
                    for (int j : constraints->groups[g]) v += crit(j, glab[g]);
                    if (v > worst) { worst = v; best_g = static_cast<int>(g); }
                }
                if (best_g < 0) throw InsufficientData("fit_hard_clr: cannot reseed empty cluster");
                const auto& grp = constraints->groups[static_cast<size_t>(best_g)];
                const int donor = glab[static_cast<size_t>(best_g)];
                for (int j : grp) {
                    next.labels[j] = i;
                    ++sizes[static_cast<size_t>(i)];
                    --sizes[static_cast<size_t>(donor)];
                }
                st.models[static_cast<size_t>(i)] = st.models[static_cast<size_t>(donor)];
                Vecd mean = Vecd::Zero(dataset.d());
                for (int j : grp) mean += dataset.X.row(j).transpose();
                st.centroids.row(i) = mean.transpose() / static_cast<double>(grp.size());
            }
        }

        if (observer) observer(it, next);

        double raw = 0.0;
        out.objective_trace.push_back(penalized_objective(dataset, next.labels, st, gamma,
                                                          config.regressor, &raw));
        out.objective_trace_raw.push_back(raw);

        const bool unchanged = (next.labels.array() == labels.labels.array()).all();
        labels = std::move(next);
        if (unchanged) { out.converged = true; ++it; break; }
    }
    out.n_iter = it;

    // final refit so models, centroids and sizes are consistent with the final partition
    refit_clusters(dataset, labels.labels, k, config.regressor, st);
    double raw = 0.0;
    out.objective_trace.push_back(penalized_objective(dataset, labels.labels, st, gamma,
                                                      config.regressor, &raw));
    out.objective_trace_raw.push_back(raw);

    out.models = std::move(st.models);
    out.centroids = std::move(st.centroids);
    out.sizes = count_sizes(labels.labels, k);
    out.train_partition = std::move(labels);
    return out;
}

}  // namespace clr
