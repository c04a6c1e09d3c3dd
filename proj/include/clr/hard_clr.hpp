#pragma once

#include <functional>
#include <random>
#include <unordered_map>

#include "clr/linear.hpp"
#include "clr/types.hpp"

namespace clr {

struct HardClrConfig {
    int k = 2;
    double gamma = 0.0;
    int max_iter = 5;
    std::uint64_t seed = 0;
    RegressorSpec regressor;
};

struct ClusterwiseModel {
    std::vector<LinearModel> models;
    Matd centroids;          // k x d, row i is the mean of cluster i
    std::vector<int> sizes;  // k entries, empty clusters recorded as 0
    HardClrConfig config;
    Partition train_partition;

    // diagnostics
    Partition init_partition;
    std::vector<double> objective_trace;      // penalized objective, one entry per iteration
    std::vector<double> objective_trace_raw;  // plain eq. 1 + gamma term
    int n_iter = 0;
    bool converged = false;
    int n_reseeds = 0;
};

struct ConstraintSet {
    std::vector<std::vector<int>> groups;
    std::unordered_map<std::string, int> group_of;

    static ConstraintSet from_tokens(const std::vector<std::string>& tokens);
    void validate(Eigen::Index n) const;
};

double clr_objective(const Dataset& dataset, const ClusterwiseModel& model, double gamma);

Partition labeling_step(const Dataset& dataset, const std::vector<LinearModel>& models,
                        const Matd& centroids, double gamma);

Partition constrained_labeling_step(const Dataset& dataset, const std::vector<LinearModel>& models,
                                    const Matd& centroids, double gamma,
                                    const ConstraintSet& constraints);

// seeded uniform labels; resamples while a cluster is empty (up to 1000 draws),
// then fills remaining empties deterministically from the largest cluster
Partition random_partition(Eigen::Index n, int k, std::mt19937_64& rng);
Partition random_group_partition(const ConstraintSet& constraints, Eigen::Index n, int k,
                                 std::mt19937_64& rng);

using IterObserver = std::function<void(int iter, const Partition& labels)>;

ClusterwiseModel fit_hard_clr(const Dataset& dataset, const HardClrConfig& config,
                              const ConstraintSet* constraints = nullptr,
                              const IterObserver& observer = {});

}  // namespace clr
