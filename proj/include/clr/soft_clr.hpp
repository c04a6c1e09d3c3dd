#pragma once

#include "clr/hard_clr.hpp"

namespace clr {

struct MixtureParams {
    Vecd pi;
    Matd mu;  // k x d
    std::vector<LinearModel> models;
    Vecd sigma2;
};

struct SoftAssignment {
    Matd q;  // n x k, row-stochastic
};

SoftAssignment e_step(const Dataset& dataset, const MixtureParams& params, double gamma);

// pi = column mean, mu = q-weighted mean, (w,b) = weighted fit, and
// sigma2_i = sum_j q_ji (r^2 + gamma d^2) / sum_j q_ji, floored
MixtureParams m_step(const Dataset& dataset, const SoftAssignment& q, double gamma,
                     const RegressorSpec& regressor,
                     const std::vector<LinearModel>* warm_models = nullptr);

Partition harden(const SoftAssignment& q);

// the EM ascent target, i.e. the gamma-penalized log-likelihood
// log sum_i pi_i N(y_j; x_j w_i + b_i, sigma2_i) exp(-gamma |x_j - mu_i|^2 / (2 sigma2_i))
double augmented_loglik(const Dataset& dataset, const MixtureParams& params, double gamma);

struct SoftClrFit {
    MixtureParams params;
    SoftAssignment q;
    std::vector<double> loglik_trace;  // augmented_loglik, one entry per m_step
    std::vector<char> reseeded;        // aligned with trace entries after the first
    int n_iter = 0;
    bool converged = false;
    Partition init_partition;
};

SoftClrFit fit_soft_clr(const Dataset& dataset, const HardClrConfig& config);

}  // namespace clr
