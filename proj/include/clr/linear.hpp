#pragma once

#include "clr/types.hpp"

namespace clr {

// fixed ridge jitter added to every solve so tiny clusters stay solvable
inline constexpr double kRidgeJitter = 1e-5;

struct RegressorSpec {
    enum class Kind { ols, ridge, lasso };
    Kind kind = Kind::ols;
    double lambda = 0.0;
};

RegressorSpec::Kind regressor_kind_from_string(const std::string& s);
std::string to_string(RegressorSpec::Kind kind);

// Weighted least squares with unpenalized intercept.
//   ols:   min sum_i w_i r_i^2 + jitter*|w|^2
//   ridge: min sum_i w_i r_i^2 + (jitter+lambda)*|w|^2
//   lasso: min 1/2 (sum_i w_i r_i^2 + jitter*|w|^2) + lambda*|w|_1
// Sample weights are normalized to mean 1 so penalties are weight-scale
// invariant.
LinearModel fit_linear(const Matd& X, const Vecd& y, const Vecd& sample_weights,
                       const RegressorSpec& spec);

LinearModel fit_linear(const Matd& X, const Vecd& y, const RegressorSpec& spec = {});

// warm-started variant; coordinate descent starting from `warm` never ends
// worse than `warm` on the same data, which the CLR outer loop relies on
LinearModel fit_linear_warm(const Matd& X, const Vecd& y, const Vecd& sample_weights,
                            const RegressorSpec& spec, const LinearModel& warm);

// the penalty part of the objective fit_linear minimizes, in residual units:
// jitter*|w|^2 plus lambda*|w|^2 (ridge) or 2*lambda*|w|_1 (lasso)
double penalty_value(const LinearModel& model, const RegressorSpec& spec);

}  // namespace clr
