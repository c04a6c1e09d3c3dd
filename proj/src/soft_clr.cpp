#include "clr/soft_clr.hpp"

#include <cmath>
#include <limits>

namespace clr {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double variance_floor(const Vecd& y) {
    const double mean = y.mean();
    const double var = (y.array() - mean).square().sum() / static_cast<double>(y.size());
    return var > 0.0 ? 1e-8 * var : 1e-12;
}

// log joint mass per point and component, n x k
Matd log_joint(const Dataset& ds, const MixtureParams& p, double gamma) {
    const Eigen::Index n = ds.n();
    const int k = static_cast<int>(p.models.size());
    Matd lj(n, k);
    for (int i = 0; i < k; ++i) {
        const double s2 = p.sigma2[i];
        Vecd resid = ds.y - predict_linear(p.models[static_cast<size_t>(i)], ds.X);
        Vecd quad = resid.array().square().matrix();
        if (gamma > 0.0)
            quad += gamma * (ds.X.rowwise() - p.mu.row(i)).rowwise().squaredNorm();
        lj.col(i) = ((std::log(p.pi[i]) - 0.5 * std::log(kTwoPi * s2)) - quad.array() / (2.0 * s2)).matrix();
    }
    return lj;
}

Vecd row_logsumexp(const Matd& lj) {
    Vecd mx = lj.rowwise().maxCoeff();
    return mx.array() + (lj.colwise() - mx).array().exp().rowwise().sum().log();
}

}  // namespace

SoftAssignment e_step(const Dataset& dataset, const MixtureParams& params, double gamma) {
    dataset.validate();
    Matd lj = log_joint(dataset, params, gamma);
    Vecd lse = row_logsumexp(lj);
    SoftAssignment a;
    a.q = (lj.colwise() - lse).array().exp();
    return a;
}

MixtureParams m_step(const Dataset& dataset, const SoftAssignment& q, double gamma,
                     const RegressorSpec& regressor,
                     const std::vector<LinearModel>* warm_models) {
    const Eigen::Index n = dataset.n();
    const int k = static_cast<int>(q.q.cols());
    if (q.q.rows() != n) throw DimensionMismatch("m_step: q rows != n");

    MixtureParams p;
    p.pi = q.q.colwise().mean().transpose();
    p.mu.resize(k, dataset.d());
    p.models.resize(static_cast<size_t>(k));
    p.sigma2.resize(k);
    const double floor = variance_floor(dataset.y);

    for (int i = 0; i < k; ++i) {
        const Vecd qi = q.q.col(i);
        const double mass = qi.sum();
        if (mass < 1e-12)
            throw DegenerateColumn("m_step: responsibility column " + std::to_string(i) +
                                   " has vanishing mass");
        p.mu.row(i) = (dataset.X.transpose() * qi).transpose() / mass;
        LinearModel warm = warm_models ? (*warm_models)[static_cast<size_t>(i)] : LinearModel{};
        p.models[static_cast<size_t>(i)] =
            fit_linear_warm(dataset.X, dataset.y, qi, regressor, warm);
        Vecd resid = dataset.y - predict_linear(p.models[static_cast<size_t>(i)], dataset.X);
        Vecd quad = resid.array().square().matrix();
        if (gamma > 0.0)
            quad += gamma * (dataset.X.rowwise() - p.mu.row(i)).rowwise().squaredNorm();
        p.sigma2[i] = std::max(qi.dot(quad) / mass, floor);
    }
    return p;
}

Partition harden(const SoftAssignment& q) {
    Partition p;
    p.k = static_cast<int>(q.q.cols());
    p.labels.resize(q.q.rows());
    for (Eigen::Index j = 0; j < q.q.rows(); ++j) {
        int best = 0;
        for (int i = 1; i < q.q.cols(); ++i)
            if (q.q(j, i) > q.q(j, best)) best = i;
        p.labels[j] = best;
    }
    return p;
}

double augmented_loglik(const Dataset& dataset, const MixtureParams& params, double gamma) {
    return row_logsumexp(log_joint(dataset, params, gamma)).sum();
}

SoftClrFit fit_soft_clr(const Dataset& dataset, const HardClrConfig& config) {
    dataset.validate();
    const Eigen::Index n = dataset.n();
    const int k = config.k;
    if (k < 1 || config.max_iter < 1) throw InvalidSpec("fit_soft_clr: k and max_iter must be >= 1");
    if (n < k) throw InsufficientData("fit_soft_clr: n < k");

    std::mt19937_64 rng(config.seed);
    SoftClrFit fit;
    fit.init_partition = random_partition(n, k, rng);

    fit.q.q = Matd::Zero(n, k);
    for (Eigen::Index j = 0; j < n; ++j) fit.q.q(j, fit.init_partition.labels[j]) = 1.0;

    fit.params = m_step(dataset, fit.q, config.gamma, config.regressor);
    fit.loglik_trace.push_back(augmented_loglik(dataset, fit.params, config.gamma));

    int it = 0;
    for (; it < config.max_iter; ++it) {
        fit.q = e_step(dataset, fit.params, config.gamma);

        // re-seed dead components on the lowest-likelihood point
        bool reseeded = false;
        Vecd mass = fit.q.q.colwise().sum().transpose();
        if ((mass.array() < 1e-12).any()) {
            Vecd ll = row_logsumexp(log_joint(dataset, fit.params, config.gamma));
            for (int i = 0; i < k; ++i) {
                if (mass[i] >= 1e-12) continue;
                Eigen::Index worst = 0;
                ll.minCoeff(&worst);
                fit.q.q.row(worst).setZero();
                fit.q.q(worst, i) = 1.0;
                ll[worst] = std::numeric_limits<double>::infinity();
                reseeded = true;
            }
        }

        fit.params = m_step(dataset, fit.q, config.gamma, config.regressor, &fit.params.models);
        fit.loglik_trace.push_back(augmented_loglik(dataset, fit.params, config.gamma));
        fit.reseeded.push_back(reseeded ? 1 : 0);

        const size_t t = fit.loglik_trace.size();
        if (std::abs(fit.loglik_trace[t - 1] - fit.loglik_trace[t - 2]) < 1e-7) {
            ++it;
            fit.converged = true;
            break;
        }
    }
    fit.n_iter = it;
    fit.q = e_step(dataset, fit.params, config.gamma);
    return fit;
}

}  // namespace clr
