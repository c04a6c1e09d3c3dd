#include "clr/linear.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace clr {

RegressorSpec::Kind regressor_kind_from_string(const std::string& s) {
    if (s == "ols") return RegressorSpec::Kind::ols;
    if (s == "ridge") return RegressorSpec::Kind::ridge;
    if (s == "lasso") return RegressorSpec::Kind::lasso;
    throw InvalidSpec("unknown regressor kind: " + s);
}

std::string to_string(RegressorSpec::Kind kind) {
    switch (kind) {
        case RegressorSpec::Kind::ols: return "ols";
        case RegressorSpec::Kind::ridge: return "ridge";
        case RegressorSpec::Kind::lasso: return "lasso";
    }
    return "ols";
}

namespace {

struct Centered {
    Matd Xc;
    Vecd yc;
    Vecd wts;   // normalized to mean 1
    Vecd xbar;
    double ybar = 0.0;
};

Centered center(const Matd& X, const Vecd& y, const Vecd& sample_weights) {
    if (y.size() != X.rows())
        throw DimensionMismatch("fit_linear: X rows != y length");
    if (sample_weights.size() != X.rows())
        throw DimensionMismatch("fit_linear: weights length != X rows");
    const double total = sample_weights.sum();
    if (!(total > 0.0) || (sample_weights.array() < 0.0).any())
        throw InsufficientData("fit_linear: needs at least one positive sample weight");

    Centered c;
    c.wts = sample_weights * (static_cast<double>(X.rows()) / total);
    c.xbar = (X.transpose() * c.wts) / static_cast<double>(X.rows());
    c.ybar = c.wts.dot(y) / static_cast<double>(X.rows());
    c.Xc = X.rowwise() - c.xbar.transpose();
    c.yc = (y.array() - c.ybar).matrix();
    return c;
}

LinearModel solve_quadratic(const Centered& c, double l2) {
    const Eigen::Index d = c.Xc.cols();
    Matd A = c.Xc.transpose() * c.wts.asDiagonal() * c.Xc;
    A.diagonal().array() += l2;
    Vecd rhs = c.Xc.transpose() * (c.wts.asDiagonal() * c.yc);
    Eigen::LDLT<Matd> ldlt(A);
    if (ldlt.info() != Eigen::Success)
        throw SingularSystem("fit_linear: LDLT factorization failed");
    LinearModel m;
    m.w = ldlt.solve(rhs);
    if (!m.w.allFinite())
        throw SingularSystem("fit_linear: non-finite solution");
    m.b = c.ybar - c.xbar.dot(m.w);
    (void)d;
    return m;
}

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

LinearModel solve_lasso(const Centered& c, double lambda, Vecd w0) {
    const Eigen::Index n = c.Xc.rows();
    const Eigen::Index d = c.Xc.cols();
    Vecd w = (w0.size() == d) ? std::move(w0) : Vecd::Zero(d).eval();

    Vecd col_sq(d);
    for (Eigen::Index j = 0; j < d; ++j)
        col_sq[j] = (c.wts.array() * c.Xc.col(j).array().square()).sum() + kRidgeJitter;

    Vecd r = c.yc - c.Xc * w;
    const int max_sweeps = 1000;
    const double tol = 1e-7;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            const double wj = w[j];
            const double rho = (c.wts.array() * c.Xc.col(j).array() * r.array()).sum() + col_sq[j] * wj -
                               kRidgeJitter * wj;
            const double wj_new = soft_threshold(rho, lambda) / col_sq[j];
            if (wj_new != wj) {
                r += c.Xc.col(j) * (wj - wj_new);
                w[j] = wj_new;
                max_delta = std::max(max_delta, std::abs(wj_new - wj));
            }
        }
        if (max_delta < tol) break;
    }
    (void)n;
    if (!w.allFinite()) throw SingularSystem("fit_linear: lasso diverged");
    LinearModel m;
    m.w = std::move(w);
    m.b = c.ybar - c.xbar.dot(m.w);
    return m;
}

}  // namespace

LinearModel fit_linear(const Matd& X, const Vecd& y, const Vecd& sample_weights,
                       const RegressorSpec& spec) {
    return fit_linear_warm(X, y, sample_weights, spec, LinearModel{});
}

LinearModel fit_linear(const Matd& X, const Vecd& y, const RegressorSpec& spec) {
    return fit_linear(X, y, Vecd::Ones(X.rows()), spec);
}

LinearModel fit_linear_warm(const Matd& X, const Vecd& y, const Vecd& sample_weights,
                            const RegressorSpec& spec, const LinearModel& warm) {
    Centered c = center(X, y, sample_weights);
    switch (spec.kind) {
        case RegressorSpec::Kind::ols:
            return solve_quadratic(c, kRidgeJitter);
        case RegressorSpec::Kind::ridge:
            return solve_quadratic(c, kRidgeJitter + spec.lambda);
        case RegressorSpec::Kind::lasso:
            return solve_lasso(c, spec.lambda, warm.w);
    }
    throw InvalidSpec("fit_linear: bad regressor kind");
}

double penalty_value(const LinearModel& model, const RegressorSpec& spec) {
    double p = kRidgeJitter * model.w.squaredNorm();
    if (spec.kind == RegressorSpec::Kind::ridge)
        p += spec.lambda * model.w.squaredNorm();
    else if (spec.kind == RegressorSpec::Kind::lasso)
        p += 2.0 * spec.lambda * model.w.template lpNorm<1>();
    return p;
}

}  // namespace clr
