#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "clr/linear.hpp"

using namespace clr;

namespace {

Matd mat1(std::initializer_list<double> vals) {
    Matd X(static_cast<int>(vals.size()), 1);
    int j = 0;
    for (double v : vals) X(j++, 0) = v;
    return X;
}

Vecd vec(std::initializer_list<double> vals) {
    Vecd y(static_cast<int>(vals.size()));
    int j = 0;
    for (double v : vals) y[j++] = v;
    return y;
}

// small dense problem with a known generating model
struct ToyProblem {
    Matd X;
    Vecd y;
};

ToyProblem random_problem(int n, int d, std::uint64_t seed, double noise = 0.3) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(-1.0, 1.0);
    std::normal_distribution<double> eps(0.0, noise);
    ToyProblem p;
    p.X = Matd(n, d);
    Vecd w(d);
    for (int c = 0; c < d; ++c) w[c] = ux(rng);
    for (int j = 0; j < n; ++j)
        for (int c = 0; c < d; ++c) p.X(j, c) = ux(rng);
    p.y = p.X * w;
    for (int j = 0; j < n; ++j) p.y[j] += 0.5 + eps(rng);
    return p;
}

}  // namespace

TEST_CASE("ols on two points recovers the line through them") {
    const LinearModel m = fit_linear(mat1({0, 1}), vec({0, 1}));
    // the 1e-5 stabilizer shrinks the slope by ~2e-5
    CHECK(m.w[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(m.b == doctest::Approx(0.0).epsilon(1e-4));
}

TEST_CASE("constant target gives w = 0, b = c") {
    Matd X(4, 2);
    X << 1, 2, -3, 0.5, 4, 4, 0, -1;
    const LinearModel m = fit_linear(X, vec({7, 7, 7, 7}));
    CHECK(m.w.cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m.b == doctest::Approx(7.0));
}

TEST_CASE("ridge matches the normal equations solved by hand") {
    // X = [1;2;3], y = [2;3;5], lambda = 0.5. Centered: sum xc^2 = 2,
    // sum xc*yc = 3, so w = 3 / (2 + 0.5 + 1e-5) and b = 10/3 - 2w.
    const double w_oracle = 3.0 / 2.50001;
    const double b_oracle = 10.0 / 3.0 - 2.0 * w_oracle;
    const LinearModel m =
        fit_linear(mat1({1, 2, 3}), vec({2, 3, 5}), RegressorSpec{RegressorSpec::Kind::ridge, 0.5});
    CHECK(m.w[0] == doctest::Approx(w_oracle).epsilon(1e-8));
    CHECK(m.b == doctest::Approx(b_oracle).epsilon(1e-8));
}

TEST_CASE("predict_linear") {
    SUBCASE("identity slope") {
        LinearModel m{vec({1.0}), 0.0};
        CHECK(predict_linear(m, mat1({3}))[0] == doctest::Approx(3.0));
    }
    SUBCASE("pure intercept") {
        LinearModel m{vec({0.0}), 5.0};
        const Vecd p = predict_linear(m, mat1({-2, 0, 9}));
        for (int j = 0; j < p.size(); ++j) CHECK(p[j] == doctest::Approx(5.0));
    }
    SUBCASE("two features") {
        LinearModel m{vec({2.0, -1.0}), 1.0};
        Matd X(1, 2);
        X << 1, 1;
        CHECK(predict_linear(m, X)[0] == doctest::Approx(2.0));
    }
    SUBCASE("dimension mismatch throws") {
        LinearModel m{vec({1.0, 2.0}), 0.0};
        CHECK_THROWS_AS(predict_linear(m, mat1({1})), DimensionMismatch);
    }
}

TEST_CASE("mse") {
    CHECK(mse(vec({1, 2, 3}), vec({1, 2, 3})) == doctest::Approx(0.0));
    CHECK(mse(vec({0, 0}), vec({1, 1})) == doctest::Approx(1.0));
    CHECK(mse(vec({1, 2, 3}), vec({1, 1, 5})) == doctest::Approx(5.0 / 3.0));
    CHECK_THROWS_AS(mse(vec({1, 2}), vec({1})), DimensionMismatch);
}

TEST_CASE("r2") {
    CHECK(r2(vec({1, 2, 3}), vec({1, 2, 3})) == doctest::Approx(1.0));
    const Vecd y = vec({1, 2, 3, 6});
    CHECK(r2(y, Vecd::Constant(4, y.mean())) == doctest::Approx(0.0));
    // sse = 8, sst = 2
    CHECK(r2(vec({0, 2}), vec({2, 0})) == doctest::Approx(-3.0));
    CHECK_THROWS_AS(r2(vec({5, 5, 5}), vec({1, 2, 3})), ZeroVariance);
}

TEST_CASE("lambda = 0 reduces ridge and lasso to ols") {
    const ToyProblem p = random_problem(40, 3, 11);
    const LinearModel ols = fit_linear(p.X, p.y);
    for (auto kind : {RegressorSpec::Kind::ridge, RegressorSpec::Kind::lasso}) {
        const LinearModel m = fit_linear(p.X, p.y, RegressorSpec{kind, 0.0});
        CHECK((m.w - ols.w).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(std::abs(m.b - ols.b) < 1e-8);
    }
}

TEST_CASE("ridge coefficient norm shrinks monotonically in lambda") {
    const ToyProblem p = random_problem(60, 4, 12);
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {0.0, 0.01, 0.1, 1.0, 10.0, 100.0}) {
        const LinearModel m = fit_linear(p.X, p.y, RegressorSpec{RegressorSpec::Kind::ridge, lambda});
        const double norm = m.w.norm();
        CHECK(norm <= prev + 1e-12);
        prev = norm;
    }
}

TEST_CASE("lasso above lambda_max zeroes every coefficient exactly") {
    const ToyProblem p = random_problem(50, 5, 13);
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> uw(0.5, 2.0);
    Vecd wts(p.X.rows());
    for (int j = 0; j < wts.size(); ++j) wts[j] = uw(rng);

    // threshold on weighted-centered variables, with weights normalized to mean 1
    const Vecd wn = wts * (static_cast<double>(p.X.rows()) / wts.sum());
    const Vecd xbar = p.X.transpose() * wn / static_cast<double>(p.X.rows());
    const double ybar = wn.dot(p.y) / static_cast<double>(p.X.rows());
    const Matd Xc = p.X.rowwise() - xbar.transpose();
    const Vecd yc = (p.y.array() - ybar).matrix();
    const double lambda_max = (Xc.transpose() * (wn.asDiagonal() * yc)).cwiseAbs().maxCoeff();

    // a hair above the threshold so summation order cannot flip the sign test
    const LinearModel at = fit_linear(
        p.X, p.y, wts, RegressorSpec{RegressorSpec::Kind::lasso, lambda_max * (1.0 + 1e-10)});
    for (int c = 0; c < at.w.size(); ++c) CHECK(at.w[c] == 0.0);

    const LinearModel below = fit_linear(p.X, p.y, wts,
                                         RegressorSpec{RegressorSpec::Kind::lasso, 0.9 * lambda_max});
    CHECK(below.w.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("ols residuals are orthogonal to features and intercept") {
    const ToyProblem p = random_problem(80, 4, 15);
    const LinearModel m = fit_linear(p.X, p.y);
    const Vecd resid = p.y - predict_linear(m, p.X);
    const double n = static_cast<double>(p.X.rows());
    CHECK(std::abs(resid.sum()) <= 1e-6 * n);
    // the 1e-5 jitter leaves a dot of jitter * w_c, well inside the budget
    for (int c = 0; c < p.X.cols(); ++c)
        CHECK(std::abs(p.X.col(c).dot(resid)) <= 1e-6 * n);
}

TEST_CASE("scaling all sample weights by a constant changes nothing") {
    const ToyProblem p = random_problem(30, 3, 16);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> uw(0.1, 3.0);
    Vecd wts(p.X.rows());
    for (int j = 0; j < wts.size(); ++j) wts[j] = uw(rng);

    for (auto spec : {RegressorSpec{RegressorSpec::Kind::ols, 0.0},
                      RegressorSpec{RegressorSpec::Kind::ridge, 0.7},
                      RegressorSpec{RegressorSpec::Kind::lasso, 0.05}}) {
        const LinearModel a = fit_linear(p.X, p.y, wts, spec);
        const LinearModel b = fit_linear(p.X, p.y, (137.0 * wts).eval(), spec);
        CHECK((a.w - b.w).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(std::abs(a.b - b.b) < 1e-8);
    }
}

TEST_CASE("warm started lasso lands on the cold solution") {
    const ToyProblem p = random_problem(50, 4, 18);
    const RegressorSpec spec{RegressorSpec::Kind::lasso, 0.2};
    const Vecd unit = Vecd::Ones(p.X.rows());
    const LinearModel cold = fit_linear(p.X, p.y, unit, spec);
    const LinearModel warm = fit_linear_warm(p.X, p.y, unit, spec, cold);
    CHECK((cold.w - warm.w).cwiseAbs().maxCoeff() < 1e-7);
    CHECK(std::abs(cold.b - warm.b) < 1e-7);
}

TEST_CASE("shape and weight validation") {
    const ToyProblem p = random_problem(10, 2, 19);
    CHECK_THROWS_AS(fit_linear(p.X, vec({1, 2, 3})), DimensionMismatch);
    CHECK_THROWS_AS(fit_linear(p.X, p.y, Vecd::Zero(10), RegressorSpec{}), InsufficientData);
    Vecd neg = Vecd::Ones(10);
    neg[3] = -0.5;
    CHECK_THROWS_AS(fit_linear(p.X, p.y, neg, RegressorSpec{}), InsufficientData);
}

TEST_CASE("penalty_value matches the solver's objective bookkeeping") {
    LinearModel m{vec({3.0, -4.0}), 2.0};
    CHECK(penalty_value(m, RegressorSpec{RegressorSpec::Kind::ols, 0.0}) ==
          doctest::Approx(kRidgeJitter * 25.0));
    CHECK(penalty_value(m, RegressorSpec{RegressorSpec::Kind::ridge, 2.0}) ==
          doctest::Approx(kRidgeJitter * 25.0 + 2.0 * 25.0));
    CHECK(penalty_value(m, RegressorSpec{RegressorSpec::Kind::lasso, 2.0}) ==
          doctest::Approx(kRidgeJitter * 25.0 + 2.0 * 2.0 * 7.0));
}

TEST_CASE("regressor kind round trips through its name") {
    for (auto kind : {RegressorSpec::Kind::ols, RegressorSpec::Kind::ridge,
                      RegressorSpec::Kind::lasso})
        CHECK(regressor_kind_from_string(to_string(kind)) == kind);
    CHECK_THROWS_AS(regressor_kind_from_string("elastic"), InvalidSpec);
}
