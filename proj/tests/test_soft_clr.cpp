#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "clr/data_io.hpp"
#include "clr/soft_clr.hpp"

using namespace clr;

namespace {

constexpr double kJitter = 1e-5;  // matches the solver's ridge floor

Dataset random_regression(int n, int d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(-1.0, 1.0);
    std::normal_distribution<double> eps(0.0, 0.4);
    Dataset ds;
    ds.X = Matd(n, d);
    ds.y = Vecd(n);
    Vecd w(d);
    for (int c = 0; c < d; ++c) w[c] = 2.0 * ux(rng);
    for (int j = 0; j < n; ++j) {
        for (int c = 0; c < d; ++c) ds.X(j, c) = ux(rng);
        ds.y[j] = ds.X.row(j) * w + eps(rng);
    }
    return ds;
}

MixtureParams two_component_params() {
    MixtureParams p;
    p.pi = Vecd(2);
    p.pi << 0.4, 0.6;
    p.mu = Matd(2, 1);
    p.mu << 0.2, 0.8;
    p.models.resize(2);
    p.models[0].w = Vecd::Constant(1, 1.0);
    p.models[0].b = 0.0;
    p.models[1].w = Vecd::Constant(1, -1.0);
    p.models[1].b = 1.0;
    p.sigma2 = Vecd(2);
    p.sigma2 << 0.5, 2.0;
    return p;
}

MixtureParams swapped(const MixtureParams& p) {
    MixtureParams s = p;
    std::swap(s.pi[0], s.pi[1]);
    s.mu.row(0).swap(s.mu.row(1));
    std::swap(s.models[0], s.models[1]);
    std::swap(s.sigma2[0], s.sigma2[1]);
    return s;
}

}  // namespace

TEST_CASE("e_step") {
    SUBCASE("k = 1 assigns everything to the only component") {
        Dataset ds = random_regression(15, 2, 1);
        MixtureParams p;
        p.pi = Vecd::Ones(1);
        p.mu = ds.X.colwise().mean();
        p.models = {fit_linear(ds.X, ds.y)};
        p.sigma2 = Vecd::Constant(1, 0.7);
        const SoftAssignment a = e_step(ds, p, 0.5);
        CHECK(a.q.rows() == 15);
        CHECK(a.q.cols() == 1);
        CHECK((a.q.array() - 1.0).abs().maxCoeff() < 1e-15);
    }

    SUBCASE("identical components split responsibility evenly") {
        Dataset ds = random_regression(10, 1, 2);
        MixtureParams p = two_component_params();
        p.pi << 0.5, 0.5;
        p.mu.row(1) = p.mu.row(0);
        p.models[1] = p.models[0];
        p.sigma2[1] = p.sigma2[0];
        const SoftAssignment a = e_step(ds, p, 0.3);
        CHECK((a.q.array() - 0.5).abs().maxCoeff() < 1e-12);
    }

    SUBCASE("two points, distinct variances, matches the direct formula") {
        Dataset ds;
        ds.X = Matd(2, 1);
        ds.X << 0.0, 1.0;
        ds.y = Vecd(2);
        ds.y << 0.3, -0.5;
        const MixtureParams p = two_component_params();
        const double gamma = 0.3;
        const SoftAssignment a = e_step(ds, p, gamma);
        for (int j = 0; j < 2; ++j) {
            double dens[2];
            for (int i = 0; i < 2; ++i) {
                const double r = ds.y[j] - (p.models[i].w[0] * ds.X(j, 0) + p.models[i].b);
                const double d2 = (ds.X(j, 0) - p.mu(i, 0)) * (ds.X(j, 0) - p.mu(i, 0));
                dens[i] = p.pi[i] / std::sqrt(2.0 * M_PI * p.sigma2[i]) *
                          std::exp(-(r * r + gamma * d2) / (2.0 * p.sigma2[i]));
            }
            CHECK(a.q(j, 0) == doctest::Approx(dens[0] / (dens[0] + dens[1])).epsilon(1e-10));
            CHECK(a.q(j, 1) == doctest::Approx(dens[1] / (dens[0] + dens[1])).epsilon(1e-10));
        }
    }

    SUBCASE("rows stay normalized when residuals dwarf the variances") {
        Dataset ds;
        ds.X = Matd(5, 1);
        ds.X << 1, 2, 3, 4, 5;
        ds.y = Vecd(5);
        ds.y << 1e4, 2e4, 3e4, 4e4, 5e4;
        MixtureParams p = two_component_params();
        p.sigma2 << 1e-8, 1e-8;
        const SoftAssignment a = e_step(ds, p, 1.0);
        CHECK(a.q.allFinite());
        for (int j = 0; j < 5; ++j)
            CHECK(a.q.row(j).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("swapping components swaps the responsibility columns") {
        Dataset ds = random_regression(12, 1, 3);
        const MixtureParams p = two_component_params();
        const SoftAssignment a = e_step(ds, p, 0.2);
        const SoftAssignment b = e_step(ds, swapped(p), 0.2);
        CHECK((a.q.col(0) - b.q.col(1)).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((a.q.col(1) - b.q.col(0)).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("m_step") {
    SUBCASE("uniform responsibilities yield k copies of the global fit") {
        Dataset ds = random_regression(30, 2, 4);
        SoftAssignment q;
        q.q = Matd::Constant(30, 3, 1.0 / 3.0);
        const MixtureParams p = m_step(ds, q, 0.0, RegressorSpec{});
        const LinearModel global = fit_linear(ds.X, ds.y);
        const Vecd mean = ds.X.colwise().mean().transpose();
        for (int i = 0; i < 3; ++i) {
            CHECK((p.models[i].w - global.w).cwiseAbs().maxCoeff() < 1e-10);
            CHECK(std::abs(p.models[i].b - global.b) < 1e-10);
            CHECK((p.mu.row(i).transpose() - mean).cwiseAbs().maxCoeff() < 1e-12);
            CHECK(p.pi[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        }
        CHECK(p.sigma2[0] == doctest::Approx(p.sigma2[1]).epsilon(1e-12));
        CHECK(p.sigma2[1] == doctest::Approx(p.sigma2[2]).epsilon(1e-12));
    }

    SUBCASE("one-hot responsibilities reproduce the per-cluster fits") {
        Dataset ds = random_regression(30, 2, 5);
        std::mt19937_64 rng(9);
        VecXi labels(30);
        for (int j = 0; j < 30; ++j) labels[j] = static_cast<int>(rng() % 2);
        SoftAssignment q;
        q.q = Matd::Zero(30, 2);
        for (int j = 0; j < 30; ++j) q.q(j, labels[j]) = 1.0;

        const MixtureParams p = m_step(ds, q, 0.0, RegressorSpec{});
        for (int i = 0; i < 2; ++i) {
            std::vector<int> idx;
            for (int j = 0; j < 30; ++j)
                if (labels[j] == i) idx.push_back(j);
            Matd Xi(idx.size(), 2);
            Vecd yi(idx.size());
            for (size_t t = 0; t < idx.size(); ++t) {
                Xi.row(static_cast<Eigen::Index>(t)) = ds.X.row(idx[t]);
                yi[static_cast<Eigen::Index>(t)] = ds.y[idx[t]];
            }
            const LinearModel sub = fit_linear(Xi, yi);
            CHECK((p.models[i].w - sub.w).cwiseAbs().maxCoeff() < 1e-5);
            CHECK(std::abs(p.models[i].b - sub.b) < 1e-5);
            CHECK((p.mu.row(i).transpose() - Xi.colwise().mean().transpose()).cwiseAbs().maxCoeff() <
                  1e-12);
            CHECK(p.pi[i] == doctest::Approx(idx.size() / 30.0).epsilon(1e-12));
        }
    }

    SUBCASE("three points with fractional responsibilities match the scalar algebra") {
        Dataset ds;
        ds.X = Matd(3, 1);
        ds.X << 0.0, 1.0, 2.0;
        ds.y = Vecd(3);
        ds.y << 0.5, -0.2, 0.9;
        SoftAssignment q;
        q.q = Matd(3, 2);
        q.q << 0.7, 0.3, 0.2, 0.8, 0.5, 0.5;

        const MixtureParams p = m_step(ds, q, 0.0, RegressorSpec{});
        for (int i = 0; i < 2; ++i) {
            const double q0 = q.q(0, i), q1 = q.q(1, i), q2 = q.q(2, i);
            const double mass = q0 + q1 + q2;
            const double wn0 = q0 * 3.0 / mass, wn1 = q1 * 3.0 / mass, wn2 = q2 * 3.0 / mass;
            const double xbar = (wn0 * 0.0 + wn1 * 1.0 + wn2 * 2.0) / 3.0;
            const double ybar = (wn0 * 0.5 + wn1 * -0.2 + wn2 * 0.9) / 3.0;
            double A = kJitter, rhs = 0.0;
            const double xs[3] = {0.0, 1.0, 2.0}, ys[3] = {0.5, -0.2, 0.9},
                         wns[3] = {wn0, wn1, wn2};
            for (int j = 0; j < 3; ++j) {
                A += wns[j] * (xs[j] - xbar) * (xs[j] - xbar);
                rhs += wns[j] * (xs[j] - xbar) * (ys[j] - ybar);
            }
            const double w = rhs / A;
            const double b = ybar - xbar * w;
            CHECK(p.models[i].w[0] == doctest::Approx(w).epsilon(1e-10));
            CHECK(p.models[i].b == doctest::Approx(b).epsilon(1e-10));
            CHECK(p.mu(i, 0) == doctest::Approx((q1 + 2.0 * q2) / mass).epsilon(1e-12));
            CHECK(p.pi[i] == doctest::Approx(mass / 3.0).epsilon(1e-12));

            double quad = 0.0;
            const double qs[3] = {q0, q1, q2};
            for (int j = 0; j < 3; ++j) {
                const double r = ys[j] - (w * xs[j] + b);
                quad += qs[j] * r * r;
            }
            CHECK(p.sigma2[i] == doctest::Approx(quad / mass).epsilon(1e-10));
        }
    }

    SUBCASE("a responsibility column with no mass is rejected") {
        Dataset ds = random_regression(6, 1, 6);
        SoftAssignment q;
        q.q = Matd::Zero(6, 2);
        q.q.col(0).setOnes();
        CHECK_THROWS_AS(m_step(ds, q, 0.0, RegressorSpec{}), DegenerateColumn);
    }
}

TEST_CASE("harden") {
    SUBCASE("one-hot input recovers the labels") {
        SoftAssignment q;
        q.q = Matd::Zero(4, 3);
        q.q(0, 2) = q.q(1, 0) = q.q(2, 1) = q.q(3, 2) = 1.0;
        const Partition p = harden(q);
        CHECK(p.labels[0] == 2);
        CHECK(p.labels[1] == 0);
        CHECK(p.labels[2] == 1);
        CHECK(p.labels[3] == 2);
        CHECK(p.k == 3);
    }

    SUBCASE("exact ties go to the lowest index") {
        SoftAssignment q;
        q.q = Matd::Constant(3, 2, 0.5);
        const Partition p = harden(q);
        CHECK((p.labels.array() == 0).all());
    }

    SUBCASE("matches an exhaustive row argmax") {
        std::mt19937_64 rng(13);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        SoftAssignment q;
        q.q = Matd(20, 4);
        for (int j = 0; j < 20; ++j) {
            double sum = 0.0;
            for (int i = 0; i < 4; ++i) { q.q(j, i) = u(rng); sum += q.q(j, i); }
            q.q.row(j) /= sum;
        }
        const Partition p = harden(q);
        for (int j = 0; j < 20; ++j) {
            int best = 0;
            for (int i = 1; i < 4; ++i)
                if (q.q(j, i) > q.q(j, best)) best = i;
            CHECK(p.labels[j] == best);
        }
    }
}

TEST_CASE("fit_soft_clr with k = 1 collapses to a single regression") {
    Dataset ds = random_regression(50, 2, 7);
    HardClrConfig cfg;
    cfg.k = 1;
    cfg.gamma = 0.0;
    cfg.max_iter = 10;
    const SoftClrFit fit = fit_soft_clr(ds, cfg);
    const LinearModel ols = fit_linear(ds.X, ds.y);
    CHECK((fit.params.models[0].w - ols.w).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(fit.params.models[0].b - ols.b) < 1e-10);
    CHECK(fit.params.pi[0] == doctest::Approx(1.0).epsilon(1e-15));
    const double msr = mse(ds.y, predict_linear(fit.params.models[0], ds.X));
    CHECK(fit.params.sigma2[0] == doctest::Approx(msr).epsilon(1e-12));
    CHECK((harden(fit.q).labels.array() == 0).all());
}

TEST_CASE("planted two-line data is recovered by the best of ten seeds") {
    SyntheticSpec spec;
    spec.scenario = SyntheticSpec::Scenario::planted_lines;
    spec.k = 2;
    spec.d = 2;
    spec.n = 200;
    spec.noise_sd = 0.0;
    spec.seed = 11;
    const SyntheticData synth = generate_synthetic(spec);

    double best_ll = -std::numeric_limits<double>::infinity();
    SoftClrFit best;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        HardClrConfig cfg;
        cfg.k = 2;
        cfg.gamma = 0.0;
        cfg.max_iter = 50;
        cfg.seed = seed;
        SoftClrFit fit = fit_soft_clr(synth.data, cfg);
        if (fit.loglik_trace.back() > best_ll) {
            best_ll = fit.loglik_trace.back();
            best = std::move(fit);
        }
    }
    const Partition hard = harden(best.q);
    const bool direct = (hard.labels.array() == synth.truth.labels.array()).all();
    const bool flipped = (hard.labels.array() == (1 - synth.truth.labels.array())).all();
    CHECK((direct || flipped));
}

TEST_CASE("penalized log-likelihood is non-decreasing outside reseed steps") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        for (double gamma : {0.0, 0.4, 5.0}) {
            Dataset ds = random_regression(60, 2, 500 + seed);
            HardClrConfig cfg;
            cfg.k = 3;
            cfg.gamma = gamma;
            cfg.max_iter = 40;
            cfg.seed = seed;
            const SoftClrFit fit = fit_soft_clr(ds, cfg);
            REQUIRE(fit.loglik_trace.size() == fit.reseeded.size() + 1);
            for (size_t t = 1; t < fit.loglik_trace.size(); ++t) {
                if (fit.reseeded[t - 1]) continue;
                const double slack = 1e-9 * std::max(1.0, std::abs(fit.loglik_trace[t - 1]));
                CHECK(fit.loglik_trace[t] >= fit.loglik_trace[t - 1] - slack);
            }
        }
    }

    // noise-free planted data pins sigma2 at the floor; ascent must survive it
    SyntheticSpec spec;
    spec.scenario = SyntheticSpec::Scenario::planted_lines;
    spec.k = 2;
    spec.d = 2;
    spec.n = 120;
    spec.noise_sd = 0.0;
    spec.seed = 3;
    const SyntheticData synth = generate_synthetic(spec);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        HardClrConfig cfg;
        cfg.k = 2;
        cfg.gamma = 0.0;
        cfg.max_iter = 40;
        cfg.seed = seed;
        const SoftClrFit fit = fit_soft_clr(synth.data, cfg);
        for (size_t t = 1; t < fit.loglik_trace.size(); ++t) {
            if (fit.reseeded[t - 1]) continue;
            const double slack = 1e-9 * std::max(1.0, std::abs(fit.loglik_trace[t - 1]));
            CHECK(fit.loglik_trace[t] >= fit.loglik_trace[t - 1] - slack);
        }
    }
}

TEST_CASE("same seed reproduces the whole fit") {
    Dataset ds = random_regression(40, 2, 21);
    HardClrConfig cfg;
    cfg.k = 2;
    cfg.gamma = 0.3;
    cfg.max_iter = 25;
    cfg.seed = 77;
    const SoftClrFit a = fit_soft_clr(ds, cfg);
    const SoftClrFit b = fit_soft_clr(ds, cfg);
    REQUIRE(a.loglik_trace.size() == b.loglik_trace.size());
    for (size_t t = 0; t < a.loglik_trace.size(); ++t)
        CHECK(a.loglik_trace[t] == doctest::Approx(b.loglik_trace[t]).epsilon(1e-12));
    CHECK((a.q.q - b.q.q).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("argument validation") {
    Dataset ds = random_regression(4, 1, 30);
    HardClrConfig cfg;
    cfg.k = 5;
    CHECK_THROWS_AS(fit_soft_clr(ds, cfg), InsufficientData);
    cfg.k = 0;
    CHECK_THROWS_AS(fit_soft_clr(ds, cfg), InvalidSpec);
}
