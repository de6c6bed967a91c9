#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace sapt;
using sapt::test::centered;
using sapt::test::normal_equations;
using sapt::test::random_matrix;

namespace {

SpatialWeights swap_pair() {
    Matrix w(2, 2);
    w << 0, 1, 1, 0;
    return SpatialWeights(w);
}

Replication make_rep(const SimConfig& c, std::uint64_t r) {
    return simulate_replication(c, weights_banded(c.N, c.q), rep_seed(c.seed, r));
}

}  // namespace

TEST(BuildSystem, ScalarOnesHandAssembled) {
    LagCovariances c;
    c.T_used = 10;
    c.sigma_yf[0] = Matrix::Ones(2, 1);
    c.sigma_yf[1] = Matrix::Ones(2, 1);
    c.sigma_f[0] = Matrix::Ones(1, 1);
    c.sigma_f[1] = Matrix::Ones(1, 1);
    const RidgeSystem s = build_system(0, c, swap_pair(), 1);
    EXPECT_EQ(s.response, Vector::Ones(2));
    EXPECT_EQ(s.design, Matrix::Ones(2, 2));
    EXPECT_EQ(s.lag_pair, (LagPair{0, 1}));
}

TEST(BuildSystem, TwoUnitSyntheticMatchesBlockStacking) {
    LagCovariances c;
    c.T_used = 10;
    c.sigma_yf[0] = (Matrix(2, 1) << 0.7, -0.2).finished();
    c.sigma_yf[2] = (Matrix(2, 1) << 0.3, 0.9).finished();
    c.sigma_f[0] = Matrix::Constant(1, 1, 1.4);
    c.sigma_f[2] = Matrix::Constant(1, 1, 0.6);
    const RidgeSystem s = build_system(1, c, swap_pair(), 2);
    // unit 2 (index 1): e_i picks row 2, w_i = e_1 picks row 1
    Matrix X(2, 2);
    X << 0.7, 1.4, 0.3, 0.6;
    Vector Y(2);
    Y << -0.2, 0.9;
    EXPECT_EQ(s.design, X);
    EXPECT_EQ(s.response, Y);
    EXPECT_THROW(build_system(1, c, swap_pair(), 1), ValidationError);
}

TEST(BuildSystem, ContemporaneousOnlyHasKRows) {
    const Matrix y = centered(random_matrix(50, 4, 1)), f = centered(random_matrix(50, 2, 2));
    const LagCovariances c = compute_covariances(PanelData(y, {}, true), FactorSet(f, {}, true), {});
    const RidgeSystem s = build_system(0, c, weights_banded(4, 1), 0);
    EXPECT_EQ(s.design.rows(), 2);
    EXPECT_EQ(s.design.cols(), 3);
}

TEST(BuildSystem, RelabelingEquivariance) {
    const Eigen::Index N = 5;
    const Matrix y = centered(random_matrix(60, N, 3)), f = centered(random_matrix(60, 2, 4));
    Matrix w = random_matrix(N, N, 5).cwiseAbs();
    w.diagonal().setZero();
    const SpatialWeights sw(w);
    const std::vector<Eigen::Index> pi = {3, 0, 4, 1, 2};  // new position of old unit
    Matrix yp(60, N), wp(N, N);
    for (Eigen::Index i = 0; i < N; ++i) {
        yp.col(pi[static_cast<size_t>(i)]) = y.col(i);
        for (Eigen::Index j = 0; j < N; ++j) wp(pi[static_cast<size_t>(i)], pi[static_cast<size_t>(j)]) = sw.values()(i, j);
    }
    const LagCovariances a = compute_covariances(PanelData(y, {}, true), FactorSet(f, {}, true), {1});
    const LagCovariances b = compute_covariances(PanelData(yp, {}, true), FactorSet(f, {}, true), {1});
    const SpatialWeights swp(wp, false);
    for (Eigen::Index i = 0; i < N; ++i) {
        const RidgeSystem s = build_system(i, a, sw, 1);
        const RidgeSystem sp = build_system(pi[static_cast<size_t>(i)], b, swp, 1);
        EXPECT_LT((s.design - sp.design).cwiseAbs().maxCoeff(), 1e-14);
        EXPECT_LT((s.response - sp.response).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(RidgeSolve, IdentityDesignPseudoInverse) {
    Vector Y(3);
    Y << 1.5, -2.0, 0.25;
    const RidgeSolution r = ridge_solve(Matrix::Identity(3, 3), Y, 0.0);
    EXPECT_LT((r.beta - Y).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(r.effective_rank, 3);
}

TEST(RidgeSolve, IdentityDesignUnitPenalty) {
    const RidgeSolution r = ridge_solve(Matrix::Identity(2, 2), Vector::Ones(2), 1.0);
    EXPECT_NEAR(r.beta(0), 0.5, 1e-15);
    EXPECT_NEAR(r.beta(1), 0.5, 1e-15);
}

TEST(RidgeSolve, MatchesFullPivotNormalEquations) {
    const Matrix X = random_matrix(4, 3, 21);
    const Vector Y = random_matrix(4, 1, 22).col(0);
    const Vector b = ridge_solve(X, Y, 0.01).beta;
    const Vector o = normal_equations(X, Y, 0.01);
    EXPECT_LT((b - o).norm() / o.norm(), 1e-10);
}

TEST(RidgeSolve, RejectsNegativeLambdaAndNonFinite) {
    EXPECT_THROW(ridge_solve(Matrix::Identity(2, 2), Vector::Ones(2), -1.0), ValidationError);
    Matrix X = Matrix::Identity(2, 2);
    X(0, 1) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(ridge_solve(X, Vector::Ones(2), 0.1), ValidationError);
}

TEST(RidgeSolve, PseudoInverseOnRankDeficientSystem) {
    Matrix X(4, 3);
    X << 1, 2, 3, 2, 4, 6, 0, 1, 1, 1, 0, 1;  // col3 = col1 + col2
    const Vector Y = random_matrix(4, 1, 4).col(0);
    const RidgeSolution r = ridge_solve(X, Y, 0.0);
    EXPECT_EQ(r.effective_rank, 2);
    const Matrix pinv = X.completeOrthogonalDecomposition().pseudoInverse();
    EXPECT_LT((r.beta - pinv * Y).norm(), 1e-12);
}

TEST(RidgeProperty, ResidualIdentity) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> lu(-8.0, 1.0);
    for (std::uint64_t s = 0; s < 200; ++s) {
        const Eigen::Index K = 1 + static_cast<Eigen::Index>(s % 4);
        const Matrix X = random_matrix(2 * K, K + 1, 1000 + s);
        const Vector Y = random_matrix(2 * K, 1, 2000 + s).col(0);
        const double lambda = std::pow(10.0, lu(rng));
        const Vector b = ridge_solve(X, Y, lambda).beta;
        const Vector r = (X.transpose() * X + lambda * Matrix::Identity(K + 1, K + 1)) * b - X.transpose() * Y;
        EXPECT_LT(r.norm(), 1e-10 * (1.0 + (X.transpose() * Y).norm()));
    }
}

TEST(RidgeProperty, MonotoneShrinkage) {
    const std::vector<double> grid = {0.0, 1e-6, 1e-3, 0.01, 0.1, 1.0, 10.0};
    for (std::uint64_t s = 0; s < 50; ++s) {
        const Matrix X = random_matrix(6, 4, 3000 + s);
        const Vector Y = random_matrix(6, 1, 4000 + s).col(0);
        double prev = std::numeric_limits<double>::infinity();
        for (double l : grid) {
            const double n = ridge_solve(X, Y, l).beta.norm();
            EXPECT_LE(n, prev * (1.0 + 1e-12));
            prev = n;
        }
    }
}

TEST(RidgeProperty, ContinuityAtZero) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Matrix X = random_matrix(6, 4, 5000 + s);
        const Vector Y = random_matrix(6, 1, 6000 + s).col(0);
        const Vector b0 = ridge_solve(X, Y, 0.0).beta;
        double prev = (ridge_solve(X, Y, 1e-4).beta - b0).norm();
        for (double l : {1e-8, 1e-12}) {
            const double d = (ridge_solve(X, Y, l).beta - b0).norm();
            EXPECT_LE(d, prev + 1e-14);
            prev = d;
        }
        EXPECT_LT(prev, 1e-5);
    }
}

TEST(SelectLagKstar, ScalarDeterminants) {
    LagCovariances c;
    c.sigma_f[1] = Matrix::Constant(1, 1, 0.9);
    c.sigma_f[2] = Matrix::Constant(1, 1, -0.5);
    EXPECT_EQ(select_lag_kstar(c, 2), 1);
    EXPECT_THROW(select_lag_kstar(c, 0), ValidationError);
}

TEST(SelectLagKstar, TiesGoToSmallerLag) {
    LagCovariances c;
    c.sigma_f[1] = Matrix::Constant(1, 1, 0.4);
    c.sigma_f[2] = Matrix::Constant(1, 1, 0.1);
    c.sigma_f[3] = Matrix::Constant(1, 1, -0.4);
    EXPECT_EQ(select_lag_kstar(c, 3), 1);
}

TEST(SelectLagKstar, VarOneFactorsPreferLagOne) {
    SimConfig c;
    c.T = 2000;
    int ones = 0;
    for (std::uint64_t r = 0; r < 200; ++r) {
        Rng rng(rep_seed(77, r));
        const FactorSet f = demean(gen_factors(c, rng));
        LagCovariances covs;
        for (int k = 1; k <= 5; ++k) covs.sigma_f[k] = auto_cov_f(f, k);
        ones += select_lag_kstar(covs, 5) == 1;
    }
    EXPECT_GE(ones, 190);
}

TEST(SelectLambda, SingletonCandidate) {
    SimConfig c;
    const Replication rep = make_rep(c, 0);
    const Vector l = select_lambda(demean(PanelData(rep.y)), demean(FactorSet(rep.factors)),
                                   weights_banded(c.N, c.q), {0.05}, 0.8);
    EXPECT_TRUE((l.array() == 0.05).all());
}

TEST(SelectLambda, NoiselessDataPrefersSmallPenalty) {
    SimConfig c;
    c.T = 300;
    const SpatialWeights w = weights_banded(c.N, c.q);
    Rng rng(5);
    const FactorSet f = gen_factors(c, rng);
    const SaptParams p = gen_params(c, rng);
    const PanelData y = gen_panel(p, w, f.values(), Matrix::Zero(c.T, c.N));
    const PanelData yd = demean(y);
    const FactorSet fd = demean(f);
    const Matrix losses = validation_losses(yd, fd, w, {1e-9, 1.0}, 0.8);
    EXPECT_TRUE((losses.col(0).array() < losses.col(1).array()).all());
    const Vector l = select_lambda(yd, fd, w, {1e-9, 1.0}, 0.8);
    EXPECT_TRUE((l.array() == 1e-9).all());
}

TEST(SelectLambda, ReproducesIndependentGridTabulation) {
    SimConfig c;
    c.T = 200;
    const SpatialWeights w = weights_banded(c.N, c.q);
    const Replication rep = make_rep(c, 3);
    const PanelData y = demean(PanelData(rep.y));
    const FactorSet f = demean(FactorSet(rep.factors));
    const std::vector<double>& grid = default_lambda_grid();
    const Vector chosen = select_lambda(y, f, w, grid, 0.8);

    const Eigen::Index T1 = 160, T = c.T, N = c.N, K = c.K;
    const Matrix ytr = y.values().topRows(T1), ftr = f.values().topRows(T1);
    const Matrix syf0 = sapt::test::loop_lag_cov(ytr, ftr, 0);
    const Matrix syf1 = sapt::test::loop_lag_cov(ytr, ftr, 1);
    const Matrix sf0 = sapt::test::loop_lag_cov(ftr, ftr, 0);
    const Matrix sf1 = sapt::test::loop_lag_cov(ftr, ftr, 1);
    for (Eigen::Index i = 0; i < N; ++i) {
        const Eigen::RowVectorXd wi = w.row(i);
        Matrix X(2 * K, K + 1);
        Vector Y(2 * K);
        X.block(0, 0, K, 1) = (wi * syf0).transpose();
        X.block(0, 1, K, K) = sf0;
        X.block(K, 0, K, 1) = (wi * syf1).transpose();
        X.block(K, 1, K, K) = sf1.transpose();
        Y << syf0.row(i).transpose(), syf1.row(i).transpose();
        double best = std::numeric_limits<double>::infinity();
        double best_l = 0.0;
        for (double l : grid) {
            const Vector b = normal_equations(X, Y, l);
            double loss = 0.0;
            for (Eigen::Index t = T1; t < T; ++t) {
                const double e = y.values()(t, i) - b(0) * wi.dot(y.values().row(t)) -
                                 b.tail(K).dot(f.values().row(t));
                loss += e * e;
            }
            loss /= static_cast<double>(T - T1);
            if (loss <= best * (1.0 + 1e-12)) {
                best = std::min(best, loss);
                best_l = l;
            }
        }
        EXPECT_EQ(chosen(i), best_l) << "unit " << i;
    }
}

TEST(SelectLambda, DegenerateSplitRejected) {
    SimConfig c;
    c.T = 20;
    const Replication rep = make_rep(c, 0);
    EXPECT_THROW(select_lambda(demean(PanelData(rep.y)), demean(FactorSet(rep.factors)), weights_banded(c.N, c.q),
                               {0.1}, 0.1),
                 ValidationError);
}

TEST(EstimateObserved, NoiselessPureFactorModelReachesIdentifiedSet) {
    // With rho = 0 and eps = 0 the first design column is a combination of the
    // others, so the moment system pins beta_i down only up to the null vector
    // n_i = (1, -B'w_i). The ridge limit returns the minimum-norm element.
    SimConfig c;
    c.T = 500;
    const SpatialWeights w = weights_banded(c.N, c.q);
    Rng rng(17);
    const FactorSet f = gen_factors(c, rng);
    SaptParams p = gen_params(c, rng);
    p.rho.setZero();
    const PanelData y = demean(gen_panel(p, w, f.values(), Matrix::Zero(c.T, c.N)));
    const FactorSet fd = demean(f);
    const SaptEstimate est = estimate_observed(y, fd, w, 1e-12, LagSpec::fixed(1));
    for (Eigen::Index i = 0; i < c.N; ++i) {
        const Matrix& X = est.systems[static_cast<size_t>(i)].design;
        Vector beta(c.K + 1), bhat(c.K + 1), n(c.K + 1);
        beta << 0.0, p.loadings.row(i).transpose();
        bhat << est.params.rho(i), est.params.loadings.row(i).transpose();
        n << 1.0, -(p.loadings.transpose() * w.row(i).transpose());
        EXPECT_LT((X * (bhat - beta)).norm(), 1e-6 * (1.0 + X.norm()));
        EXPECT_LT(std::abs(n.dot(bhat)) / n.norm(), 1e-6 * (1.0 + bhat.norm()));
    }
    EXPECT_LT(est.residuals.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(EstimateObserved, ResidualsReconstructExactly) {
    SimConfig c;
    const SpatialWeights w = weights_banded(c.N, c.q);
    const Replication rep = make_rep(c, 1);
    const PanelData y = demean(PanelData(rep.y));
    const FactorSet f = demean(FactorSet(rep.factors));
    const SaptEstimate est = estimate_observed(y, f, w, 1e-3);
    const Matrix e = structural_residuals(y.values(), f.values(), est.params, w);
    EXPECT_LT((est.residuals - e).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_EQ(est.lag_pair, (LagPair{0, 1}));
    EXPECT_TRUE((est.lambda_used.array() == 1e-3).all());
}

TEST(EstimateObserved, LambdaSpecVariants) {
    SimConfig c;
    c.T = 300;
    const SpatialWeights w = weights_banded(c.N, c.q);
    const Replication rep = make_rep(c, 2);
    const PanelData y = demean(PanelData(rep.y));
    const FactorSet f = demean(FactorSet(rep.factors));
    Vector lv = Vector::LinSpaced(c.N, 1e-4, 1e-1);
    const SaptEstimate a = estimate_observed(y, f, w, lv);
    EXPECT_EQ(a.lambda_used, lv);
    const SaptEstimate b = estimate_observed(y, f, w, LambdaAuto{});
    EXPECT_EQ(b.lambda_used, select_lambda(y, f, w, default_lambda_grid(), 0.8));
    LambdaAuto shared;
    shared.shared = true;
    const SaptEstimate s = estimate_observed(y, f, w, shared);
    EXPECT_TRUE((s.lambda_used.array() == s.lambda_used(0)).all());
    EXPECT_THROW(estimate_observed(y, f, w, Vector::Ones(3).eval()), ValidationError);
}

TEST(EstimateObserved, BoostedLagUsesKstar) {
    SimConfig c;
    const SpatialWeights w = weights_banded(c.N, c.q);
    const Replication rep = make_rep(c, 4);
    const PanelData y = demean(PanelData(rep.y));
    const FactorSet f = demean(FactorSet(rep.factors));
    const SaptEstimate est = estimate_observed(y, f, w, 1e-3, LagSpec::boost(4));
    const LagCovariances covs = compute_covariances(y, f, {1, 2, 3, 4});
    EXPECT_EQ(est.lag_pair.second, select_lag_kstar(covs, 4));
}

TEST(SywProperty, UnitDecoupling) {
    SimConfig c;
    const SpatialWeights w = weights_banded(c.N, c.q);
    const Replication rep = make_rep(c, 5);
    const PanelData y = demean(PanelData(rep.y));
    const FactorSet f = demean(FactorSet(rep.factors));
    const SaptEstimate a = estimate_observed(y, f, w, 1e-3);
    Matrix wp = w.values();
    wp.row(3).swap(wp.row(17));
    const SaptEstimate b = estimate_observed(y, f, SpatialWeights(wp, false), 1e-3);
    for (Eigen::Index i : {0, 5, 10, 24}) {
        EXPECT_EQ(a.params.rho(i), b.params.rho(i));
        EXPECT_EQ(a.params.loadings.row(i), b.params.loadings.row(i));
    }
}

TEST(SywProperty, StackingRestoresRank) {
    SimConfig c;
    c.K = 1;
    const SpatialWeights w = weights_banded(c.N, c.q);
    const Replication rep = make_rep(c, 6);
    const PanelData y = demean(PanelData(rep.y));
    const FactorSet f = demean(FactorSet(rep.factors));
    const LagCovariances covs = compute_covariances(y, f, {1});
    for (Eigen::Index i = 0; i < c.N; ++i) {
        Eigen::JacobiSVD<Matrix> s2(build_system(i, covs, w, 1).design);
        Eigen::JacobiSVD<Matrix> s1(build_system(i, covs, w, 0).design);
        s2.setThreshold(1e-10);
        s1.setThreshold(1e-10);
        EXPECT_EQ(s2.rank(), c.K + 1);
        EXPECT_LE(s1.rank(), c.K);
    }
}
