#include "sapt/syw.hpp"

#include <cmath>
#include <limits>

namespace sapt {

namespace {

void check_pair(const PanelData& panel, const FactorSet& factors, const SpatialWeights& weights) {
    if (panel.T() != factors.T()) throw ValidationError("panel and factors differ in T");
    if (panel.N() != weights.N()) throw ValidationError("panel and weights differ in N");
}

Vector resolve_lambdas(const LambdaSpec& spec, const PanelData& panel, const FactorSet& factors,
                       const SpatialWeights& weights, int k) {
    const Eigen::Index N = panel.N();
    if (const double* l = std::get_if<double>(&spec)) {
        if (!(*l >= 0.0)) throw ValidationError("lambda must be nonnegative");
        return Vector::Constant(N, *l);
    }
    if (const Vector* v = std::get_if<Vector>(&spec)) {
        if (v->size() != N) throw ValidationError("per-unit lambda vector has wrong length");
        if ((v->array() < 0.0).any() || !v->allFinite()) {
            throw ValidationError("lambda must be nonnegative");
        }
        return *v;
    }
    const auto& a = std::get<LambdaAuto>(spec);
    return select_lambda(panel, factors, weights, a.candidates, a.split_fraction, k, a.shared);
}

}  // namespace

RidgeSystem build_system(Eigen::Index i, const LagCovariances& covs, const SpatialWeights& weights,
                         int k) {
    const Matrix& syf0 = covs.yf(0);
    const Eigen::Index N = syf0.rows();
    const Eigen::Index K = syf0.cols();
    if (i < 0 || i >= N) throw ValidationError("build_system: unit index out of range");
    if (weights.N() != N) throw ValidationError("build_system: weights and covariances differ in N");
    if (k < 0) throw ValidationError("build_system: negative lag");

    const Eigen::RowVectorXd w = weights.row(i);
    RidgeSystem s;
    s.unit_index = i;
    s.lag_pair = LagPair{0, k};
    const Eigen::Index rows = k > 0 ? 2 * K : K;
    s.response.resize(rows);
    s.design.resize(rows, K + 1);

    s.response.head(K) = syf0.row(i).transpose();
    s.design.block(0, 0, K, 1) = (w * syf0).transpose();
    s.design.block(0, 1, K, K) = covs.f(0);
    if (k > 0) {
        const Matrix& syfk = covs.yf(k);
        s.response.tail(K) = syfk.row(i).transpose();
        s.design.block(K, 0, K, 1) = (w * syfk).transpose();
        s.design.block(K, 1, K, K) = covs.f(k).transpose();
    }
    return s;
}

RidgeSolution ridge_solve(const Matrix& X, const Vector& Y, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ValidationError("ridge_solve: lambda must be a finite nonnegative number");
    }
    if (X.rows() != Y.size()) throw ValidationError("ridge_solve: design/response size mismatch");
    if (!X.allFinite() || !Y.allFinite()) throw ValidationError("ridge_solve: non-finite system");

    Eigen::JacobiSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double smax = s.size() ? s(0) : 0.0;
    const double cutoff = std::numeric_limits<double>::epsilon() *
                          static_cast<double>(std::max(X.rows(), X.cols())) * smax;

    RidgeSolution out;
    out.lambda = lambda;
    const Vector uty = svd.matrixU().transpose() * Y;
    Vector scaled = Vector::Zero(s.size());
    for (Eigen::Index j = 0; j < s.size(); ++j) {
        if (s(j) > cutoff) ++out.effective_rank;
        if (lambda > 0.0) {
            scaled(j) = s(j) / (s(j) * s(j) + lambda) * uty(j);
        } else if (s(j) > cutoff) {
            scaled(j) = uty(j) / s(j);
        }
    }
    out.beta = svd.matrixV() * scaled;
    return out;
}

RidgeSolution ridge_solve(const RidgeSystem& system, double lambda) {
    return ridge_solve(system.design, system.response, lambda);
}

int select_lag_kstar(const LagCovariances& covs, int kbar) {
    if (kbar < 1) throw ValidationError("select_lag_kstar: kbar must be >= 1");
    int best = 1;
    double best_val = -1.0;
    for (int k = 1; k <= kbar; ++k) {
        Eigen::JacobiSVD<Matrix> svd(covs.f(k));
        const double crit = svd.singularValues().prod();
        if (crit > best_val) {
            best_val = crit;
            best = k;
        }
    }
    return best;
}

const std::vector<double>& default_lambda_grid() {
    static const std::vector<double> grid{1e-9, 1e-6, 1e-3, 1e-2, 1e-1, 1.0};
    return grid;
}

Matrix validation_losses(const PanelData& panel, const FactorSet& factors,
                         const SpatialWeights& weights, const std::vector<double>& candidates,
                         double split_fraction, int k) {
    check_pair(panel, factors, weights);
    if (candidates.empty()) throw ValidationError("select_lambda: empty candidate set");
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
        throw ValidationError("select_lambda: split_fraction must lie in (0, 1)");
    }
    const Eigen::Index T = panel.T();
    const Eigen::Index K = factors.K();
    const auto T1 = static_cast<Eigen::Index>(std::floor(split_fraction * static_cast<double>(T)));
    if (T1 < K + 2 || T - T1 < K + 2 || k > T1 - 2) {
        throw ValidationError("select_lambda: degenerate split T1=" + std::to_string(T1) +
                              " of T=" + std::to_string(T));
    }
    const Matrix& y = panel.values();
    const Matrix& f = factors.values();
    const Matrix ytr = y.topRows(T1), ftr = f.topRows(T1);
    LagCovariances covs;
    covs.T_used = T1;
    for (int lag : {0, k}) {
        covs.sigma_yf[lag] = lagged_product(ytr, ftr, lag);
        covs.sigma_f[lag] = lagged_product(ftr, ftr, lag);
    }

    const Matrix yv = y.bottomRows(T - T1), fv = f.bottomRows(T - T1);
    const Matrix wy = yv * weights.values().transpose();  // row t: (W y_t)'
    const Eigen::Index N = panel.N();
    Matrix losses(N, static_cast<Eigen::Index>(candidates.size()));
    for (Eigen::Index i = 0; i < N; ++i) {
        const RidgeSystem sys = build_system(i, covs, weights, k);
        for (size_t c = 0; c < candidates.size(); ++c) {
            if (!(candidates[c] >= 0.0)) throw ValidationError("select_lambda: negative candidate");
            const Vector beta = ridge_solve(sys, candidates[c]).beta;
            const Vector e = yv.col(i) - beta(0) * wy.col(i) - fv * beta.tail(K);
            losses(i, static_cast<Eigen::Index>(c)) = e.squaredNorm() / static_cast<double>(T - T1);
        }
    }
    return losses;
}

Vector select_lambda(const PanelData& panel, const FactorSet& factors,
                     const SpatialWeights& weights, const std::vector<double>& candidates,
                     double split_fraction, int k, bool shared) {
    const Matrix losses = validation_losses(panel, factors, weights, candidates, split_fraction, k);
    auto pick = [&](const Eigen::RowVectorXd& row) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < row.size(); ++c) {
            const bool smaller = row(c) < row(best);
            const bool tie_larger = row(c) == row(best) && candidates[c] > candidates[best];
            if (smaller || tie_larger) best = c;
        }
        return candidates[static_cast<size_t>(best)];
    };
    const Eigen::Index N = panel.N();
    if (shared) return Vector::Constant(N, pick(losses.colwise().sum()));
    Vector out(N);
    for (Eigen::Index i = 0; i < N; ++i) out(i) = pick(losses.row(i));
    return out;
}

SaptEstimate estimate_from_covariances(const LagCovariances& covs, const SpatialWeights& weights,
                                       const Vector& lambdas, int k) {
    const Eigen::Index N = covs.yf(0).rows();
    const Eigen::Index K = covs.yf(0).cols();
    if (lambdas.size() != N) throw ValidationError("estimate: lambda vector has wrong length");
    SaptEstimate est;
    est.params.rho.resize(N);
    est.params.loadings.resize(N, K);
    est.lambda_used = lambdas;
    est.lag_pair = LagPair{0, k};
    est.systems.reserve(static_cast<size_t>(N));
    for (Eigen::Index i = 0; i < N; ++i) {
        RidgeSystem sys = build_system(i, covs, weights, k);
        const RidgeSolution sol = ridge_solve(sys, lambdas(i));
        est.params.rho(i) = sol.beta(0);
        est.params.loadings.row(i) = sol.beta.tail(K).transpose();
        est.systems.push_back(std::move(sys));
    }
    return est;
}

SaptEstimate estimate_observed(const PanelData& panel, const FactorSet& factors,
                               const SpatialWeights& weights, const LambdaSpec& lambda_spec,
                               const LagSpec& lag_spec) {
    check_pair(panel, factors, weights);
    std::vector<int> lags;
    int k = lag_spec.k;
    if (lag_spec.boosted) {
        if (lag_spec.kbar < 1) throw ValidationError("kbar must be >= 1");
        for (int j = 1; j <= lag_spec.kbar; ++j) lags.push_back(j);
    } else {
        if (k < 0) throw ValidationError("instrument lag k must be >= 0");
        lags.push_back(k);
    }
    const LagCovariances covs = compute_covariances(panel, factors, lags);
    if (lag_spec.boosted) k = select_lag_kstar(covs, lag_spec.kbar);

    const Vector lambdas = resolve_lambdas(lambda_spec, panel, factors, weights, k);
    SaptEstimate est = estimate_from_covariances(covs, weights, lambdas, k);
    est.residuals = structural_residuals(panel.values(), factors.values(), est.params, weights);
    return est;
}

}  // namespace sapt
