#include "sapt/forecast.hpp"

#include <cmath>

namespace sapt {

std::string to_string(ModelTag tag) {
    switch (tag) {
        case ModelTag::SaptObserved: return "sapt-observed";
        case ModelTag::SaptLatent: return "sapt-latent";
        case ModelTag::FactorOnly: return "factor-only";
    }
    return "unknown";
}

ModelTag model_from_string(const std::string& name) {
    if (name == "sapt-observed") return ModelTag::SaptObserved;
    if (name == "sapt-latent") return ModelTag::SaptLatent;
    if (name == "factor-only") return ModelTag::FactorOnly;
    throw ValidationError("unknown model tag '" + name + "'");
}

Split split(const PanelData& panel, const FactorSet* factors, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ValidationError("split: fraction must lie in (0, 1)");
    const Eigen::Index T = panel.T();
    if (factors && factors->T() != T) throw ValidationError("split: panel and factors differ in T");
    const Eigen::Index K = factors ? factors->K() : 0;
    Split s;
    s.T1 = static_cast<Eigen::Index>(std::floor(fraction * static_cast<double>(T)));
    if (s.T1 < K + 2 || T - s.T1 < K + 2) {
        throw ValidationError("split: degenerate split T1=" + std::to_string(s.T1) + " of T=" +
                              std::to_string(T) + " (need >= K+2 rows on each side)");
    }
    s.y_train = panel.values().topRows(s.T1);
    s.y_test = panel.values().bottomRows(T - s.T1);
    if (factors) {
        s.f_train = factors->values().topRows(s.T1);
        s.f_test = factors->values().bottomRows(T - s.T1);
    }
    return s;
}

Split center_by_training(const Split& s) {
    Split c = s;
    const Eigen::RowVectorXd my = s.y_train.colwise().mean();
    c.y_train.rowwise() -= my;
    c.y_test.rowwise() -= my;
    if (s.f_train) {
        const Eigen::RowVectorXd mf = s.f_train->colwise().mean();
        c.f_train->rowwise() -= mf;
        c.f_test->rowwise() -= mf;
    }
    return c;
}

Matrix predict_observed(const SaptEstimate& estimate, const SpatialWeights& weights,
                        const Matrix& test_factors) {
    const SaptParams& p = estimate.params;
    if (test_factors.cols() != p.K()) throw ValidationError("predict_observed: factor count mismatch");
    const SystemDiagnostics d = validate_system(p, weights);
    if (!d.pass) {
        throw NumericError("predict_observed: estimated S_N(rho) is singular (min singular value " +
                           std::to_string(d.min_singular_value) + "); try a larger lambda");
    }
    const Matrix S = spatial_operator(p.rho, weights);
    // rows: y_hat_t' = f_t' B' S^{-T}
    const Matrix rhs = p.loadings * test_factors.transpose();  // N x n
    return Eigen::PartialPivLU<Matrix>(S).solve(rhs).transpose();
}

Matrix predict_structural(const SaptEstimate& estimate, const SpatialWeights& weights,
                          const Matrix& test_panel, const Matrix& test_factors) {
    const SaptParams& p = estimate.params;
    if (test_factors.cols() != p.K() || test_panel.cols() != p.N() ||
        test_panel.rows() != test_factors.rows()) {
        throw ValidationError("predict_structural: shape mismatch");
    }
    return test_panel * weights.values().transpose() * p.rho.asDiagonal() +
           test_factors * p.loadings.transpose();
}

Matrix predict_latent(const SaptEstimate& estimate, const LatentFactorFit& fit,
                      const SpatialWeights& weights, const Matrix& test_panel,
                      PredictorForm form) {
    if (test_panel.cols() != fit.loadings.rows()) throw ValidationError("predict_latent: shape mismatch");
    const Matrix fhat = test_panel * fit.loadings / static_cast<double>(fit.loadings.rows());
    if (form == PredictorForm::Structural) return predict_structural(estimate, weights, test_panel, fhat);
    return predict_observed(estimate, weights, fhat);
}

Matrix fit_factor_only(const Matrix& y_train, const Matrix& f_train) {
    if (y_train.rows() != f_train.rows()) throw ValidationError("fit_factor_only: T mismatch");
    Eigen::JacobiSVD<Matrix> svd(f_train);
    const Vector& s = svd.singularValues();
    if (s(s.size() - 1) <= 1e-12 * s(0)) throw NumericError("fit_factor_only: factor matrix is rank deficient");
    const Matrix G = f_train.transpose() * f_train;
    return G.ldlt().solve(f_train.transpose() * y_train).transpose();
}

Matrix predict_factor_only(const Matrix& loadings0, const Matrix& test_factors) {
    if (test_factors.cols() != loadings0.cols()) throw ValidationError("predict_factor_only: factor count mismatch");
    return test_factors * loadings0.transpose();
}

double fe(const Matrix& predicted, const Matrix& actual) {
    if (predicted.rows() != actual.rows() || predicted.cols() != actual.cols() || actual.size() == 0) {
        throw ValidationError("fe: shape mismatch");
    }
    return std::sqrt((predicted - actual).squaredNorm() / static_cast<double>(actual.size()));
}

ForecastReport make_report(ModelTag model, const Matrix& predicted, const Matrix& actual,
                           Eigen::Index T1) {
    ForecastReport r;
    r.model = model;
    r.fe = fe(predicted, actual);
    r.per_time_sq_error = (predicted - actual).rowwise().squaredNorm();
    r.T1 = T1;
    r.N = actual.cols();
    return r;
}

ForecastReport run_forecast(const PanelData& panel, const FactorSet* factors,
                            const SpatialWeights& weights, ModelTag model,
                            const ForecastOptions& options) {
    if (model != ModelTag::SaptLatent && !factors) {
        throw ValidationError("model " + to_string(model) + " requires observed factors");
    }
    const Split c = center_by_training(split(panel, model == ModelTag::SaptLatent ? nullptr : factors,
                                             options.fraction));
    const PanelData train(PanelData::Centered{}, c.y_train, panel.unit_ids());
    switch (model) {
        case ModelTag::SaptObserved: {
            const FactorSet ftrain(FactorSet::Centered{}, *c.f_train, factors->factor_ids());
            const SaptEstimate est = estimate_observed(train, ftrain, weights, options.lambda, options.lag);
            const Matrix pred = options.form == PredictorForm::Structural
                                    ? predict_structural(est, weights, c.y_test, *c.f_test)
                                    : predict_observed(est, weights, *c.f_test);
            return make_report(model, pred, c.y_test, c.T1);
        }
        case ModelTag::SaptLatent: {
            const LatentEstimate le =
                estimate_latent(train, weights, options.k0, options.K_spec, options.lambda, options.lag);
            const Matrix pred = predict_latent(le.estimate, le.fit, weights, c.y_test, options.form);
            return make_report(model, pred, c.y_test, c.T1);
        }
        case ModelTag::FactorOnly: {
            const Matrix B0 = fit_factor_only(c.y_train, *c.f_train);
            return make_report(model, predict_factor_only(B0, *c.f_test), c.y_test, c.T1);
        }
    }
    throw ValidationError("run_forecast: unknown model");
}

}  // namespace sapt
