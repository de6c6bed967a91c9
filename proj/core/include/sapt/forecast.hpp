/** @file forecast.hpp
 *  @brief Train/test splitting, predictors and the FE metric.
 *
 *  Out-of-sample workflows center both segments with training-window means.
 *  Latent-factor predictions use f_hat_t = Lambda_hat' y_t / N from the test
 *  observation itself, so they measure fit of the common component rather
 *  than an ex-ante forecast.
 */
#pragma once

#include "sapt/latent.hpp"

#include <optional>
#include <string>

namespace sapt {

enum class ModelTag { SaptObserved, SaptLatent, FactorOnly };

std::string to_string(ModelTag tag);
ModelTag model_from_string(const std::string& name);

/// Structural: y_hat_t = D(rho) W y_t + B f_t (uses contemporaneous neighbor
/// observations). ReducedForm: y_hat_t = S_N(rho)^{-1} B f_t.
enum class PredictorForm { Structural, ReducedForm };

struct Split {
    Eigen::Index T1 = 0;
    Matrix y_train, y_test;
    std::optional<Matrix> f_train, f_test;
};

/// Chronological split at T1 = floor(fraction * T); both sides need >= K+2 rows
/// (K = 0 without factors).
Split split(const PanelData& panel, const FactorSet* factors, double fraction = 0.8);

/// Subtracts training means from both segments (y and f).
Split center_by_training(const Split& s);

/// S_N(rho_hat)^{-1} B_hat f_t for each row of test_factors.
Matrix predict_observed(const SaptEstimate& estimate, const SpatialWeights& weights,
                        const Matrix& test_factors);

/// D(rho_hat) W y_t + B_hat f_t for each test row.
Matrix predict_structural(const SaptEstimate& estimate, const SpatialWeights& weights,
                          const Matrix& test_panel, const Matrix& test_factors);

/// f_hat_t = Lambda_hat' y_t / N from the test rows, then the chosen predictor.
Matrix predict_latent(const SaptEstimate& estimate, const LatentFactorFit& fit,
                      const SpatialWeights& weights, const Matrix& test_panel,
                      PredictorForm form = PredictorForm::ReducedForm);

/// Per-unit least squares of y on f without spatial terms (N x K).
Matrix fit_factor_only(const Matrix& y_train, const Matrix& f_train);
Matrix predict_factor_only(const Matrix& loadings0, const Matrix& test_factors);

/// ((1/(N (T - T1))) sum_t ||y_hat_t - y_t||^2)^{1/2}
double fe(const Matrix& predicted, const Matrix& actual);

struct ForecastReport {
    ModelTag model = ModelTag::SaptObserved;
    double fe = 0.0;
    Vector per_time_sq_error;  // ||y_hat_t - y_t||^2 per test row
    Eigen::Index T1 = 0;
    Eigen::Index N = 0;
};

ForecastReport make_report(ModelTag model, const Matrix& predicted, const Matrix& actual,
                           Eigen::Index T1);

struct ForecastOptions {
    double fraction = 0.8;
    LambdaSpec lambda = 1e-3;
    LagSpec lag = LagSpec::fixed(1);
    int k0 = 2;
    KSpec K_spec{};
    PredictorForm form = PredictorForm::Structural;
};

/// split -> center -> estimate on train -> predict test -> FE.
ForecastReport run_forecast(const PanelData& panel, const FactorSet* factors,
                            const SpatialWeights& weights, ModelTag model,
                            const ForecastOptions& options);

}  // namespace sapt
