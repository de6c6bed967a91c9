/** @file syw.hpp
 *  @brief Shrinkage Yule-Walker estimator with observed factors.
 *
 *  For unit i the lag-(0, k) moment equations are stacked into
 *      Y_i = (Sigma_yf' e_i ; Sigma_yf(k)' e_i)                    2K
 *      X_i = [Sigma_yf' w_i , Sigma_f ; Sigma_yf(k)' w_i , Sigma_f(k)']   2K x (K+1)
 *  and beta_i = (rho_i, b_i')' solves the ridge problem on (X_i, Y_i).
 */
#pragma once

#include "sapt/moments.hpp"

#include <variant>
#include <vector>

namespace sapt {

struct RidgeSolution {
    Vector beta;  // (rho_i, b_i')'
    double lambda = 0.0;
    int effective_rank = 0;
};

/// Stacked system for zero-based unit i with instrument lag k. k = 0 gives
/// the contemporaneous block alone (K x (K+1)).
RidgeSystem build_system(Eigen::Index i, const LagCovariances& covs, const SpatialWeights& weights,
                         int k);

/// lambda > 0: (X'X + lambda I)^{-1} X'Y. lambda = 0: Moore-Penrose solution
/// with singular values below eps * max(rows, cols) * s_max discarded.
RidgeSolution ridge_solve(const RidgeSystem& system, double lambda);
RidgeSolution ridge_solve(const Matrix& design, const Vector& response, double lambda);

/// Smallest k in [1, kbar] maximizing |det Sigma_f(k)|.
int select_lag_kstar(const LagCovariances& covs, int kbar);

const std::vector<double>& default_lambda_grid();

struct LambdaAuto {
    std::vector<double> candidates = default_lambda_grid();
    double split_fraction = 0.8;
    bool shared = false;  // one lambda for all units (sum of unit losses)
};

/// Fixed scalar, per-unit vector, or validation-based selection.
using LambdaSpec = std::variant<double, Vector, LambdaAuto>;

struct LagSpec {
    bool boosted = false;
    int k = 1;     // used when !boosted
    int kbar = 5;  // used when boosted

    static LagSpec fixed(int k) { return {false, k, 5}; }
    static LagSpec boost(int kbar = 5) { return {true, 1, kbar}; }
};

/// Validation losses (N x candidates): mean over t > T1 of
/// (y_it - rho_i w_i'y_t - b_i'f_t)^2 for the fit on t <= T1.
Matrix validation_losses(const PanelData& panel, const FactorSet& factors,
                         const SpatialWeights& weights, const std::vector<double>& candidates,
                         double split_fraction, int k = 1);

/// Per-unit argmin of the validation loss; ties go to the larger lambda.
Vector select_lambda(const PanelData& panel, const FactorSet& factors,
                     const SpatialWeights& weights, const std::vector<double>& candidates,
                     double split_fraction, int k = 1, bool shared = false);

/// Solves every unit's system from precomputed covariances.
SaptEstimate estimate_from_covariances(const LagCovariances& covs, const SpatialWeights& weights,
                                       const Vector& lambdas, int k);

SaptEstimate estimate_observed(const PanelData& panel, const FactorSet& factors,
                               const SpatialWeights& weights, const LambdaSpec& lambda_spec,
                               const LagSpec& lag_spec = {});

}  // namespace sapt
