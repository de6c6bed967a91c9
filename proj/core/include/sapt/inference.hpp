/** @file inference.hpp
 *  @brief Asymptotic covariance objects for the observed- and latent-factor
 *  estimators and for the recovered factors.
 */
#pragma once

#include "sapt/syw.hpp"

namespace sapt {

enum class Kernel { Bartlett, Truncated };

/// Long-run covariance blocks of z_t = (f_t e_t ; f_{t-k} e_t).
struct LongRunFEps {
    Matrix sigma_fe_0;  // Sigma_{f eps}(0)
    Matrix sigma_fe_1;  // Sigma_{f eps}(k), cross block
    Matrix omega_fe_0;  // Omega_{f eps}(0)
    int bandwidth = 0;
    Kernel kernel = Kernel::Bartlett;
    int lag = 1;
};

/// floor(4 (T/100)^{2/9})
int default_bandwidth(Eigen::Index T);

/// Kernel-weighted autocovariance sums of z_t over t = k+1..T (uncentered,
/// divisor T-k). bandwidth < 0 selects default_bandwidth(T).
LongRunFEps longrun_fe(const Matrix& factors, const Vector& residual, int bandwidth = -1,
                       Kernel kernel = Kernel::Bartlett, int lag = 1);

struct UnitInference {
    Matrix V;    // (K+1) x (K+1)
    Matrix XUX;  // (K+1) x (K+1)
    /// sqrt(T) V (beta_hat - beta) when the truth is supplied; empty otherwise.
    Vector standardized_stat;
    /// Plug-in Wald interval endpoints (applied mode), filled by wald_intervals.
    Vector lower, upper;
};

/// V_i and X_i'U_i X_i from the block displays, using covs at lags 0 and
/// longrun.lag.
UnitInference unit_asymptotics(Eigen::Index i, const LagCovariances& covs,
                               const SpatialWeights& weights, const LongRunFEps& longrun);

/// Rotated analogues V_i^H and X_i^H' U_i^H X_i^H.
UnitInference latent_unit_asymptotics(Eigen::Index i, const LagCovariances& covs,
                                       const SpatialWeights& weights, const LongRunFEps& longrun,
                                       const Matrix& H);

/// Fills standardized_stat = sqrt(T) V (beta_hat - beta).
void standardize(UnitInference& inf, const Vector& beta_hat, const Vector& beta, Eigen::Index T);

/// Two-sided coverage check of component j: |stat_j| <= z_{1-alpha/2} sqrt(XUX_jj).
bool covers(const UnitInference& inf, Eigen::Index j, double alpha);

/// Plug-in intervals beta_hat +/- z sqrt(diag(V^+ XUX V^+ / T)).
void wald_intervals(UnitInference& inf, const Vector& beta_hat, Eigen::Index T, double alpha);

double normal_quantile(double p);

/// Gamma = (1/N) P E(ee') P' with P = Lambda' S_N(rho)^{-1}.
Matrix factor_gamma(const Matrix& loadings, const SaptParams& params,
                    const SpatialWeights& weights, const Matrix& noise_cov);

/// Plug-in covariance of sqrt(N)(f_hat_t - K f_t): K Gamma K'.
Matrix factor_asy_cov(const Matrix& loadings, const SaptParams& params,
                      const SpatialWeights& weights, const Matrix& noise_cov, const Matrix& K);

/// K_NT = Lambda_hat' Lambda / N
Matrix rotation_KNT(const Matrix& estimated_loadings, const Matrix& true_loadings);

/// diag(1, (K')^{-1})
Matrix rotation_Kstar(const Matrix& K);

}  // namespace sapt
