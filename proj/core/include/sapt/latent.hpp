/** @file latent.hpp
 *  @brief Latent-factor pipeline: autocovariance eigenanalysis, factor
 *  recovery, factor-count selection and the two-step estimator.
 */
#pragma once

#include "sapt/syw.hpp"

namespace sapt {

struct LatentFactorFit {
    Matrix loadings;     // N x K, Lambda'Lambda/N = I
    Matrix factors;      // T x K, row t = (Lambda' y_t / N)'
    Vector eigenvalues;  // descending spectrum of M, length N
    int k0_used = 0;
};

/// M = sum_{k=1}^{k0} Sigma_y(k) Sigma_y(k)', symmetrized.
Matrix build_M(const PanelData& panel, int k0);

struct LoadingExtraction {
    Matrix loadings;
    Vector eigenvalues;
};

/// Top-K eigenvectors of M scaled by sqrt(N). Each column's entry of largest
/// magnitude is made positive (first such entry on ties).
LoadingExtraction extract_loadings(const Matrix& M, int K);

/// Row t of the result is (Lambda' y_t / N)'.
Matrix recover_factors(const Matrix& loadings, const PanelData& panel);

enum class IcPenalty { IC1, IC2 };

/// IC objective for j = 0..J.
Vector ic_values(const PanelData& panel, int J, IcPenalty penalty, int k0 = 2);
int select_K_ic(const PanelData& panel, int J, IcPenalty penalty, int k0 = 2);

/// argmin_{1<=l<=R} mu_{l+1} / mu_l. R <= 0 selects floor(N/2) (capped at N-1).
int select_K_ratio(const Vector& eigenvalues, int R = 0);

enum class KRule { Fixed, IC1, IC2, Ratio };

struct KSpec {
    KRule rule = KRule::Ratio;
    int K = 0;  // used with KRule::Fixed
    int J = 8;  // IC scan bound
    int R = 0;  // ratio scan bound, 0 = floor(N/2)
};

struct LatentEstimate {
    SaptEstimate estimate;
    LatentFactorFit fit;
    int K_hat = 0;
    KRule rule = KRule::Ratio;
};

/// Extracts factors from M, then runs the observed-factor estimator on the
/// recovered factors. Loadings b_i are identified only up to rotation.
LatentEstimate estimate_latent(const PanelData& panel, const SpatialWeights& weights, int k0,
                               const KSpec& K_spec, const LambdaSpec& lambda_spec,
                               const LagSpec& lag_spec = {});

}  // namespace sapt
