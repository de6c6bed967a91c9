/** @file moments.hpp
 *  @brief Lagged sample covariance objects with divisor T at every lag.
 */
#pragma once

#include "sapt/model.hpp"

#include <map>

namespace sapt {

/// Sigma_yf(k), Sigma_f(k), Sigma_y(k) keyed by lag.
struct LagCovariances {
    std::map<int, Matrix> sigma_yf;  // N x K
    std::map<int, Matrix> sigma_f;   // K x K
    std::map<int, Matrix> sigma_y;   // N x N, lags >= 1
    Eigen::Index T_used = 0;

    const Matrix& yf(int k) const;
    const Matrix& f(int k) const;
    const Matrix& y(int k) const;
};

/// (1/T) sum_{t=k+1}^T y_t f_{t-k}'
Matrix cross_cov(const PanelData& panel, const FactorSet& factors, int k);
/// (1/T) sum_{t=k+1}^T f_t f_{t-k}'
Matrix auto_cov_f(const FactorSet& factors, int k);
/// (1/T) sum_{t=k+1}^T y_t y_{t-k}', k >= 1
Matrix auto_cov_y(const PanelData& panel, int k);

/// Unchecked kernel on raw matrices: (1/T) sum_{t=k+1}^T a_t b_{t-k}'.
Matrix lagged_product(const Matrix& a, const Matrix& b, int k);

/// Sigma_yf and Sigma_f at every lag in `lags` (lag 0 is always included).
LagCovariances compute_covariances(const PanelData& panel, const FactorSet& factors,
                                   const std::vector<int>& lags);

}  // namespace sapt
