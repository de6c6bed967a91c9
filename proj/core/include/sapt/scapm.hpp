/** @file scapm.hpp
 *  @brief Mean-variance objects (tangency portfolios, spatial rho, pricing
 *  residual) and spatial weight matrix builders.
 */
#pragma once

#include "sapt/model.hpp"

#include <string>
#include <vector>

namespace sapt {

struct MarketInputs {
    Vector mu;   // expected returns
    Matrix cov;  // return covariance
    double rf = 0.0;

    /// Checks symmetry (1e-10) and PSD (smallest eigenvalue > -1e-10).
    void validate() const;
};

struct GeoLocations {
    std::vector<std::string> ids;
    Vector lat;  // degrees
    Vector lon;  // degrees

    void validate() const;
};

/// w proportional to cov^{-1}(mu - rf 1), scaled to sum to one.
Vector tangency_weights(const MarketInputs& market);

/// Tangency portfolio of the market without asset j (zero-based), with a 0
/// re-inserted at position j.
Vector leave_one_out_tangency(Eigen::Index j, const MarketInputs& market);

/// rho_j = (cov w_j)_j / (w_j' cov w_j)
double spatial_rho(Eigen::Index j, const MarketInputs& market, const Vector& w_j);

/// (mu_j - rf) - rho_j (mu_{j,M} - rf) with mu_{j,M} = w_j' mu.
double pricing_identity_residual(Eigen::Index j, const MarketInputs& market, const Vector& w_j);

/// (mu0_j - rf) - rho_j w_j'(mu0 - rf 1) - sum_k delta_kj (mu_k - rf)
double pricing_decomposition(Eigen::Index j, double rho_j, const Vector& w_j, const Vector& mu0,
                             double rf, const Vector& factor_premia, const Vector& delta_j);

/// w_ij = (s_i d_ij)^{-1}, s_i = sum_{j != i} 1/d_ij
SpatialWeights weights_from_distance(const Matrix& distances,
                                     const std::vector<std::string>& ids = {});

constexpr double kEarthRadiusKm = 6371.0;

Matrix haversine_matrix(const GeoLocations& locations, double radius_km = kEarthRadiusKm);

/// Inverse distances taken as pairwise sample correlations of the panel.
SpatialWeights weights_from_correlation(const PanelData& panel);

/// 1 for 1 <= |i-j| <= q, then row-normalized.
SpatialWeights weights_banded(Eigen::Index N, Eigen::Index q);

/// 1 for d_ij <= threshold (i != j), then row-normalized.
SpatialWeights weights_radius(const Matrix& distances, double threshold,
                              const std::vector<std::string>& ids = {});

}  // namespace sapt
