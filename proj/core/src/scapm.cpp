#include "sapt/scapm.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace sapt {

namespace {

std::string unit_name(const std::vector<std::string>& ids, Eigen::Index i) {
    if (static_cast<size_t>(i) < ids.size()) return ids[static_cast<size_t>(i)];
    return std::to_string(i + 1);
}

void check_square(const Matrix& d, const char* what) {
    if (d.rows() != d.cols() || d.rows() < 2) {
        throw ValidationError(std::string(what) + ": need a square matrix with N >= 2");
    }
    require_finite(d, what);
}

}  // namespace

void MarketInputs::validate() const {
    if (cov.rows() != cov.cols() || cov.rows() != mu.size()) {
        throw ValidationError("MarketInputs: mu and cov sizes disagree");
    }
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
        throw ValidationError("MarketInputs: covariance is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) < -1e-10) {
        throw ValidationError("MarketInputs: covariance is not positive semidefinite");
    }
}

void GeoLocations::validate() const {
    if (lat.size() != lon.size() || static_cast<size_t>(lat.size()) != ids.size()) {
        throw ValidationError("GeoLocations: ids, lat and lon lengths differ");
    }
    for (Eigen::Index i = 0; i < lat.size(); ++i) {
        if (!(std::abs(lat(i)) <= 90.0) || !(std::abs(lon(i)) <= 180.0)) {
            throw ValidationError("GeoLocations: invalid coordinates for " + ids[static_cast<size_t>(i)]);
        }
    }
}

Vector tangency_weights(const MarketInputs& market) {
    market.validate();
    const Eigen::Index N = market.mu.size();
    Eigen::SelfAdjointEigenSolver<Matrix> es(market.cov, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) <= 1e-10) {
        throw NumericError("tangency_weights: covariance is singular");
    }
    const Vector excess = market.mu - market.rf * Vector::Ones(N);
    if (excess.cwiseAbs().maxCoeff() == 0.0) {
        throw ValidationError("tangency_weights: excess returns are all zero");
    }
    const Vector raw = market.cov.llt().solve(excess);
    const double s = raw.sum();
    if (s == 0.0) throw NumericError("tangency_weights: weights cannot be normalized (zero sum)");
    if (s < 0.0) warn("tangency_weights: negative normalizer (net-short tangency portfolio)");
    return raw / s;
}

Vector leave_one_out_tangency(Eigen::Index j, const MarketInputs& market) {
    const Eigen::Index N = market.mu.size();
    if (N < 3) throw ValidationError("leave_one_out_tangency: need N >= 3");
    if (j < 0 || j >= N) throw ValidationError("leave_one_out_tangency: asset index out of range");
    std::vector<Eigen::Index> keep;
    for (Eigen::Index a = 0; a < N; ++a) {
        if (a != j) keep.push_back(a);
    }
    MarketInputs sub;
    sub.mu = market.mu(keep);
    sub.cov = market.cov(keep, keep);
    sub.rf = market.rf;
    const Vector ws = tangency_weights(sub);
    Vector w = Vector::Zero(N);
    w(keep) = ws;
    return w;
}

double spatial_rho(Eigen::Index j, const MarketInputs& market, const Vector& w_j) {
    if (w_j.size() != market.mu.size() || j < 0 || j >= w_j.size()) {
        throw ValidationError("spatial_rho: shape mismatch");
    }
    const Vector cw = market.cov * w_j;
    const double var = w_j.dot(cw);
    if (!(var > 1e-12)) throw NumericError("spatial_rho: degenerate portfolio variance");
    return cw(j) / var;
}

double pricing_identity_residual(Eigen::Index j, const MarketInputs& market, const Vector& w_j) {
    const double rho = spatial_rho(j, market, w_j);
    const double mu_jm = w_j.dot(market.mu);
    return (market.mu(j) - market.rf) - rho * (mu_jm - market.rf);
}

double pricing_decomposition(Eigen::Index j, double rho_j, const Vector& w_j, const Vector& mu0,
                             double rf, const Vector& factor_premia, const Vector& delta_j) {
    if (w_j.size() != mu0.size() || factor_premia.size() != delta_j.size() || j < 0 ||
        j >= mu0.size()) {
        throw ValidationError("pricing_decomposition: shape mismatch");
    }
    const Eigen::Index N = mu0.size();
    const double spatial = rho_j * w_j.dot(mu0 - rf * Vector::Ones(N));
    const double factors =
        delta_j.dot(factor_premia - rf * Vector::Ones(factor_premia.size()));
    return (mu0(j) - rf) - spatial - factors;
}

SpatialWeights weights_from_distance(const Matrix& d, const std::vector<std::string>& ids) {
    check_square(d, "weights_from_distance");
    const Eigen::Index N = d.rows();
    Matrix w = Matrix::Zero(N, N);
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index j = 0; j < N; ++j) {
            if (i == j) continue;
            if (!(d(i, j) > 0.0)) {
                std::ostringstream os;
                os << "weights_from_distance: nonpositive distance " << d(i, j) << " between "
                   << unit_name(ids, i) << " and " << unit_name(ids, j);
                throw ValidationError(os.str());
            }
            w(i, j) = 1.0 / d(i, j);
        }
    }
    return SpatialWeights(std::move(w), true);
}

Matrix haversine_matrix(const GeoLocations& loc, double radius_km) {
    loc.validate();
    if (!(radius_km > 0.0)) throw ValidationError("haversine_matrix: radius must be positive");
    const Eigen::Index N = loc.lat.size();
    constexpr double deg = std::numbers::pi / 180.0;
    Matrix d = Matrix::Zero(N, N);
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index j = i + 1; j < N; ++j) {
            const double p1 = loc.lat(i) * deg, p2 = loc.lat(j) * deg;
            const double dp = p2 - p1;
            const double dl = (loc.lon(j) - loc.lon(i)) * deg;
            const double h = std::pow(std::sin(dp / 2), 2) +
                             std::cos(p1) * std::cos(p2) * std::pow(std::sin(dl / 2), 2);
            const double dist = 2.0 * radius_km * std::asin(std::min(1.0, std::sqrt(h)));
            if (dist == 0.0) {
                throw ValidationError("haversine_matrix: coincident locations " +
                                      loc.ids[static_cast<size_t>(i)] + " and " +
                                      loc.ids[static_cast<size_t>(j)]);
            }
            d(i, j) = d(j, i) = dist;
        }
    }
    return d;
}

SpatialWeights weights_from_correlation(const PanelData& panel) {
    const Matrix& y = panel.values();
    const Eigen::Index N = panel.N();
    const Matrix c = y.rowwise() - y.colwise().mean();
    const Vector sd = c.colwise().norm().transpose();
    for (Eigen::Index i = 0; i < N; ++i) {
        if (!(sd(i) > 0.0)) {
            throw ValidationError("weights_from_correlation: unit " + panel.unit_ids()[static_cast<size_t>(i)] +
                                  " has zero variance");
        }
    }
    const Matrix corr = (c.transpose() * c).cwiseQuotient(sd * sd.transpose());
    Matrix d = Matrix::Zero(N, N);
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index j = 0; j < N; ++j) {
            if (i == j) continue;
            if (!(corr(i, j) > 0.0)) {
                std::ostringstream os;
                os << "weights_from_correlation: nonpositive correlation " << corr(i, j)
                   << " between " << panel.unit_ids()[static_cast<size_t>(i)] << " and "
                   << panel.unit_ids()[static_cast<size_t>(j)];
                throw ValidationError(os.str());
            }
            d(i, j) = 1.0 / corr(i, j);
        }
    }
    return weights_from_distance(d, panel.unit_ids());
}

SpatialWeights weights_banded(Eigen::Index N, Eigen::Index q) {
    if (N < 2) throw ValidationError("weights_banded: need N >= 2");
    if (q < 1 || q > N - 1) throw ValidationError("weights_banded: q must lie in [1, N-1]");
    Matrix w = Matrix::Zero(N, N);
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index j = 0; j < N; ++j) {
            const Eigen::Index gap = i > j ? i - j : j - i;
            if (gap >= 1 && gap <= q) w(i, j) = 1.0;
        }
    }
    return SpatialWeights(std::move(w), true);
}

SpatialWeights weights_radius(const Matrix& d, double threshold, const std::vector<std::string>& ids) {
    check_square(d, "weights_radius");
    const Eigen::Index N = d.rows();
    Matrix w = Matrix::Zero(N, N);
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index j = 0; j < N; ++j) {
            if (i != j && d(i, j) <= threshold) w(i, j) = 1.0;
        }
        if (w.row(i).sum() == 0.0) {
            throw ValidationError("weights_radius: unit " + unit_name(ids, i) +
                                  " has no neighbor within the threshold");
        }
    }
    return SpatialWeights(std::move(w), true);
}

}  // namespace sapt
