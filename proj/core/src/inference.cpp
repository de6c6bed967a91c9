#include "sapt/inference.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>

namespace sapt {

int default_bandwidth(Eigen::Index T) {
    return static_cast<int>(std::floor(4.0 * std::pow(static_cast<double>(T) / 100.0, 2.0 / 9.0)));
}

LongRunFEps longrun_fe(const Matrix& factors, const Vector& residual, int bandwidth, Kernel kernel,
                       int lag) {
    const Eigen::Index T = factors.rows();
    const Eigen::Index K = factors.cols();
    if (residual.size() != T) throw ValidationError("longrun_fe: residual length differs from T");
    if (lag < 1 || lag >= T - 1) throw ValidationError("longrun_fe: lag out of range");
    if (bandwidth < 0) bandwidth = default_bandwidth(T);
    if (bandwidth >= T) throw ValidationError("longrun_fe: bandwidth must be < T");

    const Eigen::Index n = T - lag;
    Matrix z(n, 2 * K);
    for (Eigen::Index s = 0; s < n; ++s) {
        const Eigen::Index t = s + lag;
        z.block(s, 0, 1, K) = factors.row(t) * residual(t);
        z.block(s, K, 1, K) = factors.row(t - lag) * residual(t);
    }
    require_finite(z, "longrun_fe");

    Matrix U = z.transpose() * z / static_cast<double>(n);
    for (int j = 1; j <= bandwidth && j < n; ++j) {
        const double kappa =
            kernel == Kernel::Bartlett ? 1.0 - static_cast<double>(j) / (bandwidth + 1.0) : 1.0;
        const Matrix G = z.bottomRows(n - j).transpose() * z.topRows(n - j) / static_cast<double>(n);
        U += kappa * (G + G.transpose());
    }
    U = (0.5 * (U + U.transpose())).eval();

    LongRunFEps out;
    out.sigma_fe_0 = U.topLeftCorner(K, K);
    out.sigma_fe_1 = U.topRightCorner(K, K);
    out.omega_fe_0 = U.bottomRightCorner(K, K);
    out.bandwidth = bandwidth;
    out.kernel = kernel;
    out.lag = lag;
    return out;
}

namespace {

UnitInference assemble(Eigen::Index i, const LagCovariances& covs, const SpatialWeights& weights,
                       const LongRunFEps& lr, const Matrix* Hp) {
    const int k = lr.lag;
    const Matrix& syf = covs.yf(0);
    const Matrix& syf1 = covs.yf(k);
    const Matrix& sf = covs.f(0);
    const Matrix& sf1 = covs.f(k);
    const Eigen::Index K = sf.rows();
    if (i < 0 || i >= syf.rows()) throw ValidationError("unit_asymptotics: unit index out of range");
    if (lr.sigma_fe_0.rows() != K) throw ValidationError("unit_asymptotics: long-run blocks have wrong size");
    const Matrix H = Hp ? *Hp : Matrix::Identity(K, K);
    if (H.rows() != K || H.cols() != K) throw ValidationError("latent_unit_asymptotics: H must be K x K");

    const Eigen::RowVectorXd w = weights.row(i);
    const Eigen::RowVectorXd a0 = w * syf;   // w' Sigma_yf
    const Eigen::RowVectorXd a1 = w * syf1;  // w' Sigma_yf(1)
    const Matrix& S0 = lr.sigma_fe_0;
    const Matrix& S1 = lr.sigma_fe_1;
    const Matrix& Om = lr.omega_fe_0;
    const Matrix Ht = H.transpose();

    UnitInference out;
    out.V.resize(K + 1, K + 1);
    out.V(0, 0) = a0.dot(a0) + a1.dot(a1);
    const Eigen::RowVectorXd v12 = a0 * sf * Ht + a1 * sf1.transpose() * Ht;
    out.V.block(0, 1, 1, K) = v12;
    out.V.block(1, 0, K, 1) = H * sf * a0.transpose() + H * sf1 * a1.transpose();
    out.V.block(1, 1, K, K) = H * sf * sf * Ht + H * sf1 * sf1.transpose() * Ht;

    const double s11 = (a0 * S0 * a0.transpose())(0, 0) + (a0 * S1 * a1.transpose())(0, 0) +
                       (a1 * S1.transpose() * a0.transpose())(0, 0) +
                       (a1 * Om * a1.transpose())(0, 0);
    const Eigen::RowVectorXd s12 = a0 * S0 * sf * Ht + a0 * S1 * sf1.transpose() * Ht +
                                   a1 * S1.transpose() * sf * Ht + a1 * Om * sf1.transpose() * Ht;
    const Matrix s22 = H * sf * S0 * sf * Ht + H * sf * S1 * sf1.transpose() * Ht +
                       H * sf1 * S1.transpose() * sf * Ht + H * sf1 * Om * sf1.transpose() * Ht;
    out.XUX.resize(K + 1, K + 1);
    out.XUX(0, 0) = s11;
    out.XUX.block(0, 1, 1, K) = s12;
    out.XUX.block(1, 0, K, 1) = s12.transpose();
    out.XUX.block(1, 1, K, K) = s22;
    return out;
}

}  // namespace

UnitInference unit_asymptotics(Eigen::Index i, const LagCovariances& covs,
                               const SpatialWeights& weights, const LongRunFEps& longrun) {
    return assemble(i, covs, weights, longrun, nullptr);
}

UnitInference latent_unit_asymptotics(Eigen::Index i, const LagCovariances& covs,
                                       const SpatialWeights& weights, const LongRunFEps& longrun,
                                       const Matrix& H) {
    return assemble(i, covs, weights, longrun, &H);
}

void standardize(UnitInference& inf, const Vector& beta_hat, const Vector& beta, Eigen::Index T) {
    if (beta_hat.size() != inf.V.rows() || beta.size() != inf.V.rows()) {
        throw ValidationError("standardize: coefficient length mismatch");
    }
    inf.standardized_stat = std::sqrt(static_cast<double>(T)) * inf.V * (beta_hat - beta);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal_quantile: p must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal(), p);
}

bool covers(const UnitInference& inf, Eigen::Index j, double alpha) {
    if (inf.standardized_stat.size() == 0) throw ValidationError("covers: no standardized statistic");
    const double z = normal_quantile(1.0 - alpha / 2.0);
    const double var = inf.XUX(j, j);
    return std::abs(inf.standardized_stat(j)) <= z * std::sqrt(std::max(var, 0.0));
}

void wald_intervals(UnitInference& inf, const Vector& beta_hat, Eigen::Index T, double alpha) {
    const Matrix Vp = inf.V.completeOrthogonalDecomposition().pseudoInverse();
    const Matrix cov = Vp * inf.XUX * Vp.transpose() / static_cast<double>(T);
    const double z = normal_quantile(1.0 - alpha / 2.0);
    const Vector half = z * cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    inf.lower = beta_hat - half;
    inf.upper = beta_hat + half;
}

Matrix factor_gamma(const Matrix& loadings, const SaptParams& params,
                    const SpatialWeights& weights, const Matrix& noise_cov) {
    const Eigen::Index N = loadings.rows();
    if (params.N() != N || noise_cov.rows() != N || noise_cov.cols() != N) {
        throw ValidationError("factor_asy_cov: shape mismatch");
    }
    const Matrix S = spatial_operator(params.rho, weights);
    Eigen::FullPivLU<Matrix> lu(S);
    if (!lu.isInvertible()) throw NumericError("factor_asy_cov: S_N(rho) is singular");
    // P = Lambda' S^{-1}  <=>  S' P' = Lambda
    const Matrix Pt = lu.transpose().solve(loadings);
    const Matrix G = Pt.transpose() * noise_cov * Pt / static_cast<double>(N);
    return 0.5 * (G + G.transpose());
}

Matrix factor_asy_cov(const Matrix& loadings, const SaptParams& params,
                      const SpatialWeights& weights, const Matrix& noise_cov, const Matrix& K) {
    const Matrix G = factor_gamma(loadings, params, weights, noise_cov);
    if (K.rows() != G.rows() || K.cols() != G.cols()) {
        throw ValidationError("factor_asy_cov: rotation has wrong shape");
    }
    return K * G * K.transpose();
}

Matrix rotation_KNT(const Matrix& estimated_loadings, const Matrix& true_loadings) {
    if (estimated_loadings.rows() != true_loadings.rows() ||
        estimated_loadings.cols() != true_loadings.cols()) {
        throw ValidationError("rotation_KNT: shape mismatch");
    }
    return estimated_loadings.transpose() * true_loadings /
           static_cast<double>(true_loadings.rows());
}

Matrix rotation_Kstar(const Matrix& K) {
    const Eigen::Index k = K.rows();
    Matrix out = Matrix::Zero(k + 1, k + 1);
    out(0, 0) = 1.0;
    out.bottomRightCorner(k, k) = K.transpose().inverse();
    return out;
}

}  // namespace sapt
