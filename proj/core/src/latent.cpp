#include "sapt/latent.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace sapt {

namespace {

struct Spectrum {
    Vector values;   // descending
    Matrix vectors;  // columns match values
};

Spectrum descending_eigen(const Matrix& M) {
    if (M.rows() != M.cols() || M.rows() < 2) {
        throw ValidationError("extract_loadings: M must be square with N >= 2");
    }
    if (!M.allFinite()) throw NumericError("extract_loadings: M has non-finite entries");
    Eigen::SelfAdjointEigenSolver<Matrix> es(M);
    if (es.info() != Eigen::Success) {
        Eigen::JacobiSVD<Matrix> svd(M);
        const Vector& s = svd.singularValues();
        std::ostringstream os;
        os << "extract_loadings: eigensolver failed (N=" << M.rows() << ", largest singular value "
           << s(0) << ", smallest " << s(s.size() - 1) << ")";
        throw NumericError(os.str());
    }
    Spectrum sp;
    sp.values = es.eigenvalues().reverse();
    sp.vectors = es.eigenvectors().rowwise().reverse();
    return sp;
}

Matrix scaled_columns(const Matrix& vectors, int K) {
    const Eigen::Index N = vectors.rows();
    Matrix L = vectors.leftCols(K) * std::sqrt(static_cast<double>(N));
    for (int j = 0; j < K; ++j) {
        Eigen::Index arg = 0;
        L.col(j).cwiseAbs().maxCoeff(&arg);
        if (L(arg, j) < 0.0) L.col(j) = -L.col(j);
    }
    return L;
}

double mean_square(const Matrix& a) {
    return a.squaredNorm() / static_cast<double>(a.rows() * a.cols());
}

}  // namespace

Matrix build_M(const PanelData& panel, int k0) {
    if (k0 < 1 || k0 > panel.T() - 2) {
        throw ValidationError("build_M: k0 must lie in [1, T-2], got " + std::to_string(k0));
    }
    const Eigen::Index N = panel.N();
    Matrix M = Matrix::Zero(N, N);
    for (int k = 1; k <= k0; ++k) {
        const Matrix S = lagged_product(panel.values(), panel.values(), k);
        M.noalias() += S * S.transpose();
    }
    return 0.5 * (M + M.transpose());
}

LoadingExtraction extract_loadings(const Matrix& M, int K) {
    if (K < 1 || K > M.rows() - 1) {
        throw ValidationError("extract_loadings: K must lie in [1, N-1], got " + std::to_string(K));
    }
    const Spectrum sp = descending_eigen(M);
    return {scaled_columns(sp.vectors, K), sp.values};
}

Matrix recover_factors(const Matrix& loadings, const PanelData& panel) {
    if (loadings.rows() != panel.N()) {
        throw ValidationError("recover_factors: loadings have " + std::to_string(loadings.rows()) +
                              " rows, panel has N=" + std::to_string(panel.N()));
    }
    return panel.values() * loadings / static_cast<double>(panel.N());
}

Vector ic_values(const PanelData& panel, int J, IcPenalty penalty, int k0) {
    const Eigen::Index N = panel.N(), T = panel.T();
    if (J < 1 || J >= std::min(N, T)) {
        throw ValidationError("select_K_ic: J must lie in [1, min(N,T)-1], got " + std::to_string(J));
    }
    const double n = static_cast<double>(N), t = static_cast<double>(T);
    const double g = penalty == IcPenalty::IC1 ? (n + t) / (n * t) * std::log(n * t / (n + t))
                                               : (n + t) / (n * t) * std::log(std::min(n, t));
    const Spectrum sp = descending_eigen(build_M(panel, k0));
    const Matrix& y = panel.values();
    Vector ic(J + 1);
    ic(0) = std::log(mean_square(y));
    for (int j = 1; j <= J; ++j) {
        const Matrix L = scaled_columns(sp.vectors, j);
        const Matrix resid = y - y * L * L.transpose() / n;
        ic(j) = std::log(mean_square(resid)) + j * g;
    }
    return ic;
}

int select_K_ic(const PanelData& panel, int J, IcPenalty penalty, int k0) {
    const Vector ic = ic_values(panel, J, penalty, k0);
    int best = 0;
    for (int j = 1; j < ic.size(); ++j) {
        if (ic(j) < ic(best)) best = j;
    }
    return best;
}

int select_K_ratio(const Vector& mu, int R) {
    const auto N = static_cast<int>(mu.size());
    if (N < 2) throw ValidationError("select_K_ratio: need at least 2 eigenvalues");
    if (R <= 0) R = std::max(1, std::min(N / 2, N - 1));
    if (R > N - 1) throw ValidationError("select_K_ratio: R must be <= N-1");
    int best = 1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int l = 1; l <= R; ++l) {
        const double den = mu(l - 1);
        const double r = den == 0.0 ? std::numeric_limits<double>::infinity() : mu(l) / den;
        if (r < best_ratio) {
            best_ratio = r;
            best = l;
        }
    }
    return best;
}

LatentEstimate estimate_latent(const PanelData& panel, const SpatialWeights& weights, int k0,
                               const KSpec& K_spec, const LambdaSpec& lambda_spec,
                               const LagSpec& lag_spec) {
    if (panel.N() != weights.N()) throw ValidationError("panel and weights differ in N");
    const Matrix M = build_M(panel, k0);
    const Spectrum sp = descending_eigen(M);

    LatentEstimate out;
    out.rule = K_spec.rule;
    switch (K_spec.rule) {
        case KRule::Fixed: out.K_hat = K_spec.K; break;
        case KRule::Ratio: out.K_hat = select_K_ratio(sp.values, K_spec.R); break;
        case KRule::IC1: out.K_hat = select_K_ic(panel, K_spec.J, IcPenalty::IC1, k0); break;
        case KRule::IC2: out.K_hat = select_K_ic(panel, K_spec.J, IcPenalty::IC2, k0); break;
    }
    if (out.K_hat < 1 || out.K_hat > panel.N() - 1) {
        throw ValidationError("estimate_latent: selected K=" + std::to_string(out.K_hat) +
                              " is not usable (need 1 <= K <= N-1)");
    }

    out.fit.loadings = scaled_columns(sp.vectors, out.K_hat);
    out.fit.eigenvalues = sp.values;
    out.fit.k0_used = k0;
    out.fit.factors = recover_factors(out.fit.loadings, panel);

    // f_hat inherits zero column means from a demeaned panel.
    const FactorSet fhat(out.fit.factors, {}, panel.demeaned());
    out.estimate = estimate_observed(panel, fhat, weights, lambda_spec, lag_spec);
    return out;
}

}  // namespace sapt
