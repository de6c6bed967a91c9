#include "sapt/moments.hpp"

#include <algorithm>

namespace sapt {

namespace {

const Matrix& lookup(const std::map<int, Matrix>& m, int k, const char* name) {
    auto it = m.find(k);
    if (it == m.end()) {
        throw ValidationError(std::string("LagCovariances: ") + name + " missing lag " +
                              std::to_string(k));
    }
    return it->second;
}

void check_lag(int k, Eigen::Index T, int min_lag, const char* what) {
    if (k < min_lag || k > T - 1) {
        throw ValidationError(std::string(what) + ": lag " + std::to_string(k) +
                              " outside [" + std::to_string(min_lag) + ", " +
                              std::to_string(T - 1) + "]");
    }
}

}  // namespace

const Matrix& LagCovariances::yf(int k) const { return lookup(sigma_yf, k, "sigma_yf"); }
const Matrix& LagCovariances::f(int k) const { return lookup(sigma_f, k, "sigma_f"); }
const Matrix& LagCovariances::y(int k) const { return lookup(sigma_y, k, "sigma_y"); }

Matrix lagged_product(const Matrix& a, const Matrix& b, int k) {
    const Eigen::Index T = a.rows();
    const Eigen::Index n = T - k;
    return a.bottomRows(n).transpose() * b.topRows(n) / static_cast<double>(T);
}

Matrix cross_cov(const PanelData& panel, const FactorSet& factors, int k) {
    if (panel.T() != factors.T()) {
        throw ValidationError("cross_cov: panel has T=" + std::to_string(panel.T()) +
                              ", factors have T=" + std::to_string(factors.T()));
    }
    check_lag(k, panel.T(), 0, "cross_cov");
    if (!panel.demeaned() || !factors.demeaned()) warn("cross_cov: input not flagged demeaned");
    return lagged_product(panel.values(), factors.values(), k);
}

Matrix auto_cov_f(const FactorSet& factors, int k) {
    check_lag(k, factors.T(), 0, "auto_cov_f");
    if (!factors.demeaned()) warn("auto_cov_f: input not flagged demeaned");
    return lagged_product(factors.values(), factors.values(), k);
}

Matrix auto_cov_y(const PanelData& panel, int k) {
    check_lag(k, panel.T(), 1, "auto_cov_y");
    if (!panel.demeaned()) warn("auto_cov_y: input not flagged demeaned");
    return lagged_product(panel.values(), panel.values(), k);
}

LagCovariances compute_covariances(const PanelData& panel, const FactorSet& factors,
                                   const std::vector<int>& lags) {
    LagCovariances c;
    c.T_used = panel.T();
    std::vector<int> all = lags;
    all.push_back(0);
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    for (int k : all) {
        c.sigma_yf[k] = cross_cov(panel, factors, k);
        c.sigma_f[k] = auto_cov_f(factors, k);
    }
    Matrix& s0 = c.sigma_f[0];
    s0 = (0.5 * (s0 + s0.transpose())).eval();
    return c;
}

}  // namespace sapt
