#include "sapt/model.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <sstream>

namespace sapt {

namespace {

void stderr_sink(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

std::atomic<WarningSink> g_sink{&stderr_sink};

std::vector<std::string> default_ids(std::vector<std::string> ids, Eigen::Index n,
                                     const char* prefix, const char* what) {
    if (ids.empty()) {
        ids.reserve(static_cast<size_t>(n));
        for (Eigen::Index j = 0; j < n; ++j) ids.push_back(prefix + std::to_string(j + 1));
    }
    if (static_cast<Eigen::Index>(ids.size()) != n) {
        throw ValidationError(std::string(what) + ": expected " + std::to_string(n) +
                              " identifiers, got " + std::to_string(ids.size()));
    }
    return ids;
}

void check_demeaned(const Matrix& values, const char* what) {
    const Eigen::Index T = values.rows();
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
        const double mean = values.col(j).mean();
        const double sd = std::sqrt((values.col(j).array() - mean).square().sum() / T);
        if (std::abs(mean) > 1e-10 * sd) {
            throw ValidationError(std::string(what) + ": column " + std::to_string(j + 1) +
                                  " flagged demeaned but has mean " + std::to_string(mean));
        }
    }
}

}  // namespace

void warn(const std::string& message) { g_sink.load()(message); }

WarningSink set_warning_sink(WarningSink sink) {
    return g_sink.exchange(sink ? sink : &stderr_sink);
}

void require_finite(const Matrix& values, const std::string& what) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
        for (Eigen::Index t = 0; t < values.rows(); ++t) {
            if (!std::isfinite(values(t, j))) {
                std::ostringstream os;
                os << what << ": non-finite entry at row " << t + 1 << ", column " << j + 1;
                throw ValidationError(os.str());
            }
        }
    }
}

Vector column_means(const Matrix& values) {
    require_finite(values, "column_means");
    return values.colwise().mean().transpose();
}

PanelData::PanelData(Matrix values, std::vector<std::string> unit_ids, bool demeaned)
    : values_(std::move(values)), demeaned_(demeaned) {
    if (values_.rows() < 2 || values_.cols() < 2) {
        throw ValidationError("PanelData: need T >= 2 and N >= 2, got T=" +
                              std::to_string(values_.rows()) + " N=" + std::to_string(values_.cols()));
    }
    require_finite(values_, "PanelData");
    ids_ = default_ids(std::move(unit_ids), values_.cols(), "u", "PanelData");
    if (demeaned_) check_demeaned(values_, "PanelData");
}

PanelData::PanelData(Centered, Matrix values, std::vector<std::string> unit_ids)
    : PanelData(std::move(values), std::move(unit_ids), false) {
    demeaned_ = true;
}

FactorSet::FactorSet(Matrix values, std::vector<std::string> factor_ids, bool demeaned)
    : values_(std::move(values)), demeaned_(demeaned) {
    if (values_.cols() < 1) throw ValidationError("FactorSet: need K >= 1");
    if (values_.cols() >= values_.rows()) {
        throw ValidationError("FactorSet: need K < T, got K=" + std::to_string(values_.cols()) +
                              " T=" + std::to_string(values_.rows()));
    }
    require_finite(values_, "FactorSet");
    ids_ = default_ids(std::move(factor_ids), values_.cols(), "f", "FactorSet");
    if (demeaned_) check_demeaned(values_, "FactorSet");
}

FactorSet::FactorSet(Centered, Matrix values, std::vector<std::string> factor_ids)
    : FactorSet(std::move(values), std::move(factor_ids), false) {
    demeaned_ = true;
}

SpatialWeights::SpatialWeights(Matrix values, bool row_normalize)
    : values_(std::move(values)), row_normalized_(row_normalize) {
    if (values_.rows() != values_.cols() || values_.rows() < 2) {
        throw ValidationError("SpatialWeights: need a square matrix with N >= 2");
    }
    require_finite(values_, "SpatialWeights");
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
        if (values_(i, i) != 0.0) {
            throw ValidationError("SpatialWeights: nonzero diagonal entry at unit " +
                                  std::to_string(i + 1));
        }
    }
    if (row_normalize) {
        for (Eigen::Index i = 0; i < values_.rows(); ++i) {
            const double s = values_.row(i).sum();
            if (s == 0.0) {
                throw ValidationError("SpatialWeights: unit " + std::to_string(i + 1) +
                                      " has no neighbors (zero row)");
            }
            values_.row(i) /= s;
        }
    }
}

Matrix spatial_operator(const Vector& rho, const SpatialWeights& weights) {
    if (rho.size() != weights.N()) {
        throw ValidationError("spatial_operator: rho has length " + std::to_string(rho.size()) +
                              " but W is " + std::to_string(weights.N()) + "x" +
                              std::to_string(weights.N()));
    }
    const Eigen::Index N = rho.size();
    return Matrix::Identity(N, N) - rho.asDiagonal() * weights.values();
}

SystemDiagnostics validate_system(const SaptParams& params, const SpatialWeights& weights) {
    if (params.loadings.rows() != params.rho.size()) {
        throw ValidationError("validate_system: loadings have " +
                              std::to_string(params.loadings.rows()) + " rows, rho has length " +
                              std::to_string(params.rho.size()));
    }
    const Matrix S = spatial_operator(params.rho, weights);
    SystemDiagnostics d;
    Eigen::JacobiSVD<Matrix> svd(S);
    d.min_singular_value = svd.singularValues().minCoeff();
    const Matrix DW = params.rho.asDiagonal() * weights.values();
    Eigen::EigenSolver<Matrix> es(DW, false);
    d.spectral_radius = es.eigenvalues().cwiseAbs().maxCoeff();
    d.pass = d.min_singular_value > kInvertibilityTol;
    return d;
}

Matrix structural_residuals(const Matrix& y, const Matrix& f, const SaptParams& params,
                            const SpatialWeights& weights) {
    if (y.cols() != params.N() || f.cols() != params.K() || y.rows() != f.rows()) {
        throw ValidationError("structural_residuals: shape mismatch");
    }
    // eps_t' = y_t' - y_t' W' D(rho) - f_t' B'
    return y - y * weights.values().transpose() * params.rho.asDiagonal() -
           f * params.loadings.transpose();
}

PanelData demean(const PanelData& panel) {
    Matrix v = panel.values();
    v.rowwise() -= column_means(v).transpose();
    return PanelData(PanelData::Centered{}, std::move(v), panel.unit_ids());
}

FactorSet demean(const FactorSet& factors) {
    Matrix v = factors.values();
    v.rowwise() -= column_means(v).transpose();
    return FactorSet(FactorSet::Centered{}, std::move(v), factors.factor_ids());
}

}  // namespace sapt
