/** @file model.hpp
 *  @brief Shared domain types for y_t = D(rho) W y_t + B f_t + eps_t.
 *
 *  Data are stored time-by-unit: row t of a PanelData holds y_t'. Column
 *  vectors in the model (y_t, f_t, w_i) correspond to rows of these matrices.
 */
#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace sapt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Invalid input or configuration (maps to CLI exit code 2).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure such as a singular system (maps to CLI exit code 3).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Emits a non-fatal diagnostic. The default sink writes to stderr.
void warn(const std::string& message);

using WarningSink = void (*)(const std::string&);
/// Replaces the process-wide warning sink; returns the previous one.
WarningSink set_warning_sink(WarningSink sink);

/// T x N observation matrix (rows = time, columns = units).
class PanelData {
public:
    PanelData(Matrix values, std::vector<std::string> unit_ids = {}, bool demeaned = false);
    /// Skips the zero-mean check; used by demean() whose output is centered by construction.
    struct Centered {};
    PanelData(Centered, Matrix values, std::vector<std::string> unit_ids = {});

    const Matrix& values() const { return values_; }
    const std::vector<std::string>& unit_ids() const { return ids_; }
    bool demeaned() const { return demeaned_; }
    Eigen::Index T() const { return values_.rows(); }
    Eigen::Index N() const { return values_.cols(); }

private:
    Matrix values_;
    std::vector<std::string> ids_;
    bool demeaned_;
};

/// T x K factor matrix.
class FactorSet {
public:
    FactorSet(Matrix values, std::vector<std::string> factor_ids = {}, bool demeaned = false);
    struct Centered {};
    FactorSet(Centered, Matrix values, std::vector<std::string> factor_ids = {});

    const Matrix& values() const { return values_; }
    const std::vector<std::string>& factor_ids() const { return ids_; }
    bool demeaned() const { return demeaned_; }
    Eigen::Index T() const { return values_.rows(); }
    Eigen::Index K() const { return values_.cols(); }

private:
    Matrix values_;
    std::vector<std::string> ids_;
    bool demeaned_;
};

/// N x N zero-diagonal spatial weight matrix.
class SpatialWeights {
public:
    /// With row_normalize = true each row is scaled to sum to one; a row with
    /// zero sum is rejected.
    explicit SpatialWeights(Matrix values, bool row_normalize = true);

    const Matrix& values() const { return values_; }
    bool row_normalized() const { return row_normalized_; }
    Eigen::Index N() const { return values_.rows(); }
    Eigen::RowVectorXd row(Eigen::Index i) const { return values_.row(i); }

private:
    Matrix values_;
    bool row_normalized_;
};

/// Spatial coefficients rho (length N) and loadings B (N x K, rows b_i').
struct SaptParams {
    Vector rho;
    Matrix loadings;

    Eigen::Index N() const { return rho.size(); }
    Eigen::Index K() const { return loadings.cols(); }
};

/// S_N(rho) = I - D(rho) W
Matrix spatial_operator(const Vector& rho, const SpatialWeights& weights);

struct SystemDiagnostics {
    double min_singular_value = 0.0;
    double spectral_radius = 0.0;  // of D(rho) W
    bool pass = false;             // min_singular_value > 1e-10
};

SystemDiagnostics validate_system(const SaptParams& params, const SpatialWeights& weights);

constexpr double kInvertibilityTol = 1e-10;

/// Instrument lag pair (0, k). k = 0 denotes the contemporaneous-only
/// system with a single K-row block.
struct LagPair {
    int first = 0;
    int second = 1;
    bool stacked() const { return second > 0; }
    friend bool operator==(const LagPair&, const LagPair&) = default;
};

struct RidgeSystem {
    Eigen::Index unit_index = 0;  // zero-based
    Vector response;              // 2K (K when unstacked)
    Matrix design;                // 2K x (K+1)
    LagPair lag_pair;
};

struct SaptEstimate {
    SaptParams params;
    Vector lambda_used;
    LagPair lag_pair;
    Matrix residuals;  // T x N
    std::vector<RidgeSystem> systems;
};

/// Residuals eps_t = y_t - D(rho) W y_t - B f_t for every t (T x N).
Matrix structural_residuals(const Matrix& y, const Matrix& f, const SaptParams& params,
                            const SpatialWeights& weights);

PanelData demean(const PanelData& panel);
FactorSet demean(const FactorSet& factors);

/// Column means of `values`; throws ValidationError naming the first
/// non-finite entry.
Vector column_means(const Matrix& values);

/// Throws ValidationError naming the first non-finite (row, column).
void require_finite(const Matrix& values, const std::string& what);

}  // namespace sapt
