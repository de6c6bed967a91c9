/** @file simulate.hpp
 *  @brief Simulation design, Monte Carlo harness and error metrics.
 *
 *  Replication r uses an mt19937_64 engine seeded with rep_seed(seed, r),
 *  a splitmix64 hash of seed + (r + 1) * 0x9E3779B97F4A7C15. Draws within a
 *  replication follow a fixed order: Phi, factor path (burn-in + T), B,
 *  rho, eps. Results therefore do not depend on how replications are
 *  scheduled across threads.
 */
#pragma once

#include "sapt/inference.hpp"
#include "sapt/latent.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace sapt {

using Rng = std::mt19937_64;

enum class RhoLaw {
    UnitPower,  // density alpha x^{alpha-1} on (0, scale]
    Pareto,     // density proportional to x^{-alpha} on [scale, inf)
};

enum class Task { Observed, Latent, Coverage, Forecast };

std::string to_string(Task task);
Task task_from_string(const std::string& name);
std::string to_string(RhoLaw law);
RhoLaw rho_law_from_string(const std::string& name);

struct SimConfig {
    int N = 25;
    int T = 400;
    int K = 3;
    int q = 3;
    double phi_lo = 0.5, phi_hi = 0.9;
    double loading_lo = -2.0, loading_hi = 2.0;
    RhoLaw rho_law = RhoLaw::UnitPower;
    double rho_alpha = 5.0;
    double rho_scale = 1.0;
    double rho_cap = 0.95;
    double noise_sd = 1.0;
    int reps = 100;
    std::uint64_t seed = 1234;
    int burn_in = 200;
    std::optional<double> phi_fixed;  // overrides the U(phi_lo, phi_hi) draw

    // estimation settings used by the tasks
    double lambda = 1e-3;
    int k = 1;
    int k0 = 2;
    int J = 8;
    double fraction = 0.8;
    int unit = 0;          // coverage task: zero-based unit
    int bandwidth = -1;    // -1: default_bandwidth(T)
    Kernel kernel = Kernel::Bartlett;

    void validate() const;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t rep_seed(std::uint64_t seed, std::uint64_t rep);

Vector draw_phi(const SimConfig& config, Rng& rng);
/// f_t = diag(phi) f_{t-1} + eta_t from f_0 = 0, first burn_in steps dropped.
Matrix simulate_var1(const Vector& phi, int T, int burn_in, Rng& rng);
FactorSet gen_factors(const SimConfig& config, Rng& rng);

double draw_rho(const SimConfig& config, Rng& rng);  // before the cap
SaptParams gen_params(const SimConfig& config, Rng& rng);

/// Solves (I - D(rho) W) y_t = B f_t + eps_t for every t.
PanelData gen_panel(const SaptParams& params, const SpatialWeights& weights, const Matrix& factors,
                    const Matrix& eps);
PanelData gen_panel(const SaptParams& params, const SpatialWeights& weights,
                    const FactorSet& factors, Rng& rng, double noise_sd = 1.0);

struct Replication {
    std::uint64_t seed = 0;
    Vector phi;
    Matrix factors;  // T x K, as generated
    SaptParams params;
    Matrix eps;      // T x N
    Matrix y;        // T x N, as generated
};

Replication simulate_replication(const SimConfig& config, const SpatialWeights& weights,
                                 std::uint64_t seed);

enum class RmseMode { Ridge, PinvLimit };

struct ErrorPair {
    double beta = 0.0;
    double rho = 0.0;
};

/// Ridge: || beta_hat - (X'X + lambda I)^{-1} X'X beta ||;
/// PinvLimit: || X'X (beta_hat - beta) ||; root mean square over units.
ErrorPair metric_rmse(const SaptEstimate& estimate, const SaptParams& truth, RmseMode mode);

/// ((1/N) sum_i ||beta_hat_i - beta_i||^2)^{1/2} and the rho-only analogue.
ErrorPair metric_ce(const SaptParams& estimate, const SaptParams& truth);

struct RepRecord {
    int rep = 0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    std::vector<double> values;
};

struct MonteCarloReport {
    SimConfig config;
    Task task = Task::Observed;
    std::vector<std::string> metric_names;
    std::vector<RepRecord> records;

    /// Values of a metric over successful replications, in rep order.
    std::vector<double> column(const std::string& name) const;
    double mean(const std::string& name) const;
    double sd(const std::string& name) const;  // divisor n - 1
    int failed_count() const;
};

std::vector<std::string> metric_names(Task task);

/// Runs one replication of `task` on pre-generated data.
std::vector<double> run_task(const Replication& rep, const SpatialWeights& weights,
                             const SimConfig& config, Task task);

/// threads <= 1 runs serially. Per-rep failures are recorded, not thrown.
MonteCarloReport run_monte_carlo(const SimConfig& config, Task task, int threads = 1);

/// "mean(sd)" with 3 decimals.
std::string mean_sd(double mean, double sd);

/// One row per replication; numbers with 17 significant digits.
void write_report_csv(const MonteCarloReport& report, std::ostream& os);
/// One row for the configuration with a mean(sd) cell per metric.
void write_summary_csv(const MonteCarloReport& report, std::ostream& os);

}  // namespace sapt
