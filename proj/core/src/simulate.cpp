#include "sapt/simulate.hpp"

#include "sapt/forecast.hpp"
#include "sapt/scapm.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <thread>

namespace sapt {

std::string to_string(Task task) {
    switch (task) {
        case Task::Observed: return "observed";
        case Task::Latent: return "latent";
        case Task::Coverage: return "coverage";
        case Task::Forecast: return "forecast";
    }
    return "unknown";
}

Task task_from_string(const std::string& name) {
    if (name == "observed") return Task::Observed;
    if (name == "latent") return Task::Latent;
    if (name == "coverage") return Task::Coverage;
    if (name == "forecast") return Task::Forecast;
    throw ValidationError("unknown task '" + name + "'");
}

std::string to_string(RhoLaw law) { return law == RhoLaw::UnitPower ? "unit-power" : "pareto"; }

RhoLaw rho_law_from_string(const std::string& name) {
    if (name == "unit-power") return RhoLaw::UnitPower;
    if (name == "pareto") return RhoLaw::Pareto;
    throw ValidationError("unknown rho law '" + name + "'");
}

void SimConfig::validate() const {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw ValidationError(msg);
    };
    need(N >= 2, "N must be >= 2");
    need(K >= 1, "K must be >= 1");
    need(T >= K + 4, "T must be >= K + 4");
    need(q >= 1 && q <= N - 1, "q must lie in [1, N-1]");
    need(phi_lo <= phi_hi && phi_lo > -1.0 && phi_hi < 1.0, "phi range must lie in (-1, 1)");
    need(!phi_fixed || std::abs(*phi_fixed) < 1.0, "fixed phi must satisfy |phi| < 1");
    need(loading_lo <= loading_hi, "loading range is empty");
    need(rho_alpha > 1.0, "rho_alpha must exceed 1");
    need(rho_scale > 0.0, "rho_scale must be positive");
    need(rho_cap > 0.0 && rho_cap < 1.0, "rho_cap must lie in (0, 1)");
    need(noise_sd >= 0.0, "noise_sd must be nonnegative");
    need(reps >= 1, "reps must be >= 1");
    need(burn_in >= 0, "burn_in must be >= 0");
    need(lambda >= 0.0, "lambda must be nonnegative");
    need(k >= 0 && k <= T - 2, "k must lie in [0, T-2]");
    need(k0 >= 1 && k0 <= T - 2, "k0 must lie in [1, T-2]");
    need(J >= 1, "J must be >= 1");
    need(fraction > 0.0 && fraction < 1.0, "fraction must lie in (0, 1)");
    need(unit >= 0 && unit < N, "unit index out of range");
    need(bandwidth >= -1 && bandwidth < T, "bandwidth must lie in [-1, T-1]");
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t rep_seed(std::uint64_t seed, std::uint64_t rep) {
    return splitmix64(seed + (rep + 1) * 0x9E3779B97F4A7C15ULL);
}

Vector draw_phi(const SimConfig& config, Rng& rng) {
    Vector phi(config.K);
    std::uniform_real_distribution<double> u(config.phi_lo, config.phi_hi);
    for (int j = 0; j < config.K; ++j) phi(j) = u(rng);
    if (config.phi_fixed) phi.setConstant(*config.phi_fixed);
    return phi;
}

Matrix simulate_var1(const Vector& phi, int T, int burn_in, Rng& rng) {
    const Eigen::Index K = phi.size();
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix f(T, K);
    Vector cur = Vector::Zero(K);
    for (int t = 0; t < burn_in + T; ++t) {
        for (Eigen::Index j = 0; j < K; ++j) cur(j) = phi(j) * cur(j) + z(rng);
        if (t >= burn_in) f.row(t - burn_in) = cur.transpose();
    }
    return f;
}

FactorSet gen_factors(const SimConfig& config, Rng& rng) {
    const Vector phi = draw_phi(config, rng);
    return FactorSet(simulate_var1(phi, config.T, config.burn_in, rng));
}

double draw_rho(const SimConfig& config, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double v = u(rng);
    if (config.rho_law == RhoLaw::UnitPower) {
        return config.rho_scale * std::pow(v, 1.0 / config.rho_alpha);
    }
    // P(X > x) = (x / xmin)^{-(alpha - 1)}
    return config.rho_scale * std::pow(1.0 - v, -1.0 / (config.rho_alpha - 1.0));
}

SaptParams gen_params(const SimConfig& config, Rng& rng) {
    SaptParams p;
    p.loadings.resize(config.N, config.K);
    std::uniform_real_distribution<double> u(config.loading_lo, config.loading_hi);
    for (int i = 0; i < config.N; ++i) {
        for (int j = 0; j < config.K; ++j) p.loadings(i, j) = u(rng);
    }
    p.rho.resize(config.N);
    for (int i = 0; i < config.N; ++i) p.rho(i) = std::min(draw_rho(config, rng), config.rho_cap);
    return p;
}

PanelData gen_panel(const SaptParams& params, const SpatialWeights& weights, const Matrix& factors,
                    const Matrix& eps) {
    if (factors.cols() != params.K() || eps.cols() != params.N() || eps.rows() != factors.rows()) {
        throw ValidationError("gen_panel: shape mismatch");
    }
    const SystemDiagnostics d = validate_system(params, weights);
    if (!d.pass) throw NumericError("gen_panel: S_N(rho) is singular");
    const Matrix S = spatial_operator(params.rho, weights);
    const Matrix rhs = params.loadings * factors.transpose() + eps.transpose();  // N x T
    return PanelData(Eigen::PartialPivLU<Matrix>(S).solve(rhs).transpose());
}

PanelData gen_panel(const SaptParams& params, const SpatialWeights& weights,
                    const FactorSet& factors, Rng& rng, double noise_sd) {
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix eps(factors.T(), params.N());
    for (Eigen::Index t = 0; t < eps.rows(); ++t) {
        for (Eigen::Index i = 0; i < eps.cols(); ++i) eps(t, i) = noise_sd * z(rng);
    }
    return gen_panel(params, weights, factors.values(), eps);
}

Replication simulate_replication(const SimConfig& config, const SpatialWeights& weights,
                                 std::uint64_t seed) {
    Rng rng(seed);
    Replication r;
    r.seed = seed;
    r.phi = draw_phi(config, rng);
    r.factors = simulate_var1(r.phi, config.T, config.burn_in, rng);
    r.params = gen_params(config, rng);
    std::normal_distribution<double> z(0.0, 1.0);
    r.eps.resize(config.T, config.N);
    for (int t = 0; t < config.T; ++t) {
        for (int i = 0; i < config.N; ++i) r.eps(t, i) = config.noise_sd * z(rng);
    }
    r.y = gen_panel(r.params, weights, r.factors, r.eps).values();
    return r;
}

ErrorPair metric_rmse(const SaptEstimate& est, const SaptParams& truth, RmseMode mode) {
    const Eigen::Index N = truth.N();
    if (est.params.N() != N || static_cast<Eigen::Index>(est.systems.size()) != N ||
        est.params.K() != truth.K()) {
        throw ValidationError("metric_rmse: shape mismatch");
    }
    double sb = 0.0, sr = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) {
        const Matrix& X = est.systems[static_cast<size_t>(i)].design;
        const Matrix XtX = X.transpose() * X;
        Vector beta(truth.K() + 1), bhat(truth.K() + 1);
        beta << truth.rho(i), truth.loadings.row(i).transpose();
        bhat << est.params.rho(i), est.params.loadings.row(i).transpose();
        Vector e;
        if (mode == RmseMode::PinvLimit) {
            e = XtX * (bhat - beta);
        } else {
            const Matrix A = XtX + est.lambda_used(i) * Matrix::Identity(XtX.rows(), XtX.cols());
            e = bhat - A.ldlt().solve(XtX * beta);
        }
        sb += e.squaredNorm();
        sr += e(0) * e(0);
    }
    return {std::sqrt(sb / static_cast<double>(N)), std::sqrt(sr / static_cast<double>(N))};
}

ErrorPair metric_ce(const SaptParams& est, const SaptParams& truth) {
    if (est.N() != truth.N() || est.K() != truth.K()) throw ValidationError("metric_ce: shape mismatch");
    const auto N = static_cast<double>(truth.N());
    const double sr = (est.rho - truth.rho).squaredNorm();
    const double sb = sr + (est.loadings - truth.loadings).squaredNorm();
    return {std::sqrt(sb / N), std::sqrt(sr / N)};
}

std::vector<std::string> metric_names(Task task) {
    switch (task) {
        case Task::Observed:
            return {"rmse_beta", "rmse_rho", "rmse_beta_lim", "rmse_rho_lim", "ce_beta", "ce_rho"};
        case Task::Coverage:
            return {"stat", "var", "cover_10", "cover_05", "cover_01"};
        case Task::Latent:
            return {"k_ratio",   "k_ic1",       "k_ic2",  "loading_err", "factor_err", "knt_dev",
                    "ce_beta",   "ce_beta_raw", "ce_rho", "fcover_10",   "fcover_05",  "fcover_01"};
        case Task::Forecast:
            return {"fe", "fe_k0", "fe_factor", "fe_reduced", "fe_k0_reduced"};
    }
    return {};
}

namespace {

std::vector<double> observed_task(const Replication& rep, const SpatialWeights& w,
                                  const SimConfig& c) {
    const PanelData y = demean(PanelData(rep.y));
    const FactorSet f = demean(FactorSet(rep.factors));
    const SaptEstimate est = estimate_observed(y, f, w, c.lambda, LagSpec::fixed(c.k));
    const ErrorPair r = metric_rmse(est, rep.params, RmseMode::Ridge);
    const ErrorPair rl = metric_rmse(est, rep.params, RmseMode::PinvLimit);
    const ErrorPair ce = metric_ce(est.params, rep.params);
    return {r.beta, r.rho, rl.beta, rl.rho, ce.beta, ce.rho};
}

std::vector<double> coverage_task(const Replication& rep, const SpatialWeights& w,
                                  const SimConfig& c) {
    const PanelData y = demean(PanelData(rep.y));
    const FactorSet f = demean(FactorSet(rep.factors));
    const int lag = c.k > 0 ? c.k : 1;
    const SaptEstimate est = estimate_observed(y, f, w, c.lambda, LagSpec::fixed(lag));
    const LagCovariances covs = compute_covariances(y, f, {lag});
    const Eigen::Index i = c.unit;
    const LongRunFEps lr = longrun_fe(f.values(), est.residuals.col(i), c.bandwidth, c.kernel, lag);
    UnitInference inf = unit_asymptotics(i, covs, w, lr);
    Vector bhat(c.K + 1), beta(c.K + 1);
    bhat << est.params.rho(i), est.params.loadings.row(i).transpose();
    beta << rep.params.rho(i), rep.params.loadings.row(i).transpose();
    standardize(inf, bhat, beta, c.T);
    return {inf.standardized_stat(0), inf.XUX(0, 0), covers(inf, 0, 0.10) ? 1.0 : 0.0,
            covers(inf, 0, 0.05) ? 1.0 : 0.0, covers(inf, 0, 0.01) ? 1.0 : 0.0};
}

std::vector<double> latent_task(const Replication& rep, const SpatialWeights& w,
                                const SimConfig& c) {
    const PanelData y = demean(PanelData(rep.y));
    const Matrix f = demean(FactorSet(rep.factors)).values();
    const auto N = static_cast<double>(c.N);

    // Normalize the truth so that Lambda'Lambda/N = I: Lambda0 = S^{-1}B,
    // Lambda0'Lambda0/N = R'R, Lambda = Lambda0 R^{-1}, f -> R f, B -> B R^{-1}.
    const Matrix S = spatial_operator(rep.params.rho, w);
    const Matrix L0 = Eigen::PartialPivLU<Matrix>(S).solve(rep.params.loadings);
    const Matrix G = L0.transpose() * L0 / N;
    Eigen::LLT<Matrix> llt(G);
    if (llt.info() != Eigen::Success) throw NumericError("latent task: loading Gram matrix is singular");
    const Matrix R = llt.matrixU();
    const Matrix Rinv = R.inverse();
    const Matrix Lambda = L0 * Rinv;
    const Matrix f_norm = f * R.transpose();
    SaptParams truth_norm{rep.params.rho, rep.params.loadings * Rinv};

    const Matrix M = build_M(y, c.k0);
    const LoadingExtraction ex = extract_loadings(M, c.K);
    const double k_ratio = select_K_ratio(ex.eigenvalues);
    // the scan bound cannot exceed the panel's dimensions
    const int J = std::min(c.J, std::min(c.N, c.T) - 1);
    const double k_ic1 = select_K_ic(y, J, IcPenalty::IC1, c.k0);
    const double k_ic2 = select_K_ic(y, J, IcPenalty::IC2, c.k0);

    const Matrix& Lhat = ex.loadings;
    const Matrix Knt = rotation_KNT(Lhat, Lambda);
    const double loading_err = (Lhat - Lambda * Knt.transpose()).norm() / std::sqrt(N);
    const Matrix fhat = recover_factors(Lhat, y);
    const Matrix fdiff = fhat - f_norm * Knt.transpose();
    const double factor_err = fdiff.rowwise().norm().maxCoeff();
    const double knt_dev =
        (Knt.transpose() * Knt - Matrix::Identity(c.K, c.K)).norm();

    const FactorSet fs(fhat, {}, true);
    const SaptEstimate est = estimate_observed(y, fs, w, c.lambda, LagSpec::fixed(c.k));
    const Matrix Kinvt = Knt.transpose().inverse();
    SaptParams target{truth_norm.rho, truth_norm.loadings * Kinvt.transpose()};
    const ErrorPair ce = metric_ce(est.params, target);
    const ErrorPair ce_raw = metric_ce(est.params, rep.params);

    const Matrix acov = factor_asy_cov(Lambda, rep.params, w,
                                       c.noise_sd * c.noise_sd * Matrix::Identity(c.N, c.N), Knt);
    const double sd1 = std::sqrt(std::max(acov(0, 0), 0.0));
    double cov10 = 0, cov05 = 0, cov01 = 0;
    int count = 0;
    const double z10 = normal_quantile(0.95), z05 = normal_quantile(0.975), z01 = normal_quantile(0.995);
    for (int t = 0; t < std::min(c.T, 100); t += 5) {
        const double stat = std::abs(std::sqrt(N) * fdiff(t, 0));
        cov10 += stat <= z10 * sd1;
        cov05 += stat <= z05 * sd1;
        cov01 += stat <= z01 * sd1;
        ++count;
    }
    return {k_ratio,  k_ic1,        k_ic2,  loading_err,   factor_err,    knt_dev, ce.beta,
            ce_raw.beta, ce.rho, cov10 / count, cov05 / count, cov01 / count};
}

std::vector<double> forecast_task(const Replication& rep, const SpatialWeights& w,
                                  const SimConfig& c) {
    const PanelData y(rep.y);
    const FactorSet f(rep.factors);
    ForecastOptions opt;
    opt.fraction = c.fraction;
    opt.lambda = c.lambda;
    opt.lag = LagSpec::fixed(c.k);
    opt.form = PredictorForm::Structural;
    const double fe1 = run_forecast(y, &f, w, ModelTag::SaptObserved, opt).fe;
    const double ffac = run_forecast(y, &f, w, ModelTag::FactorOnly, opt).fe;
    opt.form = PredictorForm::ReducedForm;
    const double fe1r = run_forecast(y, &f, w, ModelTag::SaptObserved, opt).fe;
    opt.lag = LagSpec::fixed(0);
    const double fe0r = run_forecast(y, &f, w, ModelTag::SaptObserved, opt).fe;
    opt.form = PredictorForm::Structural;
    const double fe0 = run_forecast(y, &f, w, ModelTag::SaptObserved, opt).fe;
    return {fe1, fe0, ffac, fe1r, fe0r};
}

}  // namespace

std::vector<double> run_task(const Replication& rep, const SpatialWeights& weights,
                             const SimConfig& config, Task task) {
    std::vector<double> v;
    switch (task) {
        case Task::Observed: v = observed_task(rep, weights, config); break;
        case Task::Coverage: v = coverage_task(rep, weights, config); break;
        case Task::Latent: v = latent_task(rep, weights, config); break;
        case Task::Forecast: v = forecast_task(rep, weights, config); break;
    }
    for (double x : v) {
        if (!std::isfinite(x)) throw NumericError("replication produced a non-finite metric");
    }
    return v;
}

MonteCarloReport run_monte_carlo(const SimConfig& config, Task task, int threads) {
    config.validate();
    const SpatialWeights weights = weights_banded(config.N, config.q);
    MonteCarloReport report;
    report.config = config;
    report.task = task;
    report.metric_names = metric_names(task);
    report.records.resize(static_cast<size_t>(config.reps));

    auto run_one = [&](int r) {
        RepRecord& rec = report.records[static_cast<size_t>(r)];
        rec.rep = r;
        rec.seed = rep_seed(config.seed, static_cast<std::uint64_t>(r));
        try {
            const Replication rep = simulate_replication(config, weights, rec.seed);
            rec.values = run_task(rep, weights, config, task);
        } catch (const std::exception& e) {
            rec.failed = true;
            rec.error = e.what();
            rec.values.assign(report.metric_names.size(), std::numeric_limits<double>::quiet_NaN());
        }
    };

    if (threads <= 1) {
        for (int r = 0; r < config.reps; ++r) run_one(r);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (int r = next++; r < config.reps; r = next++) run_one(r);
            });
        }
        for (auto& th : pool) th.join();
    }
    return report;
}

std::vector<double> MonteCarloReport::column(const std::string& name) const {
    size_t idx = metric_names.size();
    for (size_t j = 0; j < metric_names.size(); ++j) {
        if (metric_names[j] == name) idx = j;
    }
    if (idx == metric_names.size()) throw ValidationError("unknown metric '" + name + "'");
    std::vector<double> out;
    for (const auto& r : records) {
        if (!r.failed) out.push_back(r.values[idx]);
    }
    return out;
}

double MonteCarloReport::mean(const std::string& name) const {
    const auto v = column(name);
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double MonteCarloReport::sd(const std::string& name) const {
    const auto v = column(name);
    if (v.size() < 2) return 0.0;
    const double m = mean(name);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

int MonteCarloReport::failed_count() const {
    int n = 0;
    for (const auto& r : records) n += r.failed;
    return n;
}

std::string mean_sd(double mean, double sd) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f(%.3f)", mean, sd);
    return buf;
}

namespace {

std::string num(double x) {
    if (std::isnan(x)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

void write_report_csv(const MonteCarloReport& report, std::ostream& os) {
    os << "rep,seed,failed";
    for (const auto& n : report.metric_names) os << ',' << n;
    os << '\n';
    for (const auto& r : report.records) {
        os << r.rep + 1 << ',' << r.seed << ',' << (r.failed ? 1 : 0);
        for (double v : r.values) os << ',' << num(v);
        os << '\n';
    }
}

void write_summary_csv(const MonteCarloReport& report, std::ostream& os) {
    const SimConfig& c = report.config;
    os << "task,N,T,K,reps,failed";
    for (const auto& n : report.metric_names) os << ',' << n;
    os << '\n';
    os << to_string(report.task) << ',' << c.N << ',' << c.T << ',' << c.K << ',' << c.reps << ','
       << report.failed_count();
    for (const auto& n : report.metric_names) os << ',' << mean_sd(report.mean(n), report.sd(n));
    os << '\n';
}

}  // namespace sapt
