#include "test_util.hpp"

#include <gtest/gtest.h>

#include "cli.hpp"
#include "sapt/forecast.hpp"

#include <filesystem>
#include <fstream>
#include <unistd.h>
#include <sstream>

using namespace sapt;
using namespace sapt::cli;
using sapt::test::random_matrix;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("sapt_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    std::string operator/(const std::string& name) const { return (path_ / name).string(); }
    std::string str() const { return path_.string(); }

private:
    fs::path path_;
};

struct Outcome {
    int code = 0;
    std::string out, err;
};

Outcome run_cli(const std::vector<std::string>& args) {
    std::ostringstream o, e;
    Outcome r;
    r.code = run(args, o, e);
    r.out = o.str();
    r.err = e.str();
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<std::string> labels(const std::string& prefix, Eigen::Index n) {
    std::vector<std::string> v;
    for (Eigen::Index i = 0; i < n; ++i) v.push_back(prefix + std::to_string(i + 1));
    return v;
}

void write_series(const std::string& path, const Matrix& m, const std::vector<std::string>& ids) {
    std::vector<std::string> header = {"time"};
    header.insert(header.end(), ids.begin(), ids.end());
    write_table(path, {}, header, labels("t", m.rows()), m);
}

std::vector<std::string> comment_lines(const std::string& path) {
    std::ifstream in(path);
    std::vector<std::string> v;
    std::string line;
    while (std::getline(in, line) && line.rfind("# ", 0) == 0) v.push_back(line.substr(2));
    return v;
}

bool has_line(const std::vector<std::string>& lines, const std::string& want) {
    return std::find(lines.begin(), lines.end(), want) != lines.end();
}

Replication fixture(int N, int T, std::uint64_t seed, double noise_sd = 1.0, double rho_alpha = 5.0) {
    SimConfig c;
    c.N = N;
    c.T = T;
    c.noise_sd = noise_sd;
    c.rho_alpha = rho_alpha;
    return simulate_replication(c, weights_banded(N, c.q), seed);
}

}  // namespace

TEST(CliSimulate, DeterministicAcrossRunsAndThreads) {
    TempDir a, b, c;
    const std::vector<std::string> base = {"simulate", "--N", "25", "--T", "400", "--K", "3", "--reps", "10",
                                           "--seed", "7", "--out-dir"};
    auto args = [&](const std::string& dir, const std::string& threads) {
        std::vector<std::string> v = base;
        v.push_back(dir);
        v.push_back("--threads");
        v.push_back(threads);
        return v;
    };
    ASSERT_EQ(run_cli(args(a.str(), "1")).code, kOk);
    ASSERT_EQ(run_cli(args(b.str(), "1")).code, kOk);
    ASSERT_EQ(run_cli(args(c.str(), "3")).code, kOk);
    for (const std::string f : {"simulate_forecast.csv", "simulate_forecast_summary.csv"}) {
        const std::string ref = slurp(a / f);
        EXPECT_FALSE(ref.empty());
        EXPECT_EQ(ref, slurp(b / f));
        EXPECT_EQ(ref, slurp(c / f));
    }
    const auto head = comment_lines(a / "simulate_forecast.csv");
    ASSERT_GE(head.size(), 3u);
    EXPECT_EQ(head[0], std::string("sapt ") + SAPT_VERSION);
    EXPECT_TRUE(has_line(head, "seed=7"));
    EXPECT_TRUE(has_line(head, "lambda=1e-3"));
}

TEST(CliSimulate, InvalidKNamesKey) {
    TempDir d;
    const Outcome r = run_cli({"simulate", "--K", "0", "--out-dir", d.str()});
    EXPECT_EQ(r.code, kConfigError);
    EXPECT_NE(r.err.find("'K'"), std::string::npos);
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
    EXPECT_EQ(run_cli({"simulate", "--bogus", "1"}).code, kConfigError);
    EXPECT_EQ(run_cli({"simulate", "--task", "nope", "--out-dir", d.str()}).code, kConfigError);
}

TEST(CliSimulate, SummaryForecastErrorInPublishedBand) {
    TempDir d;
    ASSERT_EQ(run_cli({"simulate", "--reps", "200", "--N", "25", "--T", "400", "--lambda", "1e-3", "--k", "1",
                       "--out-dir", d.str()})
                  .code,
              kOk);
    const Table t = read_table(d / "simulate_forecast.csv", "rep", "report");
    const auto col = std::find(t.header.begin(), t.header.end(), "fe") - t.header.begin();
    const double m = t.values.col(col).mean();
    EXPECT_GE(m, 0.97);
    EXPECT_LE(m, 1.13);
    const std::string summary = slurp(d / "simulate_forecast_summary.csv");
    EXPECT_NE(summary.find("forecast,25,400,3,200,0,"), std::string::npos);
}

TEST(CliEstimate, RoundTripIsBitExact) {
    TempDir d;
    const Replication r = fixture(10, 300, 31);
    const auto ids = labels("u", 10);
    write_series(d / "panel.csv", r.y, ids);
    write_series(d / "factors.csv", r.factors, {"mkt", "smb", "hml"});
    ASSERT_EQ(run_cli({"estimate", "--panel", d / "panel.csv", "--factors", d / "factors.csv",
                       "--weights-source", "banded", "--q", "3", "--out-dir", d.str()})
                  .code,
              kOk);
    const Table t = read_table(d / "estimates.csv", "unit", "estimates");
    EXPECT_EQ(t.header, (std::vector<std::string>{"rho", "b_mkt", "b_smb", "b_hml", "lambda"}));
    EXPECT_EQ(t.row_labels, ids);

    // the file is read back through the same parser, then compared to a direct library run
    const Table panel = read_panel_csv(d / "panel.csv");
    EXPECT_EQ(panel.values, r.y);
    const SaptEstimate est = estimate_observed(demean(PanelData(r.y, ids)), demean(FactorSet(r.factors)),
                                               weights_banded(10, 3), 1e-3, LagSpec::fixed(1));
    EXPECT_EQ(Vector(t.values.col(0)), est.params.rho);
    EXPECT_EQ(Matrix(t.values.middleCols(1, 3)), est.params.loadings);
    EXPECT_TRUE(has_line(comment_lines(d / "estimates.csv"), "lag_used=1"));
}

TEST(CliEstimate, NumberFormattingRoundTrips) {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    for (int i = 0; i < 2000; ++i) {
        const double x = std::ldexp(u(rng), static_cast<int>(u(rng)));
        EXPECT_EQ(std::stod(format_number(x)), x);
    }
}

TEST(CliEstimate, ConstantColumnNamesUnit) {
    TempDir d;
    Matrix y = random_matrix(50, 4, 33);
    y.col(2).setConstant(1.5);
    write_series(d / "panel.csv", y, {"a", "b", "flat", "c"});
    write_series(d / "factors.csv", random_matrix(50, 1, 34), {"f"});
    const Outcome r = run_cli({"estimate", "--panel", d / "panel.csv", "--factors", d / "factors.csv",
                               "--weights-source", "banded", "--out-dir", d.str()});
    EXPECT_EQ(r.code, kConfigError);
    EXPECT_NE(r.err.find("'flat'"), std::string::npos);
}

TEST(CliEstimate, NoiselessFixtureFitsExactly) {
    // Without noise the moment system has rank K, so rho and B are pinned down
    // only up to a line; the structural equation still holds exactly.
    TempDir d;
    const int N = 12, T = 400;
    const Replication r = fixture(N, T, 35, 0.0);
    write_series(d / "panel.csv", r.y, labels("u", N));
    write_series(d / "factors.csv", r.factors, labels("f", 3));
    ASSERT_EQ(run_cli({"estimate", "--panel", d / "panel.csv", "--factors", d / "factors.csv",
                       "--weights-source", "banded", "--q", "3", "--lambda", "1e-12", "--out-dir", d.str()})
                  .code,
              kOk);
    const Table t = read_table(d / "estimates.csv", "unit", "estimates");
    const SaptParams p{t.values.col(0), t.values.middleCols(1, 3)};
    const Matrix yc = demean(PanelData(r.y)).values();
    const Matrix fc = demean(FactorSet(r.factors)).values();
    const Matrix res = structural_residuals(yc, fc, p, weights_banded(N, 3));
    EXPECT_LT(res.cwiseAbs().maxCoeff(), 1e-6 * yc.cwiseAbs().maxCoeff());
}

TEST(CliEstimate, InferenceColumnsBracketEstimates) {
    TempDir d;
    const Replication r = fixture(8, 400, 36);
    write_series(d / "panel.csv", r.y, labels("u", 8));
    write_series(d / "factors.csv", r.factors, labels("f", 3));
    ASSERT_EQ(run_cli({"estimate", "--panel", d / "panel.csv", "--factors", d / "factors.csv",
                       "--weights-source", "banded", "--q", "3", "--infer", "--out-dir", d.str()})
                  .code,
              kOk);
    const Table t = read_table(d / "estimates.csv", "unit", "estimates");
    ASSERT_EQ(t.header.size(), 5u + 8u);
    EXPECT_EQ(t.header[5], "rho_lo");
    EXPECT_EQ(t.header[12], "b_f3_hi");
    for (Eigen::Index i = 0; i < 8; ++i) {
        EXPECT_LE(t.values(i, 5), t.values(i, 0));
        EXPECT_GE(t.values(i, 6), t.values(i, 0));
    }
    EXPECT_EQ(run_cli({"estimate", "--panel", d / "panel.csv", "--factors", d / "factors.csv",
                       "--weights-source", "banded", "--infer", "--k", "0", "--out-dir", d.str()})
                  .code,
              kConfigError);
}

TEST(CliEstimate, LatentModeWritesLoadingsAndFactors) {
    TempDir d;
    const Replication r = fixture(20, 300, 37);
    write_series(d / "panel.csv", r.y, labels("u", 20));
    ASSERT_EQ(run_cli({"estimate", "--panel", d / "panel.csv", "--weights-source", "banded", "--q", "3",
                       "--K-rule", "fixed", "--K", "3", "--out-dir", d.str()})
                  .code,
              kOk);
    const auto head = comment_lines(d / "estimates.csv");
    EXPECT_TRUE(has_line(head, "K_hat=3"));
    EXPECT_TRUE(has_line(head, "K_rule=fixed"));
    const Table l = read_table(d / "loadings.csv", "id", "loadings");
    EXPECT_EQ(l.values.rows(), 20);
    EXPECT_EQ(l.values.cols(), 3);
    EXPECT_LT((l.values.transpose() * l.values / 20.0 - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
    const Table f = read_table(d / "factors.csv", "time", "factors");
    EXPECT_EQ(f.values.rows(), 300);
    EXPECT_EQ(f.row_labels.front(), "t1");
}

TEST(CliWeights, BandedMatchesLibrary) {
    TempDir d;
    ASSERT_EQ(run_cli({"weights", "--N", "5", "--weights-source", "banded", "--q", "1", "--out-dir", d.str()}).code,
              kOk);
    const Table t = read_square_csv(d / "weights.csv", "weights");
    EXPECT_EQ(t.values, weights_banded(5, 1).values());
    for (Eigen::Index i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(t.values.row(i).sum(), 1.0);
}

TEST(CliWeights, LocationsQuarterCircle) {
    TempDir d;
    write_text(d / "loc.csv", "id,lat,lon\nA,0,0\nB,0,90\n");
    ASSERT_EQ(run_cli({"weights", "--weights-source", "locations", "--locations", d / "loc.csv", "--out-dir",
                       d.str()})
                  .code,
              kOk);
    const Table dist = read_square_csv(d / "distances.csv", "distances");
    EXPECT_NEAR(dist.values(0, 1), 10007.54, 0.01);
    const Table w = read_square_csv(d / "weights.csv", "weights");
    EXPECT_EQ(w.header, (std::vector<std::string>{"A", "B"}));
    EXPECT_DOUBLE_EQ(w.values(0, 1), 1.0);
}

TEST(CliWeights, CorrelationMatchesLibraryComposition) {
    TempDir d;
    const Matrix y = random_matrix(300, 6, 38) + 2.0 * random_matrix(300, 1, 39).replicate(1, 6);
    write_series(d / "panel.csv", y, labels("u", 6));
    ASSERT_EQ(run_cli({"weights", "--weights-source", "correlation", "--panel", d / "panel.csv", "--out-dir",
                       d.str()})
                  .code,
              kOk);
    const Table t = read_square_csv(d / "weights.csv", "weights");
    EXPECT_EQ(t.values, weights_from_correlation(PanelData(y, labels("u", 6))).values());
}

TEST(CliForecast, AllModelsAndSplitArithmetic) {
    TempDir d;
    const Replication r = fixture(6, 3273, 40);
    write_series(d / "panel.csv", r.y, labels("u", 6));
    write_series(d / "factors.csv", r.factors, labels("f", 3));
    ASSERT_EQ(run_cli({"forecast", "--panel", d / "panel.csv", "--factors", d / "factors.csv", "--weights-source",
                       "banded", "--q", "3", "--K-rule", "fixed", "--K", "3", "--fraction", "0.8", "--out-dir",
                       d.str()})
                  .code,
              kOk);
    const Table t = read_table(d / "forecast.csv", "model", "forecast");
    EXPECT_EQ(t.row_labels, (std::vector<std::string>{"sapt-observed", "sapt-latent", "factor-only"}));
    for (Eigen::Index i = 0; i < 3; ++i) {
        EXPECT_EQ(t.values(i, 1), 3273.0);
        EXPECT_EQ(t.values(i, 2), 2618.0);
    }
}

TEST(CliForecast, SpatialModelBeatsFactorOnlyOnStrongRho) {
    TempDir d;
    const Replication r = fixture(25, 400, 41, 1.0, 20.0);
    write_series(d / "panel.csv", r.y, labels("u", 25));
    write_series(d / "factors.csv", r.factors, labels("f", 3));
    ASSERT_EQ(run_cli({"forecast", "--panel", d / "panel.csv", "--factors", d / "factors.csv", "--weights-source",
                       "banded", "--q", "3", "--models", "sapt-observed,factor-only", "--out-dir", d.str()})
                  .code,
              kOk);
    const Table t = read_table(d / "forecast.csv", "model", "forecast");
    ASSERT_EQ(t.values.rows(), 2);
    EXPECT_LT(t.values(0, 3), t.values(1, 3));
    EXPECT_EQ(run_cli({"forecast", "--panel", d / "panel.csv", "--weights-source", "banded", "--models",
                       "factor-only", "--out-dir", d.str()})
                  .code,
              kConfigError);
}

TEST(CliConfig, FilePrecedenceAndUnknownKeys) {
    TempDir d;
    write_text(d / "run.cfg", "# settings\nreps = 3\nseed=11\n\nN=8\nT=60\nK=2\nq=2\n");
    ASSERT_EQ(run_cli({"simulate", "--config", d / "run.cfg", "--reps", "2", "--out-dir", d.str()}).code, kOk);
    const auto head = comment_lines(d / "simulate_forecast.csv");
    EXPECT_TRUE(has_line(head, "reps=2"));
    EXPECT_TRUE(has_line(head, "seed=11"));
    EXPECT_TRUE(has_line(head, "burn-in=200"));
    const Table t = read_table(d / "simulate_forecast.csv", "rep", "report");
    EXPECT_EQ(t.values.rows(), 2);

    write_text(d / "bad.cfg", "reps=2\ncolour=blue\n");
    const Outcome r = run_cli({"simulate", "--config", d / "bad.cfg", "--out-dir", d.str()});
    EXPECT_EQ(r.code, kConfigError);
    EXPECT_NE(r.err.find("colour"), std::string::npos);
    EXPECT_THROW(resolve_config("simulate", {{"bogus", "1"}}, {}), ValidationError);
    const RunConfig rc = resolve_config("simulate", {{"N", "9"}}, {{"N", "10"}});
    EXPECT_EQ(rc.get("N"), "10");
}

TEST(CliErrors, IoAndSchemaCodes) {
    TempDir d;
    EXPECT_EQ(run_cli({"estimate", "--panel", d / "missing.csv", "--weights-source", "banded", "--out-dir", d.str()})
                  .code,
              kIoError);
    write_text(d / "panel.csv", "time,a,b\nt1,1,2\nt2,3,abc\nt3,0,1\n");
    const Outcome r =
        run_cli({"estimate", "--panel", d / "panel.csv", "--weights-source", "banded", "--out-dir", d.str()});
    EXPECT_EQ(r.code, kConfigError);
    EXPECT_NE(r.err.find("row 3"), std::string::npos);
    EXPECT_NE(r.err.find("column 3"), std::string::npos);
    write_text(d / "short.csv", "time,a,b\nt1,1\n");
    EXPECT_EQ(run_cli({"estimate", "--panel", d / "short.csv", "--weights-source", "banded", "--out-dir", d.str()})
                  .code,
              kConfigError);
    write_text(d / "nohead.csv", "when,a,b\nt1,1,2\n");
    EXPECT_EQ(run_cli({"estimate", "--panel", d / "nohead.csv", "--weights-source", "banded", "--out-dir", d.str()})
                  .code,
              kConfigError);
}
