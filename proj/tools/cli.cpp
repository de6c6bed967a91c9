#include "cli.hpp"

#include "sapt/forecast.hpp"
#include "sapt/simulate.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#ifndef SAPT_VERSION
#define SAPT_VERSION "0.0.0"
#endif

namespace sapt::cli {

namespace {

const std::vector<KeySpec> kWeightKeys = {
    {"weights", "", "weights CSV (id column plus N columns)"},
    {"weights-source", "", "banded | locations | distances | correlation | radius"},
    {"locations", "", "locations CSV (id,lat,lon)"},
    {"distances", "", "distance matrix CSV (id column plus N columns)"},
    {"q", "1", "band width for the banded source"},
    {"radius-km", "", "neighbor radius in km (radius source with locations)"},
    {"threshold", "", "neighbor distance threshold (radius source with distances)"},
};

std::vector<KeySpec> concat(std::vector<KeySpec> a, const std::vector<KeySpec>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

const std::map<std::string, std::vector<KeySpec>>& key_table() {
    static const std::map<std::string, std::vector<KeySpec>> table = {
        {"simulate",
         {{"task", "forecast", "observed | latent | coverage | forecast"},
          {"N", "25", "number of units"},
          {"T", "400", "number of periods"},
          {"K", "3", "number of factors"},
          {"q", "3", "band width of the simulated weight matrix"},
          {"reps", "100", "replications"},
          {"seed", "1234", "master seed"},
          {"lambda", "1e-3", "ridge penalty"},
          {"k", "1", "instrument lag (0 = contemporaneous only)"},
          {"k0", "2", "autocovariance lags for latent extraction"},
          {"J", "8", "information-criterion scan bound"},
          {"fraction", "0.8", "training fraction (forecast task)"},
          {"burn-in", "200", "factor burn-in steps"},
          {"rho-law", "unit-power", "unit-power | pareto"},
          {"rho-alpha", "5", "power-law exponent"},
          {"rho-scale", "1", "power-law scale (upper end or Pareto minimum)"},
          {"rho-cap", "0.95", "cap on rho"},
          {"phi", "", "fixed AR coefficient (empty: U(0.5, 0.9) per factor)"},
          {"noise-sd", "1", "idiosyncratic noise sd"},
          {"unit", "1", "unit for the coverage task (1-based)"},
          {"bandwidth", "-1", "HAC bandwidth (-1: default rule)"},
          {"kernel", "bartlett", "bartlett | truncated"},
          {"out-dir", ".", "output directory"}}},
        {"estimate",
         concat({{"panel", "", "panel CSV (time column plus unit columns)"},
                 {"factors", "", "factors CSV; omit for latent mode"}},
                concat(kWeightKeys,
                       {{"lambda", "1e-3", "ridge penalty or 'auto'"},
                        {"lambda-grid", "", "comma list of candidates for lambda=auto"},
                        {"lambda-shared", "false", "one lambda for all units under auto", true},
                        {"fraction", "0.8", "validation split for lambda=auto"},
                        {"k", "1", "instrument lag"},
                        {"kbar", "0", "boosted lag search bound (0: use k)"},
                        {"k0", "2", "autocovariance lags for latent extraction"},
                        {"K-rule", "ratio", "fixed | ic1 | ic2 | ratio"},
                        {"K", "0", "factor count for K-rule=fixed"},
                        {"J", "8", "information-criterion scan bound"},
                        {"infer", "false", "write Wald interval endpoints", true},
                        {"alpha", "0.05", "interval level"},
                        {"bandwidth", "-1", "HAC bandwidth (-1: default rule)"},
                        {"kernel", "bartlett", "bartlett | truncated"},
                        {"out-dir", ".", "output directory"}}))},
        {"weights",
         concat({{"N", "", "number of units (banded source)"},
                 {"panel", "", "panel CSV (correlation source)"}},
                concat(std::vector<KeySpec>(kWeightKeys.begin() + 1, kWeightKeys.end()),
                       {{"out-dir", ".", "output directory"}}))},
        {"forecast",
         concat({{"panel", "", "panel CSV"}, {"factors", "", "factors CSV"}},
                concat(kWeightKeys,
                       {{"models", "all", "all or comma list of sapt-observed,sapt-latent,factor-only"},
                        {"fraction", "0.8", "training fraction"},
                        {"lambda", "1e-3", "ridge penalty or 'auto'"},
                        {"lambda-grid", "", "comma list of candidates for lambda=auto"},
                        {"k", "1", "instrument lag"},
                        {"kbar", "0", "boosted lag search bound (0: use k)"},
                        {"k0", "2", "autocovariance lags for latent extraction"},
                        {"K-rule", "ratio", "fixed | ic1 | ic2 | ratio"},
                        {"K", "0", "factor count for K-rule=fixed"},
                        {"J", "8", "information-criterion scan bound"},
                        {"predictor", "structural", "structural | reduced"},
                        {"out-dir", ".", "output directory"}}))},
    };
    return table;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& why) {
    throw ValidationError("invalid value for '" + key + "': '" + value + "' (" + why + ")");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string out_path(const RunConfig& c, const std::string& name) {
    std::string dir = c.get("out-dir");
    if (dir.empty()) dir = ".";
    return dir + "/" + name;
}

struct LoadedPanel {
    Table table;
    PanelData raw;
};

LoadedPanel load_panel(const std::string& path) {
    Table t = read_panel_csv(path);
    if (t.values.rows() < 2) throw ValidationError("panel: need at least two rows");
    for (Eigen::Index j = 0; j < t.values.cols(); ++j) {
        const auto col = t.values.col(j);
        if ((col.array() - col(0)).abs().maxCoeff() == 0.0) {
            throw ValidationError("panel: unit '" + t.header[static_cast<size_t>(j)] +
                                  "' is constant (zero variance)");
        }
    }
    PanelData raw(t.values, t.header);
    return {std::move(t), std::move(raw)};
}

std::optional<FactorSet> load_factors(const RunConfig& c, const Table& panel) {
    if (!c.provided("factors")) return std::nullopt;
    Table t = read_factors_csv(c.get("factors"));
    if (t.values.rows() != panel.values.rows()) {
        throw ValidationError("factors: " + std::to_string(t.values.rows()) + " rows but panel has " +
                              std::to_string(panel.values.rows()));
    }
    for (size_t r = 0; r < t.row_labels.size(); ++r) {
        if (t.row_labels[r] != panel.row_labels[r]) {
            throw ValidationError("factors: data row " + std::to_string(r + 1) + " time '" +
                                  t.row_labels[r] + "' does not match panel time '" +
                                  panel.row_labels[r] + "'");
        }
    }
    return FactorSet(t.values, t.header);
}

struct BuiltWeights {
    SpatialWeights weights;
    std::vector<std::string> ids;
    std::optional<Matrix> distances;
};

Matrix read_distances_for(const RunConfig& c, std::vector<std::string>& ids) {
    if (c.provided("locations")) {
        const GeoLocations loc = read_locations_csv(c.get("locations"));
        ids = loc.ids;
        return haversine_matrix(loc);
    }
    if (c.provided("distances")) {
        Table t = read_square_csv(c.get("distances"), "distances");
        ids = t.header;
        return t.values;
    }
    throw ValidationError("weights-source '" + c.get("weights-source") +
                          "' needs 'locations' or 'distances'");
}

BuiltWeights build_weights(const RunConfig& c, const PanelData* panel, Eigen::Index N_hint) {
    if (c.has("weights") && c.provided("weights")) {
        Table t = read_square_csv(c.get("weights"), "weights");
        return {SpatialWeights(t.values, true), t.header, std::nullopt};
    }
    const std::string src = c.get("weights-source");
    if (src.empty()) throw ValidationError("missing 'weights' or 'weights-source'");
    std::vector<std::string> ids;
    if (src == "banded") {
        const Eigen::Index N = panel ? panel->N() : N_hint;
        if (N < 2) throw ValidationError("banded weights need 'N' >= 2");
        const int q = c.get_int("q", 1);
        if (q > N - 1) bad_value("q", c.get("q"), "must be <= N-1");
        ids = panel ? panel->unit_ids() : std::vector<std::string>{};
        if (ids.empty()) {
            for (Eigen::Index i = 0; i < N; ++i) ids.push_back("u" + std::to_string(i + 1));
        }
        return {weights_banded(N, q), ids, std::nullopt};
    }
    if (src == "correlation") {
        if (!panel) throw ValidationError("weights-source 'correlation' needs 'panel'");
        return {weights_from_correlation(*panel), panel->unit_ids(), std::nullopt};
    }
    if (src == "locations" || src == "distances") {
        if (src == "locations" && !c.provided("locations")) throw ValidationError("missing 'locations'");
        if (src == "distances" && !c.provided("distances")) throw ValidationError("missing 'distances'");
        Matrix d = read_distances_for(c, ids);
        SpatialWeights w = weights_from_distance(d, ids);
        return {std::move(w), ids, std::move(d)};
    }
    if (src == "radius") {
        Matrix d = read_distances_for(c, ids);
        const std::string key = c.provided("locations") ? "radius-km" : "threshold";
        if (!c.provided(key)) throw ValidationError("weights-source 'radius' needs '" + key + "'");
        const double thr = c.get_double(key);
        if (!(thr > 0.0)) bad_value(key, c.get(key), "must be positive");
        SpatialWeights w = weights_radius(d, thr, ids);
        return {std::move(w), ids, std::move(d)};
    }
    bad_value("weights-source", src, "expected banded, locations, distances, correlation or radius");
}

void check_ids(const std::vector<std::string>& weight_ids, const std::vector<std::string>& unit_ids) {
    if (weight_ids.size() != unit_ids.size()) {
        throw ValidationError("weights: " + std::to_string(weight_ids.size()) + " units but panel has " +
                              std::to_string(unit_ids.size()));
    }
    for (size_t i = 0; i < unit_ids.size(); ++i) {
        if (weight_ids[i] != unit_ids[i]) {
            throw ValidationError("weights: id '" + weight_ids[i] + "' at position " + std::to_string(i + 1) +
                                  " does not match panel unit '" + unit_ids[i] + "'");
        }
    }
}

LambdaSpec lambda_spec(const RunConfig& c) {
    const std::string v = c.get("lambda");
    if (v == "auto") {
        LambdaAuto a;
        if (c.provided("lambda-grid")) {
            a.candidates = c.get_list("lambda-grid");
            for (double x : a.candidates) {
                if (!(x >= 0.0)) bad_value("lambda-grid", c.get("lambda-grid"), "candidates must be >= 0");
            }
        }
        a.split_fraction = c.get_double("fraction");
        if (c.has("lambda-shared")) a.shared = c.get_bool("lambda-shared");
        return a;
    }
    const double x = c.get_double("lambda");
    if (!(x >= 0.0)) bad_value("lambda", v, "must be >= 0 or 'auto'");
    return x;
}

LagSpec lag_spec(const RunConfig& c) {
    const int kbar = c.get_int("kbar", 0);
    if (kbar > 0) return LagSpec::boost(kbar);
    return LagSpec::fixed(c.get_int("k", 0));
}

KSpec k_spec(const RunConfig& c) {
    KSpec s;
    const std::string r = c.get("K-rule");
    if (r == "fixed") s.rule = KRule::Fixed;
    else if (r == "ic1") s.rule = KRule::IC1;
    else if (r == "ic2") s.rule = KRule::IC2;
    else if (r == "ratio") s.rule = KRule::Ratio;
    else bad_value("K-rule", r, "expected fixed, ic1, ic2 or ratio");
    s.K = c.get_int("K", 0);
    if (s.rule == KRule::Fixed && s.K < 1) bad_value("K", c.get("K"), "K-rule=fixed needs K >= 1");
    s.J = c.get_int("J", 1);
    return s;
}

std::string rule_name(KRule r) {
    switch (r) {
        case KRule::Fixed: return "fixed";
        case KRule::IC1: return "ic1";
        case KRule::IC2: return "ic2";
        case KRule::Ratio: return "ratio";
    }
    return "unknown";
}

Kernel kernel_of(const RunConfig& c) {
    const std::string k = c.get("kernel");
    if (k == "bartlett") return Kernel::Bartlett;
    if (k == "truncated") return Kernel::Truncated;
    bad_value("kernel", k, "expected bartlett or truncated");
}

std::vector<std::string> numbered(const std::string& prefix, Eigen::Index n) {
    std::vector<std::string> v;
    for (Eigen::Index j = 0; j < n; ++j) v.push_back(prefix + std::to_string(j + 1));
    return v;
}

void stderr_sink(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

}  // namespace

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"simulate", "estimate", "weights", "forecast"};
    return names;
}

const std::vector<KeySpec>& command_keys(const std::string& command) {
    const auto& t = key_table();
    const auto it = t.find(command);
    if (it == t.end()) throw ValidationError("unknown command '" + command + "'");
    return it->second;
}

bool RunConfig::has(const std::string& key) const {
    for (const auto& kv : values) {
        if (kv.first == key) return true;
    }
    return false;
}

const std::string& RunConfig::get(const std::string& key) const {
    for (const auto& kv : values) {
        if (kv.first == key) return kv.second;
    }
    throw ValidationError("setting '" + key + "' is not defined for command '" + command + "'");
}

int RunConfig::get_int(const std::string& key, int min_value) const {
    const std::string& s = get(key);
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) bad_value(key, s, "expected an integer");
    if (v < min_value) bad_value(key, s, "must be >= " + std::to_string(min_value));
    return v;
}

double RunConfig::get_double(const std::string& key) const {
    const std::string& s = get(key);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        bad_value(key, s, "expected a finite number");
    }
    return v;
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& s = get(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    bad_value(key, s, "expected true or false");
}

std::vector<double> RunConfig::get_list(const std::string& key) const {
    std::vector<double> out;
    std::istringstream is(get(key));
    std::string item;
    while (std::getline(is, item, ',')) {
        item = trim(item);
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
            bad_value(key, get(key), "expected a comma-separated list of numbers");
        }
        out.push_back(v);
    }
    if (out.empty()) bad_value(key, get(key), "list is empty");
    return out;
}

std::vector<std::string> RunConfig::header() const {
    std::vector<std::string> h = {std::string("sapt ") + SAPT_VERSION, "command=" + command};
    for (const auto& kv : values) {
        if (kv.first != "out-dir") h.push_back(kv.first + "=" + kv.second);
    }
    return h;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("config file '" + path + "' line " + std::to_string(lineno) +
                                  ": expected key=value");
        }
        std::string key = trim(line.substr(0, eq));
        if (key.rfind("--", 0) == 0) key.erase(0, 2);
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

RunConfig resolve_config(const std::string& command, const std::map<std::string, std::string>& file,
                         const std::map<std::string, std::string>& flags) {
    const auto& keys = command_keys(command);
    auto known = [&](const std::string& k) {
        for (const auto& s : keys) {
            if (s.key == k) return true;
        }
        return false;
    };
    for (const auto& kv : file) {
        if (!known(kv.first)) throw ValidationError("unknown key '" + kv.first + "' for command '" + command + "'");
    }
    for (const auto& kv : flags) {
        if (!known(kv.first)) throw ValidationError("unknown key '" + kv.first + "' for command '" + command + "'");
    }
    RunConfig c;
    c.command = command;
    for (const auto& s : keys) {
        std::string v = s.default_value;
        if (auto it = file.find(s.key); it != file.end()) v = it->second;
        if (auto it = flags.find(s.key); it != flags.end()) v = it->second;
        c.values.emplace_back(s.key, v);
    }
    return c;
}

std::vector<std::string> cmd_simulate(const RunConfig& c, int threads) {
    SimConfig s;
    const Task task = task_from_string(c.get("task"));
    s.N = c.get_int("N", 2);
    s.T = c.get_int("T", 2);
    s.K = c.get_int("K", 1);
    s.q = c.get_int("q", 1);
    s.reps = c.get_int("reps", 1);
    {
        const std::string& v = c.get("seed");
        std::uint64_t seed = 0;
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), seed);
        if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) bad_value("seed", v, "expected a nonnegative integer");
        s.seed = seed;
    }
    s.lambda = c.get_double("lambda");
    s.k = c.get_int("k", 0);
    s.k0 = c.get_int("k0", 1);
    s.J = c.get_int("J", 1);
    s.fraction = c.get_double("fraction");
    s.burn_in = c.get_int("burn-in", 0);
    s.rho_law = rho_law_from_string(c.get("rho-law"));
    s.rho_alpha = c.get_double("rho-alpha");
    s.rho_scale = c.get_double("rho-scale");
    s.rho_cap = c.get_double("rho-cap");
    if (c.provided("phi")) s.phi_fixed = c.get_double("phi");
    s.noise_sd = c.get_double("noise-sd");
    s.unit = c.get_int("unit", 1) - 1;
    s.bandwidth = c.get_int("bandwidth", -1);
    s.kernel = kernel_of(c);
    s.validate();

    const MonteCarloReport report = run_monte_carlo(s, task, threads);
    if (report.failed_count() == s.reps) {
        throw NumericError("all " + std::to_string(s.reps) + " replications failed; first error: " +
                           report.records.front().error);
    }
    if (report.failed_count() > 0) {
        warn(std::to_string(report.failed_count()) + " of " + std::to_string(s.reps) + " replications failed");
    }
    std::string comments;
    for (const auto& h : c.header()) comments += "# " + h + "\n";
    std::ostringstream reps, summary;
    write_report_csv(report, reps);
    write_summary_csv(report, summary);
    const std::string base = "simulate_" + to_string(task);
    const std::string p1 = out_path(c, base + ".csv");
    const std::string p2 = out_path(c, base + "_summary.csv");
    write_text(p1, comments + reps.str());
    write_text(p2, comments + summary.str());
    return {p1, p2};
}

std::vector<std::string> cmd_estimate(const RunConfig& c) {
    if (!c.provided("panel")) throw ValidationError("missing 'panel'");
    LoadedPanel lp = load_panel(c.get("panel"));
    const PanelData y = demean(lp.raw);
    std::optional<FactorSet> f = load_factors(c, lp.table);
    if (f) f = demean(*f);
    BuiltWeights bw = build_weights(c, &y, y.N());
    check_ids(bw.ids, y.unit_ids());
    const LambdaSpec lam = lambda_spec(c);
    const LagSpec lag = lag_spec(c);
    const bool infer = c.get_bool("infer");
    const double alpha = c.get_double("alpha");
    if (infer && !(alpha > 0.0 && alpha < 1.0)) bad_value("alpha", c.get("alpha"), "must lie in (0, 1)");

    std::vector<std::string> header = c.header();
    std::vector<std::string> written;
    SaptEstimate est;
    std::optional<FactorSet> used = f;
    if (f) {
        est = estimate_observed(y, *f, bw.weights, lam, lag);
    } else {
        const LatentEstimate le = estimate_latent(y, bw.weights, c.get_int("k0", 1), k_spec(c), lam, lag);
        est = le.estimate;
        used.emplace(FactorSet::Centered{}, le.fit.factors, numbered("f_", le.K_hat));
        header.push_back("K_hat=" + std::to_string(le.K_hat));
        header.push_back("K_rule=" + rule_name(le.rule));
        const std::string pl = out_path(c, "loadings.csv");
        const std::string pf = out_path(c, "factors.csv");
        std::vector<std::string> lh = {"id"};
        for (Eigen::Index j = 0; j < le.K_hat; ++j) lh.push_back("lambda_" + std::to_string(j + 1));
        write_table(pl, header, lh, y.unit_ids(), le.fit.loadings);
        std::vector<std::string> fh = {"time"};
        const auto fid = numbered("f_", le.K_hat);
        fh.insert(fh.end(), fid.begin(), fid.end());
        write_table(pf, header, fh, lp.table.row_labels, le.fit.factors);
        written = {pl, pf};
    }
    const int lag_used = est.lag_pair.second;
    header.push_back("lag_used=" + std::to_string(lag_used));

    const Eigen::Index N = y.N(), K = est.params.K();
    std::vector<std::string> cols = {"unit", "rho"};
    for (const auto& id : used->factor_ids()) cols.push_back("b_" + id);
    cols.push_back("lambda");
    Eigen::Index width = K + 2;
    if (infer) {
        if (lag_used < 1) throw ValidationError("'infer' needs an instrument lag k >= 1");
        cols.push_back("rho_lo");
        cols.push_back("rho_hi");
        for (const auto& id : used->factor_ids()) {
            cols.push_back("b_" + id + "_lo");
            cols.push_back("b_" + id + "_hi");
        }
        width += 2 * (K + 1);
    }
    Matrix out(N, width);
    const LagCovariances covs = infer ? compute_covariances(y, *used, {lag_used}) : LagCovariances{};
    for (Eigen::Index i = 0; i < N; ++i) {
        out(i, 0) = est.params.rho(i);
        out.row(i).segment(1, K) = est.params.loadings.row(i);
        out(i, K + 1) = est.lambda_used(i);
        if (infer) {
            const LongRunFEps lr = longrun_fe(used->values(), est.residuals.col(i), c.get_int("bandwidth", -1),
                                              kernel_of(c), lag_used);
            UnitInference inf = unit_asymptotics(i, covs, bw.weights, lr);
            Vector bhat(K + 1);
            bhat << est.params.rho(i), est.params.loadings.row(i).transpose();
            wald_intervals(inf, bhat, y.T(), alpha);
            for (Eigen::Index j = 0; j <= K; ++j) {
                out(i, K + 2 + 2 * j) = inf.lower(j);
                out(i, K + 3 + 2 * j) = inf.upper(j);
            }
        }
    }
    const std::string pe = out_path(c, "estimates.csv");
    write_table(pe, header, cols, y.unit_ids(), out);
    written.insert(written.begin(), pe);
    return written;
}

std::vector<std::string> cmd_weights(const RunConfig& c) {
    std::optional<PanelData> panel;
    if (c.provided("panel")) panel = load_panel(c.get("panel")).raw;
    Eigen::Index N = 0;
    if (c.provided("N")) N = c.get_int("N", 2);
    BuiltWeights bw = build_weights(c, panel ? &*panel : nullptr, N);
    std::vector<std::string> header = {"id"};
    header.insert(header.end(), bw.ids.begin(), bw.ids.end());
    std::vector<std::string> written;
    const std::string pw = out_path(c, "weights.csv");
    write_table(pw, c.header(), header, bw.ids, bw.weights.values());
    written.push_back(pw);
    if (bw.distances && c.provided("locations")) {
        const std::string pd = out_path(c, "distances.csv");
        write_table(pd, c.header(), header, bw.ids, *bw.distances);
        written.push_back(pd);
    }
    return written;
}

std::vector<std::string> cmd_forecast(const RunConfig& c) {
    if (!c.provided("panel")) throw ValidationError("missing 'panel'");
    LoadedPanel lp = load_panel(c.get("panel"));
    const std::optional<FactorSet> f = load_factors(c, lp.table);
    BuiltWeights bw = build_weights(c, &lp.raw, lp.raw.N());
    check_ids(bw.ids, lp.raw.unit_ids());

    std::vector<ModelTag> models;
    const std::string m = c.get("models");
    if (m == "all") {
        models = {ModelTag::SaptObserved, ModelTag::SaptLatent, ModelTag::FactorOnly};
    } else {
        std::istringstream is(m);
        std::string item;
        while (std::getline(is, item, ',')) {
            try {
                models.push_back(model_from_string(trim(item)));
            } catch (const ValidationError&) {
                bad_value("models", m, "expected all or a list of sapt-observed, sapt-latent, factor-only");
            }
        }
        if (models.empty()) bad_value("models", m, "no models selected");
    }
    for (ModelTag t : models) {
        if (t != ModelTag::SaptLatent && !f) {
            throw ValidationError("model '" + to_string(t) + "' needs 'factors'");
        }
    }
    ForecastOptions opt;
    opt.fraction = c.get_double("fraction");
    opt.lambda = lambda_spec(c);
    opt.lag = lag_spec(c);
    opt.k0 = c.get_int("k0", 1);
    opt.K_spec = k_spec(c);
    const std::string pred = c.get("predictor");
    if (pred == "structural") opt.form = PredictorForm::Structural;
    else if (pred == "reduced") opt.form = PredictorForm::ReducedForm;
    else bad_value("predictor", pred, "expected structural or reduced");

    Matrix out(static_cast<Eigen::Index>(models.size()), 4);
    std::vector<std::string> labels;
    for (size_t r = 0; r < models.size(); ++r) {
        const ForecastReport rep = run_forecast(lp.raw, f ? &*f : nullptr, bw.weights, models[r], opt);
        const auto i = static_cast<Eigen::Index>(r);
        out(i, 0) = static_cast<double>(rep.N);
        out(i, 1) = static_cast<double>(lp.raw.T());
        out(i, 2) = static_cast<double>(rep.T1);
        out(i, 3) = rep.fe;
        labels.push_back(to_string(models[r]));
    }
    const std::string p = out_path(c, "forecast.csv");
    write_table(p, c.header(), {"model", "N", "T", "T1", "fe"}, labels, out);
    return {p};
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spatial arbitrage pricing toolkit", "sapt"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("sapt ") + SAPT_VERSION);

    std::map<std::string, std::map<std::string, std::string>> option_values;
    std::map<std::string, std::map<std::string, bool>> flag_values;
    std::map<std::string, std::string> config_paths;
    int threads = 1;
    std::map<std::string, CLI::App*> subs;
    for (const auto& name : command_names()) {
        CLI::App* sub = app.add_subcommand(name);
        auto& ov = option_values[name];
        auto& fv = flag_values[name];
        for (const auto& k : command_keys(name)) {
            const std::string desc = k.help + (k.default_value.empty() ? "" : " [" + k.default_value + "]");
            if (k.is_flag) sub->add_flag("--" + k.key, fv[k.key], desc);
            else sub->add_option("--" + k.key, ov[k.key], desc);
        }
        sub->add_option("--config", config_paths[name], "key=value settings file");
        if (name == "simulate") {
            sub->add_option("--threads", threads, "worker threads (outputs do not depend on it)")
                ->check(CLI::Range(1, 1024));
        }
        subs[name] = sub;
    }

    std::vector<std::string> argv_store = {"sapt"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());

    const WarningSink previous = set_warning_sink(&stderr_sink);
    struct Restore {
        WarningSink s;
        ~Restore() { set_warning_sink(s); }
    } restore{previous};

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }

    try {
        for (const auto& name : command_names()) {
            CLI::App* sub = subs[name];
            if (!sub->parsed()) continue;
            std::map<std::string, std::string> flags;
            for (const auto& k : command_keys(name)) {
                if (sub->count("--" + k.key) == 0) continue;
                flags[k.key] = k.is_flag ? (flag_values[name][k.key] ? "true" : "false") : option_values[name][k.key];
            }
            std::map<std::string, std::string> file;
            if (!config_paths[name].empty()) file = parse_config_file(config_paths[name]);
            const RunConfig config = resolve_config(name, file, flags);
            std::vector<std::string> written;
            if (name == "simulate") written = cmd_simulate(config, threads);
            else if (name == "estimate") written = cmd_estimate(config);
            else if (name == "weights") written = cmd_weights(config);
            else written = cmd_forecast(config);
            for (const auto& p : written) out << "wrote " << p << '\n';
        }
        return kOk;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    } catch (const NumericError& e) {
        err << "error: " << e.what() << '\n';
        return kNumericError;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kNumericError;
    }
}

}  // namespace sapt::cli
