// sipvol: simulate intraday panels, estimate spot variance, predict the rest
// of the day and backtest the predictors.

#include "sipvol/config.hpp"
#include "sipvol/errors.hpp"
#include "sipvol/evaluation.hpp"
#include "sipvol/experiment.hpp"
#include "sipvol/io.hpp"
#include "sipvol/lowrank.hpp"
#include "sipvol/simulate.hpp"
#include "sipvol/spot_vol.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace sipvol;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

/// Options shared by every subcommand; applied in order defaults < file < env < flags.
struct CommonFlags {
    std::string config_file;
    std::vector<std::string> sets;
    std::optional<int> threads;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;

    // subcommand-specific shorthands, stored as key=value overrides
    std::vector<std::pair<std::string, std::string>> shorthands;
};

void add_common(CLI::App* sub, CommonFlags& f) {
    sub->add_option("-c,--config", f.config_file, "Config file (sectioned key = value)");
    sub->add_option("--set", f.sets, "Override any config key, e.g. --set spot.theta=0.5")->take_all();
    sub->add_option("--threads", f.threads, "Worker threads");
    sub->add_option("-o,--out", f.out, "Output directory");
    sub->add_option("--seed", f.seed, "Master seed");
}

void shorthand(CLI::App* sub, CommonFlags& f, const std::string& flag, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(flag, [&f, key](const std::string& v) { f.shorthands.emplace_back(key, v); },
                                          help);
}

RunConfig resolve(const CommonFlags& f) {
    RunConfig cfg;
    if (!f.config_file.empty()) cfg = load_config(f.config_file, cfg);
    apply_env_overrides(cfg);
    for (const auto& [k, v] : f.shorthands) set_config_value(cfg, k, v);
    for (const auto& s : f.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
        set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    if (f.threads) cfg.threads = *f.threads;
    if (f.out) cfg.output_dir = *f.out;
    if (f.seed) cfg.dgp.seed = *f.seed;
    validate(cfg);
    return cfg;
}

void write_manifest(const RunConfig& cfg, const std::string& command) {
    io::json j{{"command", command}, {"seed", cfg.dgp.seed}, {"config", serialize(cfg)}};
    io::write_json(fs::path(cfg.output_dir) / "run.json", j);
}

Eigen::MatrixXd returns_matrix(const std::vector<TickDay>& days, int n) {
    Eigen::MatrixXd r(static_cast<Eigen::Index>(days.size()), n);
    for (std::size_t i = 0; i < days.size(); ++i) r.row(static_cast<Eigen::Index>(i)) = grid_returns(days[i], n).transpose();
    return r;
}

int cmd_simulate(const RunConfig& cfg) {
    const SimPanel panel = gen_panel(cfg.dgp);
    const fs::path out = cfg.output_dir;
    io::write_ticks_csv(out / "ticks.csv", panel.ticks);
    io::write_volmatrix_csv(out / "true_vol.csv", io::make_table(panel.true_vol));
    io::json params = io::to_json(cfg.dgp);
    params["daily_factor"] = panel.daily_factor;
    io::json jumps = io::json::array();
    for (std::size_t i = 0; i < panel.jump_times.size(); ++i)
        for (const auto& jmp : panel.jump_times[i]) jumps.push_back({{"day", i + 1}, {"time", jmp.time}, {"size", jmp.size}});
    params["jumps"] = jumps;
    io::write_json(out / "params.json", params);
    write_manifest(cfg, "simulate");
    std::cout << "wrote " << panel.ticks.size() << " days to " << out.string() << '\n';
    return kExitOk;
}

int cmd_spot(const RunConfig& cfg) {
    if (cfg.ticks_path.empty()) throw ConfigError("spot: pass --ticks-file or set run.ticks");
    const auto days = io::read_ticks_csv(cfg.ticks_path);
    const int n = cfg.dgp.n;
    Eigen::MatrixXd est(static_cast<Eigen::Index>(days.size()), n);
    io::json diag = io::json::array();
    for (std::size_t i = 0; i < days.size(); ++i) {
        const SpotCurve c = spot_curve(days[i], n, cfg.spot);
        for (int j = 0; j < n; ++j) est(static_cast<Eigen::Index>(i), j) = c.values[static_cast<std::size_t>(j)];
        diag.push_back(io::to_json(c, static_cast<int>(i) + 1));
    }
    const fs::path out = cfg.output_dir;
    io::write_volmatrix_csv(out / "volmatrix.csv", io::make_table(est));
    io::write_json(out / "spot_diagnostics.json", io::json{{"seed", cfg.dgp.seed}, {"days", diag}});
    write_manifest(cfg, "spot");
    std::cout << "estimated " << days.size() << " days x " << n << " points\n";
    return kExitOk;
}

int cmd_predict(const RunConfig& cfg) {
    if (cfg.volmatrix_path.empty()) throw ConfigError("predict: pass --volmatrix or set run.volmatrix");
    const io::VolTable table = io::read_volmatrix_csv(cfg.volmatrix_path);
    const Eigen::MatrixXd data = table.values.cwiseMax(cfg.spot.floor_eps);
    const int n = static_cast<int>(data.cols());

    io::json out = io::json::array();
    SipOptions sip;
    sip.ridge = cfg.ridge;
    for (double omega : cfg.omegas) {
        const VolMatrix vm(data, observed_columns_for(omega, n), table.days, table.grid);
        for (Method m : cfg.methods) {
            io::json j = io::to_json(predict(m, vm, cfg.rank, sip));
            j["omega"] = omega;
            j["n1"] = vm.n1();
            out.push_back(j);
        }
    }
    io::write_json(fs::path(cfg.output_dir) / "prediction.json", io::json{{"seed", cfg.dgp.seed}, {"predictions", out}});
    write_manifest(cfg, "predict");
    std::cout << out.dump(2) << '\n';
    return kExitOk;
}

void write_study_views(const fs::path& out, const StudyResult& res) {
    // Same cells, ordered for plotting against D and against omega.
    StudyResult by_d = res;
    std::stable_sort(by_d.cells.begin(), by_d.cells.end(), [](const StudyCell& a, const StudyCell& b) {
        if (a.method != b.method) return a.method < b.method;
        if (a.omega != b.omega) return a.omega < b.omega;
        return a.D < b.D;
    });
    io::write_study_csv(out / "mspe_vs_D.csv", by_d);
    StudyResult by_w = res;
    std::stable_sort(by_w.cells.begin(), by_w.cells.end(), [](const StudyCell& a, const StudyCell& b) {
        if (a.method != b.method) return a.method < b.method;
        if (a.D != b.D) return a.D < b.D;
        return a.omega < b.omega;
    });
    io::write_study_csv(out / "mspe_vs_omega.csv", by_w);
}

int cmd_backtest(const RunConfig& cfg, const std::string& mode) {
    const fs::path out = cfg.output_dir;
    if (mode == "study" || mode == "all") {
        const StudyConfig sc = study_config(cfg);
        const StudyResult res = run_study(sc);
        write_study_views(out, res);
        io::write_json(out / "study.json", io::to_json(res, sc));
        std::cout << "study: " << res.cells.size() << " cells over " << res.replications << " replications\n";
    }
    if (mode == "rolling" || mode == "all") {
        std::vector<TickDay> days;
        if (!cfg.ticks_path.empty()) {
            days = io::read_ticks_csv(cfg.ticks_path);
        } else {
            days = gen_panel(cfg.dgp).ticks;
        }
        const int n = cfg.dgp.n;
        BacktestData data;
        data.est_vol.resize(static_cast<Eigen::Index>(days.size()), n);
        for (std::size_t i = 0; i < days.size(); ++i) {
            const SpotCurve c = spot_curve(days[i], n, cfg.spot);
            for (int j = 0; j < n; ++j) data.est_vol(static_cast<Eigen::Index>(i), j) = c.values[static_cast<std::size_t>(j)];
        }
        data.returns = returns_matrix(days, n);

        BacktestOptions opts;
        opts.methods = cfg.methods;
        opts.omegas = cfg.omegas;
        opts.q0s = cfg.q0s;
        opts.window = cfg.window;
        opts.rank = cfg.rank;
        opts.sip.ridge = cfg.ridge;
        opts.floor_eps = cfg.spot.floor_eps;
        opts.threads = cfg.threads;
        const BacktestReport rep = run_backtest(data, opts);
        io::json j = io::to_json(rep);
        j["seed"] = cfg.dgp.seed;
        io::write_json(out / "report.json", j);
        io::write_report_table_csv(out / "report_tables.csv", rep);
        std::cout << "rolling backtest: " << rep.out_of_sample_days << " out-of-sample days\n";
    }
    if (mode != "study" && mode != "rolling" && mode != "all") throw ConfigError("--mode must be study, rolling or all");
    write_manifest(cfg, "backtest");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Intraday spot-volatility estimation and low-rank remaining-day prediction"};
    app.require_subcommand(1);

    CommonFlags sim_f, spot_f, pred_f, bt_f;
    std::string mode = "all";

    auto* sim = app.add_subcommand("simulate", "Generate a synthetic tick panel with its true spot variance");
    add_common(sim, sim_f);
    shorthand(sim, sim_f, "--days", "dgp.days", "Days to generate");
    shorthand(sim, sim_f, "--ticks", "dgp.m", "Ticks per day");
    shorthand(sim, sim_f, "--n", "dgp.n", "Intraday grid points");

    auto* spot = app.add_subcommand("spot", "Estimate spot variance on the intraday grid from a tick CSV");
    add_common(spot, spot_f);
    shorthand(spot, spot_f, "--ticks-file", "run.ticks", "Tick CSV (day,s,t,y)");
    shorthand(spot, spot_f, "--n", "dgp.n", "Intraday grid points");
    shorthand(spot, spot_f, "--theta", "spot.theta", "Window multiplier, k_m = ceil(theta*sqrt(m))");
    shorthand(spot, spot_f, "--k-m", "spot.k_m", "Fixed pre-averaging window (0 = automatic)");
    shorthand(spot, spot_f, "--bandwidth", "spot.bandwidth", "Kernel bandwidth as a day fraction (0 = 1/n)");
    shorthand(spot, spot_f, "--kernel", "spot.kernel", "symmetric or left");

    auto* pred = app.add_subcommand("predict", "Predict the remaining intraday curve of the last day");
    add_common(pred, pred_f);
    shorthand(pred, pred_f, "--volmatrix", "run.volmatrix", "Volatility matrix CSV");
    shorthand(pred, pred_f, "--omega", "predict.omegas", "Observed fraction(s), comma separated");
    shorthand(pred, pred_f, "--methods", "predict.methods", "sip,ave,ar1,pc,har_d");
    shorthand(pred, pred_f, "--rank", "predict.rank", "ratio, gap or a fixed rank");
    shorthand(pred, pred_f, "--r-max", "predict.r_max", "Largest rank considered by ratio/gap");

    auto* bt = app.add_subcommand("backtest", "Simulation study and rolling-window backtest");
    add_common(bt, bt_f);
    bt->add_option("--mode", mode, "study, rolling or all")->check(CLI::IsMember({"study", "rolling", "all"}));
    shorthand(bt, bt_f, "--ticks-file", "run.ticks", "Tick CSV for the rolling backtest");
    shorthand(bt, bt_f, "--replications", "study.replications", "Monte Carlo replications");
    shorthand(bt, bt_f, "--D", "study.D_list", "Days used for prediction, comma separated");
    shorthand(bt, bt_f, "--study-omegas", "study.omegas", "Observed fractions for the study");
    shorthand(bt, bt_f, "--omega", "predict.omegas", "Observed fractions for the rolling backtest");
    shorthand(bt, bt_f, "--methods", "predict.methods", "sip,ave,ar1,pc,har_d");
    shorthand(bt, bt_f, "--window", "backtest.window", "Rolling in-sample days");
    shorthand(bt, bt_f, "--days", "dgp.days", "Days per simulated panel");
    shorthand(bt, bt_f, "--ticks", "dgp.m", "Ticks per simulated day");
    shorthand(bt, bt_f, "--theta", "spot.theta", "Window multiplier");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (sim->parsed()) return cmd_simulate(resolve(sim_f));
        if (spot->parsed()) return cmd_spot(resolve(spot_f));
        if (pred->parsed()) return cmd_predict(resolve(pred_f));
        if (bt->parsed()) return cmd_backtest(resolve(bt_f), mode);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        switch (e.kind()) {
            case ErrorKind::Config: return kExitUsage;
            case ErrorKind::Data: return kExitData;
            case ErrorKind::Numerical: return kExitNumerical;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
