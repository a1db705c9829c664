#include "sipvol/experiment.hpp"

#include "sipvol/errors.hpp"
#include "sipvol/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>

namespace sipvol {

double StudyCell::mean() const {
    if (mspe.empty()) return std::nan("");
    return std::accumulate(mspe.begin(), mspe.end(), 0.0) / static_cast<double>(mspe.size());
}

double StudyCell::std_error() const {
    if (mspe.size() < 2) return std::nan("");
    const double mu = mean();
    double ss = 0.0;
    for (double v : mspe) ss += (v - mu) * (v - mu);
    return std::sqrt(ss / static_cast<double>(mspe.size() - 1) / static_cast<double>(mspe.size()));
}

const StudyCell& StudyResult::cell(Method m, int D, double omega) const {
    for (const auto& c : cells)
        if (c.method == m && c.D == D && std::abs(c.omega - omega) < 1e-12) return c;
    throw ConfigError("study has no cell for " + to_string(m) + " D=" + std::to_string(D));
}

std::uint64_t replication_seed(std::uint64_t master, int rep) {
    Rng rng = make_stream(master, static_cast<std::uint64_t>(rep) + 1);
    return rng();
}

Eigen::MatrixXd estimate_panel(const SimPanel& panel, const PreAvgConfig& cfg) {
    const int n = panel.params.n;
    Eigen::MatrixXd est(static_cast<Eigen::Index>(panel.ticks.size()), n);
    for (std::size_t i = 0; i < panel.ticks.size(); ++i) {
        const SpotCurve c = spot_curve(panel.ticks[i], n, cfg);
        for (int j = 0; j < n; ++j) est(static_cast<Eigen::Index>(i), j) = c.values[static_cast<std::size_t>(j)];
    }
    return est;
}

StudyResult run_study(const StudyConfig& cfg) {
    cfg.dgp.validate();
    if (cfg.replications < 1) throw ConfigError("replications must be >= 1");
    for (int D : cfg.D_list)
        if (D < 2 || D > cfg.dgp.D_total) throw ConfigError("every D must lie in [2, D_total]");

    const int n = cfg.dgp.n;
    const std::size_t n_cells = cfg.D_list.size() * cfg.omegas.size() * cfg.methods.size();
    // values[rep][cell]; NaN marks a failed prediction.
    std::vector<std::vector<double>> values(static_cast<std::size_t>(cfg.replications),
                                            std::vector<double>(n_cells, std::nan("")));
    std::vector<std::string> fatal(static_cast<std::size_t>(cfg.replications));

    auto run_rep = [&](int rep) {
        DgpParams p = cfg.dgp;
        p.seed = replication_seed(cfg.dgp.seed, rep);
        const SimPanel panel = gen_panel(p);
        const Eigen::MatrixXd est = estimate_panel(panel, cfg.spot).cwiseMax(cfg.spot.floor_eps);
        const int last = p.D_total - 1;
        std::size_t cell = 0;
        for (int D : cfg.D_list) {
            const Eigen::MatrixXd block = est.bottomRows(D);
            for (double omega : cfg.omegas) {
                const int n1 = observed_columns_for(omega, n);
                const VolMatrix vm(block, n1);
                const Eigen::VectorXd truth = panel.true_vol.row(last).tail(n - n1).transpose();
                for (Method m : cfg.methods) {
                    try {
                        const Prediction pr = predict(m, vm, cfg.rank, cfg.sip);
                        values[static_cast<std::size_t>(rep)][cell] =
                            mspe(std::span<const double>(pr.values.data(), static_cast<std::size_t>(pr.values.size())),
                                 std::span<const double>(truth.data(), static_cast<std::size_t>(truth.size())),
                                 MspeNorm::PerN, n);
                    } catch (const NumericalError&) {
                    } catch (const DataError&) {
                    }
                    ++cell;
                }
            }
        }
    };

    std::atomic<int> next{0};
    auto worker = [&] {
        for (int rep = next++; rep < cfg.replications; rep = next++) {
            try {
                run_rep(rep);
            } catch (const std::exception& e) {
                fatal[static_cast<std::size_t>(rep)] = e.what();
            }
        }
    };
    const int nthreads = std::max(1, std::min(cfg.threads, cfg.replications));
    std::vector<std::thread> pool;
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (int rep = 0; rep < cfg.replications; ++rep)
        if (!fatal[static_cast<std::size_t>(rep)].empty())
            throw NumericalError("replication " + std::to_string(rep) + ": " + fatal[static_cast<std::size_t>(rep)]);

    StudyResult out;
    out.seed = cfg.dgp.seed;
    out.replications = cfg.replications;
    std::size_t cell = 0;
    for (int D : cfg.D_list)
        for (double omega : cfg.omegas)
            for (Method m : cfg.methods) {
                StudyCell c{m, D, omega, {}, 0};
                for (const auto& rep : values) {
                    const double v = rep[cell];
                    if (std::isnan(v)) ++c.failures;
                    else c.mspe.push_back(v);
                }
                out.cells.push_back(std::move(c));
                ++cell;
            }
    return out;
}

}  // namespace sipvol
