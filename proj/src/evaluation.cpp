#include "sipvol/evaluation.hpp"

#include "sipvol/errors.hpp"
#include "sipvol/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

namespace sipvol {

double mspe(std::span<const double> pred, std::span<const double> truth, MspeNorm norm, int n_total) {
    if (pred.size() != truth.size()) throw DataError("mspe: length mismatch");
    if (pred.empty()) throw DataError("mspe: empty input");
    double sse = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - truth[i];
        sse += e * e;
    }
    if (norm == MspeNorm::PerN) {
        if (n_total < 1) throw ConfigError("mspe: per-n normalisation needs n_total >= 1");
        return sse / n_total;
    }
    return sse / static_cast<double>(pred.size());
}

double qlike(std::span<const double> pred, std::span<const double> proxy) {
    if (pred.size() != proxy.size()) throw DataError("qlike: length mismatch");
    if (pred.empty()) throw DataError("qlike: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!(pred[i] > 0.0) || !(proxy[i] > 0.0)) throw DataError("qlike: inputs must be positive");
        acc += std::log(pred[i]) + proxy[i] / pred[i];
    }
    return acc / static_cast<double>(pred.size());
}

double newey_west_variance(std::span<const double> d, int lag) {
    const std::size_t T = d.size();
    if (T == 0) throw DataError("newey_west_variance: empty series");
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(T);
    auto autocov = [&](std::size_t l) {
        double acc = 0.0;
        for (std::size_t t = l; t < T; ++t) acc += (d[t] - mean) * (d[t - l] - mean);
        return acc / static_cast<double>(T);
    };
    double var = autocov(0);
    for (int l = 1; l <= lag && static_cast<std::size_t>(l) < T; ++l)
        var += 2.0 * (1.0 - static_cast<double>(l) / (lag + 1)) * autocov(static_cast<std::size_t>(l));
    return var;
}

TestResult dm_test(const LossSeries& a, const LossSeries& b, std::optional<int> lag) {
    if (a.values.size() != b.values.size()) throw DataError("dm_test: series lengths differ");
    if (!a.keys.empty() && !b.keys.empty() && a.keys != b.keys) throw DataError("dm_test: series keys are not aligned");
    const std::size_t T = a.values.size();
    if (T < 10) throw DataError("dm_test: need at least 10 observations");

    std::vector<double> d(T);
    for (std::size_t t = 0; t < T; ++t) d[t] = a.values[t] - b.values[t];
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(T);
    const int L = lag.value_or(static_cast<int>(std::floor(std::cbrt(static_cast<double>(T)))));
    const double var = newey_west_variance(d, L);

    if (!(var > 0.0)) {
        if (mean == 0.0) return {0.0, 1.0};
        throw DegenerateTestError("dm_test: zero HAC variance with nonzero mean differential");
    }
    const double stat = mean / std::sqrt(var / static_cast<double>(T));
    return {stat, normal_two_sided_p(stat)};
}

BhResult bh_adjust(std::span<const double> pvalues, double alpha) {
    const std::size_t M = pvalues.size();
    for (double p : pvalues)
        if (!(p >= 0.0 && p <= 1.0)) throw DataError("bh_adjust: p-value outside [0, 1]");

    std::vector<std::size_t> order(M);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return pvalues[i] < pvalues[j]; });

    BhResult out;
    out.adjusted.assign(M, 1.0);
    out.reject.assign(M, false);
    double running = 1.0;
    for (std::size_t rank = M; rank >= 1; --rank) {
        const std::size_t idx = order[rank - 1];
        running = std::min(running, static_cast<double>(M) * pvalues[idx] / static_cast<double>(rank));
        out.adjusted[idx] = std::min(running, 1.0);
    }
    for (std::size_t i = 0; i < M; ++i) out.reject[i] = out.adjusted[i] <= alpha;
    return out;
}

double sample_quantile(std::vector<double> xs, double q) {
    if (xs.empty()) throw DataError("sample_quantile: empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("sample_quantile: level outside [0, 1]");
    std::sort(xs.begin(), xs.end());
    const double h = (static_cast<double>(xs.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

std::vector<double> var_quantiles(std::span<const double> returns, std::span<const double> vols,
                                  std::span<const double> q0_list, int n) {
    if (returns.size() != vols.size()) throw DataError("var_quantiles: returns and vols are not aligned");
    if (returns.empty()) throw DataError("var_quantiles: empty sample");
    std::vector<double> z(returns.size());
    for (std::size_t t = 0; t < returns.size(); ++t) {
        if (!(vols[t] > 0.0)) throw DataError("var_quantiles: vols must be positive");
        z[t] = returns[t] / std::sqrt(vols[t] / n);
    }
    std::vector<double> out;
    for (double q : q0_list) out.push_back(sample_quantile(z, q));
    return out;
}

std::vector<double> var_forecast(std::span<const double> pred_vols, double quantile, int n) {
    std::vector<double> out;
    out.reserve(pred_vols.size());
    for (double v : pred_vols) {
        if (!(v > 0.0)) throw DataError("var_forecast: predicted variance must be positive");
        out.push_back(quantile * std::sqrt(v / n));
    }
    return out;
}

VarSeries VarSeries::build(double q0, std::vector<double> var_values, std::vector<double> returns) {
    if (!(q0 > 0.0 && q0 < 1.0)) throw ConfigError("VarSeries: q0 must be in (0, 1)");
    if (var_values.size() != returns.size()) throw DataError("VarSeries: VaR and returns are not aligned");
    VarSeries v;
    v.q0 = q0;
    v.hits.resize(returns.size());
    for (std::size_t t = 0; t < returns.size(); ++t) v.hits[t] = returns[t] < var_values[t] ? 1 : 0;
    v.var_values = std::move(var_values);
    v.returns = std::move(returns);
    return v;
}

namespace {

// x ln(p) with 0 ln 0 = 0.
double xlogy(double x, double p) { return x == 0.0 ? 0.0 : x * std::log(p); }

double bernoulli_loglik(double zeros, double ones, double p) { return xlogy(zeros, 1.0 - p) + xlogy(ones, p); }

}  // namespace

TestResult lruc_test(std::span<const int> hits, double q0) {
    if (hits.empty()) throw DataError("lruc_test: empty hit sequence");
    if (!(q0 > 0.0 && q0 < 1.0)) throw ConfigError("lruc_test: q0 must be in (0, 1)");
    const double T = static_cast<double>(hits.size());
    const double x = static_cast<double>(std::count(hits.begin(), hits.end(), 1));
    const double phat = x / T;
    const double lr = std::max(0.0, -2.0 * (bernoulli_loglik(T - x, x, q0) - bernoulli_loglik(T - x, x, phat)));
    return {lr, chi2_sf(lr, 1.0)};
}

LrccResult lrcc_test(std::span<const int> hits, double q0) {
    if (hits.size() < 2) throw DataError("lrcc_test: need at least 2 observations");
    double n00 = 0, n01 = 0, n10 = 0, n11 = 0;
    for (std::size_t t = 1; t < hits.size(); ++t) {
        const int prev = hits[t - 1];
        const int cur = hits[t];
        if (prev == 0) (cur == 0 ? n00 : n01) += 1.0;
        else (cur == 0 ? n10 : n11) += 1.0;
    }
    const double pi01 = n00 + n01 > 0 ? n01 / (n00 + n01) : 0.0;
    const double pi11 = n10 + n11 > 0 ? n11 / (n10 + n11) : 0.0;
    const double pi = (n01 + n11) / (n00 + n01 + n10 + n11);

    const double ll_restricted = bernoulli_loglik(n00 + n10, n01 + n11, pi);
    const double ll_markov = bernoulli_loglik(n00, n01, pi01) + bernoulli_loglik(n10, n11, pi11);

    LrccResult r;
    r.lr_uc = lruc_test(hits, q0).statistic;
    r.lr_ind = std::max(0.0, -2.0 * (ll_restricted - ll_markov));
    r.statistic = r.lr_uc + r.lr_ind;
    r.p_value = chi2_sf(r.statistic, 2.0);
    return r;
}

DqResult dq_test(std::span<const int> hits, double q0, std::span<const double> var_values, int lags) {
    const std::size_t T = hits.size();
    if (var_values.size() != T) throw DataError("dq_test: hits and VaR are not aligned");
    if (lags < 0) throw ConfigError("dq_test: lags must be >= 0");
    if (T <= static_cast<std::size_t>(lags) + 2) throw DataError("dq_test: sample too short for the lag order");
    if (!(q0 > 0.0 && q0 < 1.0)) throw ConfigError("dq_test: q0 must be in (0, 1)");

    const auto rows = static_cast<Eigen::Index>(T);
    Eigen::VectorXd hit(rows);
    for (Eigen::Index t = 0; t < rows; ++t) hit(t) = hits[static_cast<std::size_t>(t)] - q0;

    Eigen::MatrixXd X(rows, lags + 2);
    for (Eigen::Index t = 0; t < rows; ++t) {
        X(t, 0) = 1.0;
        for (int l = 1; l <= lags; ++l) X(t, l) = t - l >= 0 ? hit(t - l) : 0.0;
        X(t, lags + 1) = var_values[static_cast<std::size_t>(t)];
    }
    const OlsFit fit = ols_fit(X, hit);

    DqResult r;
    r.dof = fit.rank;
    r.dropped_collinear = fit.dropped_any;
    r.statistic = std::max(0.0, hit.dot(fit.fitted) / (q0 * (1.0 - q0)));
    r.p_value = r.dof > 0 ? chi2_sf(r.statistic, r.dof) : 1.0;
    return r;
}

// ---------------------------------------------------------------------------

namespace {

struct DayForecast {
    Eigen::VectorXd pred;  // n2
    std::vector<std::string> flags;
};

}  // namespace

BacktestReport run_backtest(const BacktestData& data, const BacktestOptions& opts) {
    const auto& vol = data.est_vol;
    const int days = static_cast<int>(vol.rows());
    const int n = static_cast<int>(vol.cols());
    if (opts.window < 2) throw ConfigError("run_backtest: window must be >= 2");
    if (days <= opts.window) throw DataError("run_backtest: need more days than the window length");
    if (opts.methods.empty()) throw ConfigError("run_backtest: no methods selected");
    const bool with_var = data.returns.size() > 0;
    if (with_var && (data.returns.rows() != vol.rows() || data.returns.cols() != vol.cols()))
        throw DataError("run_backtest: returns and volatility matrices differ in shape");

    BacktestReport rep;
    rep.window = opts.window;
    rep.days = days;
    rep.n = n;
    rep.out_of_sample_days = days - opts.window;
    rep.omegas = opts.omegas;
    rep.q0s = with_var ? opts.q0s : std::vector<double>{};
    for (Method m : opts.methods) rep.methods.push_back(to_string(m));

    const Eigen::MatrixXd floored = vol.cwiseMax(opts.floor_eps);
    const std::size_t n_methods = opts.methods.size();
    const std::size_t n_omega = opts.omegas.size();
    const int q = rep.out_of_sample_days;

    // forecasts[(day * n_omega + w) * n_methods + k]
    std::vector<DayForecast> forecasts(static_cast<std::size_t>(q) * n_omega * n_methods);
    std::vector<std::string> errors(static_cast<std::size_t>(q));

    auto work = [&](int d) {
        const int target = opts.window + d;
        const Eigen::MatrixXd block = floored.middleRows(target - opts.window, opts.window + 1);
        for (std::size_t w = 0; w < n_omega; ++w) {
            const VolMatrix vm(block, observed_columns_for(opts.omegas[w], n));
            for (std::size_t k = 0; k < n_methods; ++k) {
                Prediction p = predict(opts.methods[k], vm, opts.rank, opts.sip);
                auto& slot = forecasts[(static_cast<std::size_t>(d) * n_omega + w) * n_methods + k];
                slot.pred = std::move(p.values);
                slot.flags = std::move(p.flags);
            }
        }
    };

    std::atomic<int> next{0};
    auto worker = [&] {
        for (int d = next++; d < q; d = next++) {
            try {
                work(d);
            } catch (const std::exception& e) {
                errors[static_cast<std::size_t>(d)] = e.what();
            }
        }
    };
    const int nthreads = std::max(1, std::min(opts.threads, q));
    std::vector<std::thread> pool;
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (int d = 0; d < q; ++d)
        if (!errors[static_cast<std::size_t>(d)].empty())
            throw NumericalError("run_backtest: day " + std::to_string(opts.window + d) + ": " +
                                 errors[static_cast<std::size_t>(d)]);

    // Losses against the estimated proxy, flattened over (day, intraday point).
    std::vector<std::size_t> dm_slots;      // indices into rep.dm
    std::vector<double> family;             // every p-value, BH-adjusted together
    struct CovSlot { std::size_t entry; int which; };
    std::vector<CovSlot> cov_slots;
    std::map<std::string, int> flag_counts;

    for (std::size_t w = 0; w < n_omega; ++w) {
        const int n1 = observed_columns_for(opts.omegas[w], n);
        const int n2 = n - n1;
        std::vector<LossSeries> sq(n_methods), ql(n_methods);
        for (std::size_t k = 0; k < n_methods; ++k) {
            sq[k].method = ql[k].method = rep.methods[k];
            for (int d = 0; d < q; ++d) {
                const int target = opts.window + d;
                const auto& f = forecasts[(static_cast<std::size_t>(d) * n_omega + w) * n_methods + k];
                for (const auto& flag : f.flags) ++flag_counts[rep.methods[k] + ":" + flag];
                for (int j = 0; j < n2; ++j) {
                    const double proxy = floored(target, n1 + j);
                    const double pred = f.pred(j);
                    const double pf = std::max(pred, opts.floor_eps);
                    sq[k].values.push_back((pred - proxy) * (pred - proxy));
                    ql[k].values.push_back(std::log(pf) + proxy / pf);
                    sq[k].keys.emplace_back(target, n1 + j);
                }
            }
            ql[k].keys = sq[k].keys;
            const double T = static_cast<double>(sq[k].values.size());
            rep.scores.push_back({rep.methods[k], opts.omegas[w],
                                  std::accumulate(sq[k].values.begin(), sq[k].values.end(), 0.0) / T,
                                  std::accumulate(ql[k].values.begin(), ql[k].values.end(), 0.0) / T});
        }

        const auto sip_it = std::find(opts.methods.begin(), opts.methods.end(), Method::Sip);
        if (sip_it != opts.methods.end()) {
            const auto base = static_cast<std::size_t>(sip_it - opts.methods.begin());
            for (std::size_t k = 0; k < n_methods; ++k) {
                if (k == base) continue;
                for (int loss = 0; loss < 2; ++loss) {
                    const auto& a = loss == 0 ? sq[k] : ql[k];
                    const auto& b = loss == 0 ? sq[base] : ql[base];
                    DmEntry e{rep.methods[k], "sip", loss == 0 ? "mspe" : "qlike", opts.omegas[w], 0.0, 1.0, 1.0, false};
                    try {
                        const TestResult t = dm_test(a, b);
                        e.statistic = t.statistic;
                        e.p_value = t.p_value;
                    } catch (const DegenerateTestError&) {
                        e.statistic = std::numeric_limits<double>::infinity();
                        e.p_value = 0.0;
                        rep.flags.push_back("dm_degenerate:" + e.method + ":" + e.loss);
                    }
                    dm_slots.push_back(rep.dm.size());
                    family.push_back(e.p_value);
                    rep.dm.push_back(e);
                }
            }
        }

        if (!with_var) continue;
        for (std::size_t k = 0; k < n_methods; ++k) {
            for (double q0 : opts.q0s) {
                std::vector<double> var_all, ret_all;
                for (int d = 0; d < q; ++d) {
                    const int target = opts.window + d;
                    // In-sample standardised returns: the window's history days.
                    const int lo = target - opts.window;
                    std::vector<double> r_in, v_in;
                    for (int i = lo; i < target; ++i)
                        for (int j = 0; j < n; ++j) {
                            r_in.push_back(data.returns(i, j));
                            v_in.push_back(floored(i, j));
                        }
                    const double quant = var_quantiles(r_in, v_in, std::span<const double>(&q0, 1), n).front();
                    const auto& f = forecasts[(static_cast<std::size_t>(d) * n_omega + w) * n_methods + k];
                    std::vector<double> pv(f.pred.data(), f.pred.data() + f.pred.size());
                    for (double& v : pv) v = std::max(v, opts.floor_eps);
                    const auto vf = var_forecast(pv, quant, n);
                    var_all.insert(var_all.end(), vf.begin(), vf.end());
                    for (int j = 0; j < n2; ++j) ret_all.push_back(data.returns(target, n1 + j));
                }
                const VarSeries vs = VarSeries::build(q0, std::move(var_all), std::move(ret_all));
                CoverageEntry c;
                c.method = rep.methods[k];
                c.omega = opts.omegas[w];
                c.q0 = q0;
                c.observations = static_cast<int>(vs.hits.size());
                c.violations = static_cast<int>(std::count(vs.hits.begin(), vs.hits.end(), 1));
                const TestResult uc = lruc_test(vs.hits, q0);
                const LrccResult cc = lrcc_test(vs.hits, q0);
                const DqResult dq = dq_test(vs.hits, q0, vs.var_values, 4);
                c.lruc = uc.statistic;
                c.lruc_p = uc.p_value;
                c.lrcc = cc.statistic;
                c.lrcc_p = cc.p_value;
                c.dq = dq.statistic;
                c.dq_p = dq.p_value;
                c.dq_dof = dq.dof;
                const std::size_t idx = rep.coverage.size();
                rep.coverage.push_back(c);
                for (int which = 0; which < 3; ++which) {
                    cov_slots.push_back({idx, which});
                    family.push_back(which == 0 ? c.lruc_p : which == 1 ? c.lrcc_p : c.dq_p);
                }
            }
        }
    }

    for (const auto& [flag, count] : flag_counts) rep.flags.push_back(flag + " x" + std::to_string(count));

    if (!family.empty()) {
        const BhResult bh = bh_adjust(family, opts.alpha);
        std::size_t pos = 0;
        for (std::size_t slot : dm_slots) {
            rep.dm[slot].p_adj = bh.adjusted[pos];
            rep.dm[slot].reject = bh.reject[pos];
            ++pos;
        }
        for (const auto& cs : cov_slots) {
            auto& c = rep.coverage[cs.entry];
            (cs.which == 0 ? c.lruc_p_adj : cs.which == 1 ? c.lrcc_p_adj : c.dq_p_adj) = bh.adjusted[pos];
            ++pos;
        }
    }
    return rep;
}

}  // namespace sipvol
