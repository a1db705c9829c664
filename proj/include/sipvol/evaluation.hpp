#pragma once

#include "sipvol/lowrank.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sipvol {

enum class MspeNorm { PerN, PerN2 };

/// Sum of squared errors divided by `n_total` (PerN) or by the vector length (PerN2).
double mspe(std::span<const double> pred, std::span<const double> truth, MspeNorm norm, int n_total = 0);

/// Mean of log(pred) + proxy/pred.
double qlike(std::span<const double> pred, std::span<const double> proxy);

struct LossSeries {
    std::string method;
    std::vector<double> values;
    std::vector<std::pair<int, int>> keys;  // (day, intraday index)
};

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// Newey-West variance of the mean loss differential, Bartlett weights.
double newey_west_variance(std::span<const double> d, int lag);

/// Diebold-Mariano on d_t = a_t - b_t. Lag defaults to floor(T^(1/3)).
TestResult dm_test(const LossSeries& a, const LossSeries& b, std::optional<int> lag = std::nullopt);

struct BhResult {
    std::vector<double> adjusted;
    std::vector<bool> reject;
};

BhResult bh_adjust(std::span<const double> pvalues, double alpha = 0.05);

/// Type-7 (linear interpolation) sample quantile.
double sample_quantile(std::vector<double> xs, double q);

/// Returns standardised by sqrt(vol / n), then sample quantiles at each level.
std::vector<double> var_quantiles(std::span<const double> returns, std::span<const double> vols,
                                  std::span<const double> q0_list, int n);

/// quantile * sqrt(vol / n) for every predicted variance.
std::vector<double> var_forecast(std::span<const double> pred_vols, double quantile, int n);

struct VarSeries {
    double q0 = 0.05;
    std::vector<double> var_values;
    std::vector<double> returns;
    std::vector<int> hits;

    static VarSeries build(double q0, std::vector<double> var_values, std::vector<double> returns);
};

TestResult lruc_test(std::span<const int> hits, double q0);

struct LrccResult {
    double lr_uc = 0.0;
    double lr_ind = 0.0;
    double statistic = 0.0;
    double p_value = 1.0;
};

LrccResult lrcc_test(std::span<const int> hits, double q0);

struct DqResult {
    double statistic = 0.0;
    double p_value = 1.0;
    int dof = 0;
    bool dropped_collinear = false;
};

/// Regressors: intercept, `lags` lagged de-meaned hits (zero before the sample
/// starts) and the contemporaneous VaR.
DqResult dq_test(std::span<const int> hits, double q0, std::span<const double> var_values, int lags = 4);

// ---------------------------------------------------------------------------
// Rolling-window backtest
// ---------------------------------------------------------------------------

/// Estimated spot variances and matching grid returns, one row per day.
struct BacktestData {
    Eigen::MatrixXd est_vol;
    Eigen::MatrixXd returns;  // may be empty: no VaR section then
};

struct BacktestOptions {
    std::vector<Method> methods = all_methods();
    std::vector<double> omegas{0.1, 0.5, 0.9};
    std::vector<double> q0s{0.01, 0.02, 0.05, 0.1, 0.2};
    int window = 63;
    RankPolicy rank{};
    SipOptions sip{};
    double alpha = 0.05;
    double floor_eps = 1e-12;
    int threads = 1;
};

struct MethodScore {
    std::string method;
    double omega = 0.0;
    double mspe = 0.0;
    double qlike = 0.0;
};

struct DmEntry {
    std::string method;
    std::string baseline;
    std::string loss;  // "mspe" or "qlike"
    double omega = 0.0;
    double statistic = 0.0;
    double p_value = 1.0;
    double p_adj = 1.0;
    bool reject = false;
};

struct CoverageEntry {
    std::string method;
    double omega = 0.0;
    double q0 = 0.0;
    int observations = 0;
    int violations = 0;
    double lruc = 0.0, lruc_p = 1.0, lruc_p_adj = 1.0;
    double lrcc = 0.0, lrcc_p = 1.0, lrcc_p_adj = 1.0;
    double dq = 0.0, dq_p = 1.0, dq_p_adj = 1.0;
    int dq_dof = 0;
};

struct BacktestReport {
    int window = 0;
    int days = 0;
    int n = 0;
    int out_of_sample_days = 0;
    std::vector<std::string> methods;
    std::vector<double> omegas;
    std::vector<double> q0s;
    std::vector<MethodScore> scores;
    std::vector<DmEntry> dm;
    std::vector<CoverageEntry> coverage;
    std::vector<std::string> flags;
};

/// Day d (0-based, d >= window) is predicted from rows d-window .. d, the
/// last of which is observed only up to n1. All DM and coverage p-values form
/// one Benjamini-Hochberg family.
BacktestReport run_backtest(const BacktestData& data, const BacktestOptions& opts);

}  // namespace sipvol
