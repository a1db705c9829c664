#pragma once

#include "sipvol/simulate.hpp"

#include <span>
#include <vector>

namespace sipvol {

enum class KernelShape { UniformSymmetric, UniformLeft };

/// Pre-averaging weight: `Doubled` is min(2x, 1-x), `Standard` is min(x, 1-x).
enum class WeightFunction { Doubled, Standard };

/// Tuning of the jump-robust pre-averaging spot estimator.
///
/// `k_m == 0` picks the window from default_window(m, theta) and
/// `bandwidth == 0` uses 1/n, both resolved per call.
struct PreAvgConfig {
    int k_m = 0;
    double theta = 1.0;
    double bandwidth = 0.0;
    KernelShape kernel = KernelShape::UniformSymmetric;
    WeightFunction weight = WeightFunction::Doubled;
    double trunc_const = 1.8;
    double trunc_exp = 0.47;
    bool boundary_renormalize = true;
    double floor_eps = 1e-12;

    void validate(int m) const;
    bool operator==(const PreAvgConfig&) const = default;
};

double weight_g(double x, WeightFunction w = WeightFunction::Doubled);

/// phi_k(g) = sum_{i=1}^{k} g(i/k)^2.
double weight_phi(int k_m, WeightFunction w = WeightFunction::Doubled);

struct PreAveraged {
    double ybar;
    double yhat;
};

/// Pre-averaged return and its noise-correction term at start index s (1-based,
/// 1 <= s <= m - k_m + 1). The last increment of yhat is dropped when it would
/// run past the end of the day.
PreAveraged preaverage(std::span<const double> prices, int s, int k_m,
                       WeightFunction w = WeightFunction::Doubled);

/// (pi/2) sum_{s=2}^{m} |dY_{s-1}| |dY_s|.
double bipower_variation(std::span<const double> prices);

/// trunc_const * sqrt(BPV) * (k_m/m)^trunc_exp.
double truncation_threshold(double bpv, int k_m, int m, const PreAvgConfig& cfg);

/// max(2, ceil(theta * sqrt(m))).
int default_window(int m, double theta = 1.0);

/// Every pre-averaged quantity of one day, computed once and reused for all tau.
struct PreAveragedDay {
    int m = 0;
    int k_m = 0;
    double phi = 0.0;
    double bpv = 0.0;
    double nu = 0.0;
    std::vector<double> ybar;  // index s-1
    std::vector<double> yhat;
    int truncated = 0;  // count of |ybar| > nu
};

PreAveragedDay preaverage_day(std::span<const double> prices, const PreAvgConfig& cfg);

struct KernelWindow {
    int first = 0;  // 0-based index into PreAveragedDay::ybar
    int last = -1;  // inclusive
    double weight = 0.0;  // per-term weight, K_b(.)/m or 1/count when renormalised
    bool shifted = false;
};

/// Kernel support at time tau_frac over the admissible pre-averaging starts.
KernelWindow kernel_window(const PreAveragedDay& pre, double tau_frac, double bandwidth, const PreAvgConfig& cfg);

struct SpotValue {
    double value = 0.0;
    double raw = 0.0;  // before flooring
    bool floored = false;
};

SpotValue estimate_at(const PreAveragedDay& pre, double tau_frac, double bandwidth, const PreAvgConfig& cfg);

/// Spot variance at tau_frac from a single day of log prices. `n` only feeds
/// the default bandwidth 1/n.
double spot_estimate(std::span<const double> prices, double tau_frac, const PreAvgConfig& cfg, int n = 78);

struct SpotCurve {
    std::vector<double> values;
    std::vector<double> grid;
    int truncation_hits = 0;
    int negative_count = 0;
    int k_m = 0;
    double nu = 0.0;
    double bpv = 0.0;
};

SpotCurve spot_curve(const TickDay& day, int n, const PreAvgConfig& cfg);

}  // namespace sipvol
