#include "sipvol/spot_vol.hpp"

#include "sipvol/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace sipvol {

void PreAvgConfig::validate(int m) const {
    if (k_m != 0 && (k_m < 2 || 2 * k_m > m)) throw ConfigError("k_m must satisfy 2 <= k_m <= m/2");
    if (!(theta > 0.0)) throw ConfigError("theta must be positive");
    if (bandwidth < 0.0 || bandwidth > 1.0) throw ConfigError("bandwidth must be in (0, 1]");
    if (!(trunc_const > 0.0)) throw ConfigError("trunc_const must be positive");
    if (!(trunc_exp > 0.0 && trunc_exp < 1.0)) throw ConfigError("trunc_exp must be in (0, 1)");
    if (!(floor_eps > 0.0)) throw ConfigError("floor_eps must be positive");
}

double weight_g(double x, WeightFunction w) {
    if (!(x >= 0.0 && x <= 1.0)) throw DataError("weight_g: argument outside [0, 1]");
    const double rise = w == WeightFunction::Doubled ? 2.0 * x : x;
    return std::min(rise, 1.0 - x);
}

double weight_phi(int k_m, WeightFunction w) {
    double phi = 0.0;
    for (int i = 1; i <= k_m; ++i) {
        const double g = weight_g(static_cast<double>(i) / k_m, w);
        phi += g * g;
    }
    return phi;
}

PreAveraged preaverage(std::span<const double> prices, int s, int k_m, WeightFunction w) {
    const int m = static_cast<int>(prices.size()) - 1;
    if (k_m < 2) throw ConfigError("preaverage: k_m must be >= 2");
    if (s < 1 || s > m - k_m + 1) throw DataError("preaverage: start index out of range");

    PreAveraged out{0.0, 0.0};
    for (int l = 1; l <= k_m; ++l) {
        if (s + l > m) break;
        const double d = prices[static_cast<std::size_t>(s + l)] - prices[static_cast<std::size_t>(s + l - 1)];
        const double g = weight_g(static_cast<double>(l) / k_m, w);
        const double dg = g - weight_g(static_cast<double>(l - 1) / k_m, w);
        if (l < k_m) out.ybar += g * d;
        out.yhat += dg * dg * d * d;
    }
    return out;
}

double bipower_variation(std::span<const double> prices) {
    if (prices.size() < 3) throw DataError("bipower_variation: need at least 3 prices");
    double acc = 0.0;
    for (std::size_t s = 2; s < prices.size(); ++s)
        acc += std::abs(prices[s - 1] - prices[s - 2]) * std::abs(prices[s] - prices[s - 1]);
    return 0.5 * std::numbers::pi * acc;
}

double truncation_threshold(double bpv, int k_m, int m, const PreAvgConfig& cfg) {
    if (bpv < 0.0) throw DataError("truncation_threshold: negative BPV");
    return cfg.trunc_const * std::sqrt(bpv) * std::pow(static_cast<double>(k_m) / m, cfg.trunc_exp);
}

int default_window(int m, double theta) {
    if (m < 4) throw ConfigError("default_window: m must be >= 4");
    return std::max(2, static_cast<int>(std::ceil(theta * std::sqrt(static_cast<double>(m)) - 1e-12)));
}

PreAveragedDay preaverage_day(std::span<const double> prices, const PreAvgConfig& cfg) {
    const int m = static_cast<int>(prices.size()) - 1;
    if (m < 4) throw DataError("preaverage_day: need at least 5 prices");
    cfg.validate(m);

    PreAveragedDay pre;
    pre.m = m;
    pre.k_m = cfg.k_m != 0 ? cfg.k_m : default_window(m, cfg.theta);
    pre.k_m = std::min(pre.k_m, std::max(2, m / 2));
    const int k = pre.k_m;
    pre.phi = weight_phi(k, cfg.weight);
    pre.bpv = bipower_variation(prices);
    pre.nu = truncation_threshold(pre.bpv, k, m, cfg);

    std::vector<double> g(static_cast<std::size_t>(k) + 1);
    for (int l = 0; l <= k; ++l) g[static_cast<std::size_t>(l)] = weight_g(static_cast<double>(l) / k, cfg.weight);
    std::vector<double> dg2(static_cast<std::size_t>(k) + 1, 0.0);
    for (int l = 1; l <= k; ++l) {
        const double d = g[static_cast<std::size_t>(l)] - g[static_cast<std::size_t>(l - 1)];
        dg2[static_cast<std::size_t>(l)] = d * d;
    }
    std::vector<double> inc(static_cast<std::size_t>(m) + 1, 0.0);  // inc[j] = Y_j - Y_{j-1}
    for (int j = 1; j <= m; ++j)
        inc[static_cast<std::size_t>(j)] = prices[static_cast<std::size_t>(j)] - prices[static_cast<std::size_t>(j - 1)];

    const int count = m - k + 1;
    pre.ybar.resize(static_cast<std::size_t>(count));
    pre.yhat.resize(static_cast<std::size_t>(count));
    for (int s = 1; s <= count; ++s) {
        double yb = 0.0;
        double yh = 0.0;
        const int lmax = std::min(k, m - s);
        for (int l = 1; l <= lmax; ++l) {
            const double d = inc[static_cast<std::size_t>(s + l)];
            if (l < k) yb += g[static_cast<std::size_t>(l)] * d;
            yh += dg2[static_cast<std::size_t>(l)] * d * d;
        }
        pre.ybar[static_cast<std::size_t>(s - 1)] = yb;
        pre.yhat[static_cast<std::size_t>(s - 1)] = yh;
        if (std::abs(yb) > pre.nu) ++pre.truncated;
    }
    return pre;
}

KernelWindow kernel_window(const PreAveragedDay& pre, double tau_frac, double bandwidth, const PreAvgConfig& cfg) {
    if (!(bandwidth > 0.0)) throw ConfigError("kernel_window: bandwidth must be positive");
    const double m = pre.m;
    double lo_t = 0.0;
    double hi_t = 0.0;
    if (cfg.kernel == KernelShape::UniformSymmetric) {
        lo_t = tau_frac - 0.5 * bandwidth;
        hi_t = tau_frac + 0.5 * bandwidth;
    } else {
        lo_t = tau_frac - bandwidth;
        hi_t = tau_frac;
    }
    // Support in terms of t_{s-1} = (s-1)/m, i.e. the 0-based index into ybar.
    constexpr double fuzz = 1e-9;
    const long lo = static_cast<long>(std::ceil(lo_t * m - fuzz));
    const long hi = static_cast<long>(std::floor(hi_t * m + fuzz));
    const long full = hi - lo + 1;
    if (full <= 0) throw EmptyWindowError("bandwidth too small: no pre-averaging start inside the kernel support");

    const long admissible = static_cast<long>(pre.ybar.size());
    KernelWindow win;
    long first = std::max(lo, 0L);
    long last = std::min(hi, admissible - 1);
    if (cfg.boundary_renormalize) {
        const long width = std::min(full, admissible);
        if (first > lo || last < hi || last < first) {
            // Truncated at a day boundary: slide the support inward, same width.
            win.shifted = true;
            if (lo < 0) {
                first = 0;
                last = width - 1;
            } else {
                last = admissible - 1;
                first = last - width + 1;
            }
        }
        win.first = static_cast<int>(first);
        win.last = static_cast<int>(last);
        win.weight = 1.0 / static_cast<double>(last - first + 1);
    } else {
        if (last < first)
            throw EmptyWindowError("kernel support at tau=" + std::to_string(tau_frac) + " holds no pre-averaging start");
        win.first = static_cast<int>(first);
        win.last = static_cast<int>(last);
        win.weight = 1.0 / bandwidth / m;  // uniform K has unit height on its support
    }
    return win;
}

SpotValue estimate_at(const PreAveragedDay& pre, double tau_frac, double bandwidth, const PreAvgConfig& cfg) {
    const KernelWindow win = kernel_window(pre, tau_frac, bandwidth, cfg);
    double acc = 0.0;
    for (int i = win.first; i <= win.last; ++i) {
        const double yb = pre.ybar[static_cast<std::size_t>(i)];
        if (std::abs(yb) <= pre.nu) acc += yb * yb - 0.5 * pre.yhat[static_cast<std::size_t>(i)];
    }
    // Weights carry the 1/m grid measure; m rescales each term to a variance density.
    SpotValue out;
    out.raw = win.weight * acc * pre.m / pre.phi;
    out.floored = !(out.raw >= cfg.floor_eps);
    out.value = out.floored ? cfg.floor_eps : out.raw;
    return out;
}

double spot_estimate(std::span<const double> prices, double tau_frac, const PreAvgConfig& cfg, int n) {
    const PreAveragedDay pre = preaverage_day(prices, cfg);
    const double b = cfg.bandwidth > 0.0 ? cfg.bandwidth : 1.0 / n;
    return estimate_at(pre, tau_frac, b, cfg).value;
}

SpotCurve spot_curve(const TickDay& day, int n, const PreAvgConfig& cfg) {
    if (n < 1) throw ConfigError("spot_curve: n must be >= 1");
    const PreAveragedDay pre = preaverage_day(day.y, cfg);
    const double b = cfg.bandwidth > 0.0 ? cfg.bandwidth : 1.0 / n;

    SpotCurve curve;
    curve.values.reserve(static_cast<std::size_t>(n));
    curve.grid.reserve(static_cast<std::size_t>(n));
    curve.truncation_hits = pre.truncated;
    curve.k_m = pre.k_m;
    curve.nu = pre.nu;
    curve.bpv = pre.bpv;
    for (int tau = 1; tau <= n; ++tau) {
        const double t = static_cast<double>(tau) / n;
        const SpotValue v = estimate_at(pre, t, b, cfg);
        curve.values.push_back(v.value);
        curve.grid.push_back(t);
        if (v.raw < 0.0) ++curve.negative_count;
    }
    return curve;
}

}  // namespace sipvol
