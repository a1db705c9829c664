#include "sipvol/errors.hpp"
#include "sipvol/spot_vol.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace sipvol;

namespace {

std::vector<double> brownian(int m, double sigma2, std::uint64_t seed, double noise_sd = 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> x(static_cast<std::size_t>(m) + 1, 0.0);
    const double step = std::sqrt(sigma2 / m);
    for (int s = 1; s <= m; ++s) x[static_cast<std::size_t>(s)] = x[static_cast<std::size_t>(s - 1)] + step * z(rng);
    if (noise_sd > 0.0)
        for (double& v : x) v += noise_sd * z(rng);
    return x;
}

// Literal double loop over the increment definition.
PreAveraged naive_preaverage(const std::vector<double>& y, int s, int k) {
    const int m = static_cast<int>(y.size()) - 1;
    double yb = 0.0, yh = 0.0;
    for (int l = 1; l <= k - 1; ++l) {
        const double g = std::min(2.0 * l / k, 1.0 - static_cast<double>(l) / k);
        yb += g * (y[static_cast<std::size_t>(s + l)] - y[static_cast<std::size_t>(s + l - 1)]);
    }
    for (int l = 1; l <= k; ++l) {
        if (s + l > m) continue;
        const double x1 = static_cast<double>(l) / k, x0 = static_cast<double>(l - 1) / k;
        const double dg = std::min(2 * x1, 1 - x1) - std::min(2 * x0, 1 - x0);
        const double d = y[static_cast<std::size_t>(s + l)] - y[static_cast<std::size_t>(s + l - 1)];
        yh += dg * dg * d * d;
    }
    return {yb, yh};
}

}  // namespace

TEST_CASE("weight function and phi") {
    CHECK(weight_g(0.25) == 0.5);
    CHECK(weight_g(0.5) == 0.5);
    CHECK(weight_g(0.0) == 0.0);
    CHECK(weight_g(1.0) == 0.0);
    CHECK(weight_g(0.25, WeightFunction::Standard) == 0.25);
    CHECK(weight_phi(2) == doctest::Approx(0.25));
    CHECK_THROWS_AS(weight_g(1.5), DataError);
    CHECK_THROWS_AS(weight_g(-0.1), DataError);
}

TEST_CASE("pre-averaging") {
    SUBCASE("k_m = 2 closed form") {
        const std::vector<double> y{0.0, 0.3, -0.1, 0.2};
        const auto pa = preaverage(y, 1, 2);
        const double d1 = -0.4, d2 = 0.3;
        CHECK(pa.ybar == doctest::Approx(0.5 * d1));
        CHECK(pa.yhat == doctest::Approx(0.25 * d1 * d1 + 0.25 * d2 * d2));
    }
    SUBCASE("constant prices") {
        const std::vector<double> y(50, 1.7);
        const auto pa = preaverage(y, 3, 10);
        CHECK(pa.ybar == 0.0);
        CHECK(pa.yhat == 0.0);
    }
    SUBCASE("random path against the double loop, every start") {
        const auto y = brownian(200, 0.5, 3, 0.01);
        const int k = 10;
        PreAvgConfig cfg;
        cfg.k_m = k;
        const auto day = preaverage_day(y, cfg);
        REQUIRE(day.ybar.size() == 191);
        for (int s = 1; s <= 191; ++s) {
            const auto want = naive_preaverage(y, s, k);
            const auto got = preaverage(y, s, k);
            CHECK(got.ybar == doctest::Approx(want.ybar).epsilon(1e-13));
            CHECK(got.yhat == doctest::Approx(want.yhat).epsilon(1e-13));
            CHECK(day.ybar[static_cast<std::size_t>(s - 1)] == doctest::Approx(want.ybar).epsilon(1e-13));
            CHECK(day.yhat[static_cast<std::size_t>(s - 1)] == doctest::Approx(want.yhat).epsilon(1e-13));
        }
    }
    SUBCASE("start index out of range") {
        const std::vector<double> y(21, 0.0);
        CHECK_THROWS_AS(preaverage(y, 0, 5), DataError);
        CHECK_THROWS_AS(preaverage(y, 17, 5), DataError);
        CHECK_NOTHROW(preaverage(y, 16, 5));
    }
}

TEST_CASE("bipower variation") {
    const double delta = 0.03;
    std::vector<double> y(101);
    for (std::size_t s = 0; s < y.size(); ++s) y[s] = delta * static_cast<double>(s);
    CHECK(bipower_variation(y) == doctest::Approx(std::numbers::pi / 2 * 99 * delta * delta));
    CHECK(bipower_variation(std::vector<double>(10, 2.0)) == 0.0);
    CHECK_THROWS_AS(bipower_variation(std::vector<double>{1.0, 2.0}), DataError);

    const auto r = brownian(500, 1.0, 9);
    double acc = 0.0;
    for (std::size_t s = 2; s < r.size(); ++s) acc += std::abs(r[s - 1] - r[s - 2]) * std::abs(r[s] - r[s - 1]);
    CHECK(bipower_variation(r) == doctest::Approx(std::numbers::pi / 2 * acc).epsilon(1e-12));
}

TEST_CASE("truncation threshold and default window") {
    const PreAvgConfig cfg;
    CHECK(cfg.trunc_const == 1.8);
    CHECK(cfg.trunc_exp == 0.47);
    CHECK(truncation_threshold(4.0, 1, 100, cfg) == doctest::Approx(0.4133353037388779).epsilon(1e-14));
    CHECK(truncation_threshold(0.0, 5, 100, cfg) == 0.0);
    CHECK(default_window(23400) == 153);
    CHECK(default_window(4) == 2);
    CHECK(default_window(400, 0.5) == 10);
    CHECK(default_window(2340, 0.3) == 15);
}

TEST_CASE("spot estimate against a literal kernel sum") {
    const int m = 2340;
    const auto y = brownian(m, 2.0, 21, 0.0005);
    PreAvgConfig cfg;
    cfg.k_m = 15;
    cfg.boundary_renormalize = false;
    const double b = 1.0 / 78;
    const double bpv = bipower_variation(y);
    const double nu = truncation_threshold(bpv, 15, m, cfg);
    const double phi = weight_phi(15);
    for (double tau : {0.1, 0.25, 0.5, 0.77}) {
        double acc = 0.0;
        int points = 0;
        for (int s = 1; s <= m - 15 + 1; ++s) {
            const double t = static_cast<double>(s - 1) / m;
            if (std::abs(t - tau) > b / 2 + 1e-12) continue;
            ++points;
            const auto pa = naive_preaverage(y, s, 15);
            if (std::abs(pa.ybar) <= nu) acc += pa.ybar * pa.ybar - 0.5 * pa.yhat;
        }
        const double want = std::max((1.0 / b) * acc / m * m / phi, cfg.floor_eps);
        CHECK(spot_estimate(y, tau, cfg, 78) == doctest::Approx(want).epsilon(1e-10));
        // Renormalised weights are 1/points instead of K_b/m.
        PreAvgConfig renorm = cfg;
        renorm.boundary_renormalize = true;
        const double want_unit = std::max(acc / points * m / phi, cfg.floor_eps);
        CHECK(spot_estimate(y, tau, renorm, 78) == doctest::Approx(want_unit).epsilon(1e-10));
    }
}

TEST_CASE("scale equivariance") {
    const auto y = brownian(2340, 1.0, 5, 0.001);
    PreAvgConfig cfg;
    cfg.theta = 0.3;
    const double alpha = 3.0;
    std::vector<double> scaled(y);
    for (double& v : scaled) v *= alpha;
    const auto a = preaverage_day(y, cfg);
    const auto b = preaverage_day(scaled, cfg);
    CHECK(b.bpv == doctest::Approx(alpha * alpha * a.bpv));
    CHECK(b.nu == doctest::Approx(alpha * a.nu));
    CHECK(b.truncated == a.truncated);
    TickDay da{y}, db{scaled};
    const auto ca = spot_curve(da, 78, cfg);
    const auto cb = spot_curve(db, 78, cfg);
    for (std::size_t j = 0; j < ca.values.size(); ++j)
        if (ca.values[j] > cfg.floor_eps) CHECK(cb.values[j] == doctest::Approx(alpha * alpha * ca.values[j]).epsilon(1e-10));
}

TEST_CASE("kernel mass is one at every grid time with renormalisation") {
    const auto y = brownian(2340, 1.0, 6);
    for (KernelShape shape : {KernelShape::UniformSymmetric, KernelShape::UniformLeft}) {
        PreAvgConfig cfg;
        cfg.kernel = shape;
        const auto pre = preaverage_day(y, cfg);
        for (int tau = 1; tau <= 78; ++tau) {
            const auto w = kernel_window(pre, tau / 78.0, 1.0 / 78, cfg);
            CHECK(w.first >= 0);
            CHECK(w.last < static_cast<int>(pre.ybar.size()));
            CHECK(w.weight * (w.last - w.first + 1) == doctest::Approx(1.0));
        }
    }
}

TEST_CASE("left kernel only looks backwards") {
    const auto y = brownian(2340, 1.0, 8);
    PreAvgConfig cfg;
    cfg.kernel = KernelShape::UniformLeft;
    cfg.k_m = 15;
    const auto pre = preaverage_day(y, cfg);
    const auto w = kernel_window(pre, 0.5, 1.0 / 78, cfg);
    CHECK(w.last == 1170);
    CHECK(w.first == 1140);
    CHECK_FALSE(w.shifted);
}

TEST_CASE("empty kernel windows") {
    const auto y = brownian(100, 1.0, 10);
    PreAvgConfig cfg;
    cfg.k_m = 4;
    SUBCASE("bandwidth below the tick spacing") {
        cfg.bandwidth = 1e-6;
        CHECK_THROWS_AS(spot_estimate(y, 0.505, cfg), EmptyWindowError);
    }
    SUBCASE("end of day without renormalisation") {
        cfg.boundary_renormalize = false;
        cfg.bandwidth = 0.02;
        CHECK_THROWS_AS(spot_estimate(y, 1.0, cfg), EmptyWindowError);
        cfg.boundary_renormalize = true;
        CHECK_NOTHROW(spot_estimate(y, 1.0, cfg));
    }
}

TEST_CASE("curve equals independent calls and has n entries") {
    const auto y = brownian(2340, 1.0, 11, 0.0005);
    PreAvgConfig cfg;
    cfg.theta = 0.3;
    const auto curve = spot_curve(TickDay{y}, 78, cfg);
    REQUIRE(curve.values.size() == 78);
    CHECK(curve.k_m == 15);
    for (int tau = 1; tau <= 78; ++tau) {
        CHECK(curve.grid[static_cast<std::size_t>(tau - 1)] == doctest::Approx(tau / 78.0));
        CHECK(curve.values[static_cast<std::size_t>(tau - 1)] == spot_estimate(y, tau / 78.0, cfg, 78));
        CHECK(curve.values[static_cast<std::size_t>(tau - 1)] >= cfg.floor_eps);
    }
}

TEST_CASE("degenerate m = n with k_m = 2") {
    const auto y = brownian(78, 1.0, 12);
    PreAvgConfig cfg;
    cfg.k_m = 2;
    const auto curve = spot_curve(TickDay{y}, 78, cfg);
    CHECK(curve.values.size() == 78);
}

TEST_CASE("noise correction centres pure-noise estimates at zero") {
    const int m = 23400;
    PreAvgConfig cfg;
    double sum = 0.0, sum_sq = 0.0, max_abs = 0.0;
    int count = 0;
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        std::vector<double> y = brownian(m, 0.0, 100 + rep, 0.0005);
        const auto pre = preaverage_day(y, cfg);
        for (int tau = 10; tau <= 70; tau += 10) {
            const double raw = estimate_at(pre, tau / 78.0, 1.0 / 78, cfg).raw;
            sum += raw;
            sum_sq += raw * raw;
            max_abs = std::max(max_abs, std::abs(raw));
            ++count;
        }
    }
    const double mean = sum / count;
    const double se = std::sqrt((sum_sq / count - mean * mean) / count);
    CHECK(std::abs(mean) < 4.0 * se);
    // Uncorrected, the noise alone would contribute m/phi * E[ybar^2] ~ 0.17;
    // keep every corrected value under ten percent of a unit variance level.
    CHECK(max_abs < 1.0);
}

TEST_CASE("a huge jump is truncated and leaves distant estimates alone") {
    const int m = 2340;
    auto y = brownian(m, 1.0, 13);
    PreAvgConfig cfg;
    cfg.theta = 0.3;
    const auto base = spot_curve(TickDay{y}, 78, cfg);
    const int at = 1200;
    for (int s = at; s <= m; ++s) y[static_cast<std::size_t>(s)] += 10.0;
    const auto pre = preaverage_day(y, cfg);
    CHECK(pre.truncated >= pre.k_m - 1);
    for (int s = at - pre.k_m + 1; s < at; ++s) CHECK(std::abs(pre.ybar[static_cast<std::size_t>(s - 1)]) > pre.nu);
    const auto jumped = spot_curve(TickDay{y}, 78, cfg);
    for (int tau = 1; tau <= 78; ++tau) {
        const double t = tau / 78.0;
        if (std::abs(t - static_cast<double>(at) / m) < 2.0 / 78) continue;
        const double a = base.values[static_cast<std::size_t>(tau - 1)];
        const double b = jumped.values[static_cast<std::size_t>(tau - 1)];
        CHECK(std::abs(b - a) <= 0.05 * std::abs(a) + 1e-12);
    }
}

TEST_CASE("config validation") {
    PreAvgConfig cfg;
    const std::vector<double> y(101, 0.0);
    SUBCASE("k_m too large") { cfg.k_m = 60; CHECK_THROWS_AS(preaverage_day(y, cfg), ConfigError); }
    SUBCASE("k_m = 1") { cfg.k_m = 1; CHECK_THROWS_AS(preaverage_day(y, cfg), ConfigError); }
    SUBCASE("bandwidth") { cfg.bandwidth = 2.0; CHECK_THROWS_AS(preaverage_day(y, cfg), ConfigError); }
    SUBCASE("exponent") { cfg.trunc_exp = 1.0; CHECK_THROWS_AS(preaverage_day(y, cfg), ConfigError); }
}
