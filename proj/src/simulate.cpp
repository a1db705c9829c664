#include "sipvol/simulate.hpp"

#include "sipvol/errors.hpp"

#include <cmath>
#include <deque>
#include <numeric>
#include <string>

namespace sipvol {

void DgpParams::validate() const {
    if (n < 2) throw ConfigError("n must be >= 2");
    if (m < n) throw ConfigError("m must be >= n");
    if (D_total < 1) throw ConfigError("D_total must be >= 1");
    if (noise_sd < 0 || jump_sd < 0 || eps_scale_sd < 0) throw ConfigError("standard deviations must be >= 0");
    if (jump_intensity < 0) throw ConfigError("jump_intensity must be >= 0");
    if (burn_in < 22) throw ConfigError("burn_in must be >= 22");
    if (positivity_retries < 1) throw ConfigError("positivity_retries must be >= 1");
    if (b1 + b2 + b3 >= 1.0) throw NonstationaryHarError("HAR coefficients b1+b2+b3 must be < 1");
}

double diurnal_shape(const DgpParams& p, double t) {
    const double d = t - 0.6;
    return p.gamma0 + p.gamma1 * d * d;
}

double eps_scale_sq(double t) {
    const double d = 2.0 * t - 1.0;
    return 0.1 + 0.5 * d * d;
}

Rng make_stream(std::uint64_t master_seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

std::vector<double> har_recursion(const DgpParams& params, std::span<const double> shocks) {
    params.validate();
    const int total = params.burn_in + params.D_total;
    if (static_cast<int>(shocks.size()) != total) throw ConfigError("har_recursion: need burn_in + D_total shocks");
    const double uncond = params.b0 / (1.0 - params.b1 - params.b2 - params.b3);
    std::deque<double> hist(22, uncond);  // front = most recent

    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(params.D_total));
    for (int i = 0; i < total; ++i) {
        const double weekly = std::accumulate(hist.begin(), hist.begin() + 5, 0.0) / 5.0;
        const double monthly = std::accumulate(hist.begin(), hist.end(), 0.0) / 22.0;
        const double next = params.b0 + params.b1 * hist.front() + params.b2 * weekly + params.b3 * monthly +
                            shocks[static_cast<std::size_t>(i)];
        hist.pop_back();
        hist.push_front(next);
        if (i >= params.burn_in) out.push_back(next);
    }
    return out;
}

std::vector<double> gen_har_factor(const DgpParams& params, Rng& rng) {
    params.validate();
    std::normal_distribution<double> zeta(0.0, 1.0);
    std::vector<double> shocks(static_cast<std::size_t>(params.burn_in + params.D_total));
    for (double& z : shocks) z = zeta(rng);
    return har_recursion(params, shocks);
}

int grid_tick(int j, int m, int n) {
    return static_cast<int>(std::llround(static_cast<double>(j) * m / n));
}

std::vector<double> gen_spot_vol_day(double sigma_tilde, const DgpParams& params, Rng& rng) {
    const int m = params.m;
    const double s2 = sigma_tilde * sigma_tilde;
    std::normal_distribution<double> xi(0.0, params.eps_scale_sd);

    std::vector<double> path(static_cast<std::size_t>(m) + 1);
    for (int s = 0; s <= m; ++s) {
        const double t = static_cast<double>(s) / m;
        const double base = s2 * diurnal_shape(params, t);
        const double q = std::sqrt(eps_scale_sq(t));
        double v = base + q * xi(rng);
        int tries = 0;
        while (!(v > 0.0)) {
            if (++tries > params.positivity_retries)
                throw PositivityFailure("spot variance stayed non-positive after " +
                                        std::to_string(params.positivity_retries) + " redraws at t=" +
                                        std::to_string(t));
            v = base + q * xi(rng);
        }
        path[static_cast<std::size_t>(s)] = v;
    }
    return path;
}

SimulatedDay gen_tick_day(const std::vector<double>& vol_path, const DgpParams& params, Rng& rng, double x0) {
    const int m = params.m;
    if (static_cast<int>(vol_path.size()) != m + 1) throw DataError("vol_path must have m+1 points");

    const double dt = 1.0 / m;
    const double sqdt = std::sqrt(dt);
    std::normal_distribution<double> z(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, params.noise_sd);
    std::normal_distribution<double> jump_size(params.jump_mean, params.jump_sd);
    std::poisson_distribution<int> jump_count(params.jump_intensity * dt);

    SimulatedDay day;
    day.latent.resize(static_cast<std::size_t>(m) + 1);
    day.ticks.y.resize(static_cast<std::size_t>(m) + 1);
    day.latent[0] = x0;
    for (int s = 1; s <= m; ++s) {
        const double v = vol_path[static_cast<std::size_t>(s - 1)];
        double x = day.latent[static_cast<std::size_t>(s - 1)] + (params.mu - 0.5 * v) * dt + std::sqrt(v) * sqdt * z(rng);
        if (params.jump_intensity > 0.0) {
            const int k = jump_count(rng);
            for (int j = 0; j < k; ++j) {
                const double size = jump_size(rng);
                x += size;
                day.jumps.push_back({static_cast<double>(s) / m, size});
            }
        }
        day.latent[static_cast<std::size_t>(s)] = x;
    }
    for (int s = 0; s <= m; ++s) {
        const double e = params.noise_sd > 0.0 ? noise(rng) : 0.0;
        day.ticks.y[static_cast<std::size_t>(s)] = day.latent[static_cast<std::size_t>(s)] + e;
    }
    return day;
}

SimPanel gen_panel(const DgpParams& params) {
    params.validate();
    Rng rng = make_stream(params.seed, 0);

    SimPanel panel;
    panel.params = params;
    panel.daily_factor = gen_har_factor(params, rng);
    panel.true_vol.resize(params.D_total, params.n);
    panel.ticks.reserve(static_cast<std::size_t>(params.D_total));
    panel.jump_times.reserve(static_cast<std::size_t>(params.D_total));

    double x0 = 1.0;
    for (int i = 0; i < params.D_total; ++i) {
        const auto path = gen_spot_vol_day(panel.daily_factor[static_cast<std::size_t>(i)], params, rng);
        for (int j = 1; j <= params.n; ++j)
            panel.true_vol(i, j - 1) = path[static_cast<std::size_t>(grid_tick(j, params.m, params.n))];
        auto day = gen_tick_day(path, params, rng, x0);
        x0 = day.latent.back();
        panel.ticks.push_back(std::move(day.ticks));
        panel.jump_times.push_back(std::move(day.jumps));
    }
    return panel;
}

Eigen::VectorXd grid_returns(const TickDay& day, int n) {
    const int m = day.m();
    if (m < n) throw DataError("day has fewer ticks than grid points");
    Eigen::VectorXd r(n);
    int prev = 0;
    for (int j = 1; j <= n; ++j) {
        const int s = grid_tick(j, m, n);
        r(j - 1) = day.y[static_cast<std::size_t>(s)] - day.y[static_cast<std::size_t>(prev)];
        prev = s;
    }
    return r;
}

}  // namespace sipvol
