#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace sipvol {

/// Parameters of the synthetic intraday data-generating process.
///
/// One trading day is the unit interval; all variances are in daily units.
/// Defaults are the simulation-study values.
struct DgpParams {
    double mu = 0.05 / 252.0;
    double gamma0 = 0.04 / 252.0;
    double gamma1 = 0.5 / 252.0;
    double b0 = 0.5;
    double b1 = 0.372;
    double b2 = 0.343;
    double b3 = 0.224;
    double noise_sd = 0.0005;
    double jump_mean = -0.01;
    double jump_sd = 0.02;
    double jump_intensity = 36.0 / 252.0;  // expected jumps per day
    double eps_scale_sd = 0.01;            // sd of xi in eps = q(t) * xi
    int m = 23400;                         // ticks per day
    int n = 78;                            // intraday grid points
    int D_total = 200;
    std::uint64_t seed = 20240601;
    int burn_in = 500;
    int positivity_retries = 10000;

    /// Throws ConfigError on an invalid combination.
    void validate() const;
    bool operator==(const DgpParams&) const = default;
};

/// Diurnal shape h(t) = gamma0 + gamma1 (t - 0.6)^2.
double diurnal_shape(const DgpParams& p, double t);

/// Squared scale of the spot-variance perturbation, q(t)^2 = 0.1 + 0.5 (2t - 1)^2.
double eps_scale_sq(double t);

/// Noisy log prices of one day on the regular grid t_s = s/m, s = 0..m.
struct TickDay {
    std::vector<double> y;

    int m() const { return static_cast<int>(y.size()) - 1; }
};

struct Jump {
    double time;
    double size;
};

struct SimulatedDay {
    TickDay ticks;
    std::vector<double> latent;  // efficient log price X
    std::vector<Jump> jumps;
};

struct SimPanel {
    DgpParams params;
    std::vector<TickDay> ticks;
    Eigen::MatrixXd true_vol;  // D_total x n, diffusive spot variance at t_j = j/n
    std::vector<double> daily_factor;
    std::vector<std::vector<Jump>> jump_times;
};

using Rng = std::mt19937_64;

/// RNG for replication `index` under `master_seed`; streams are independent of
/// how replications are scheduled across threads.
Rng make_stream(std::uint64_t master_seed, std::uint64_t index);

/// Deterministic HAR recursion driven by `shocks` (length burn_in + D_total);
/// returns the last D_total values.
std::vector<double> har_recursion(const DgpParams& params, std::span<const double> shocks);

/// HAR recursion for the daily factor, started at its unconditional mean and
/// burned in for params.burn_in days.
std::vector<double> gen_har_factor(const DgpParams& params, Rng& rng);

/// Tick index of intraday grid point j (1..n).
int grid_tick(int j, int m, int n);

/// Spot-variance path sigma^2 at t_s = s/m, s = 0..m. Any non-positive point
/// has its perturbation redrawn until positive (at most positivity_retries times).
std::vector<double> gen_spot_vol_day(double sigma_tilde, const DgpParams& params, Rng& rng);

/// Euler scheme for the jump diffusion with Gaussian observation noise.
SimulatedDay gen_tick_day(const std::vector<double>& vol_path, const DgpParams& params, Rng& rng,
                          double x0 = 1.0);

SimPanel gen_panel(const DgpParams& params);

/// Five-minute style returns Y(t_j) - Y(t_{j-1}), j = 1..n.
Eigen::VectorXd grid_returns(const TickDay& day, int n);

}  // namespace sipvol
