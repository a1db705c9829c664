#pragma once

#include "sipvol/lowrank.hpp"
#include "sipvol/simulate.hpp"
#include "sipvol/spot_vol.hpp"

#include <cstdint>
#include <vector>

namespace sipvol {

/// Monte Carlo study: each replication simulates one panel, estimates spot
/// variances for every day, and predicts the last day's remaining curve from
/// the trailing D days for every (D, omega, method) cell.
struct StudyConfig {
    DgpParams dgp{};
    PreAvgConfig spot{};
    std::vector<int> D_list{50, 100, 150, 200};
    std::vector<double> omegas{0.1, 0.5};
    std::vector<Method> methods{Method::Sip, Method::Ave, Method::Ar1, Method::Pc, Method::HarD};
    RankPolicy rank{RankPolicy::Kind::Fixed, 1, 10};
    SipOptions sip{};
    int replications = 500;
    int threads = 1;
};

struct StudyCell {
    Method method;
    int D;
    double omega;
    std::vector<double> mspe;  // one per replication, per-n normalisation
    int failures = 0;

    double mean() const;
    double std_error() const;
};

struct StudyResult {
    std::vector<StudyCell> cells;
    std::uint64_t seed = 0;
    int replications = 0;

    const StudyCell& cell(Method m, int D, double omega) const;
};

/// Seed of replication `rep`, derived from the master seed only.
std::uint64_t replication_seed(std::uint64_t master, int rep);

/// Spot-variance estimates for every day of a panel, D_total x n.
Eigen::MatrixXd estimate_panel(const SimPanel& panel, const PreAvgConfig& cfg);

StudyResult run_study(const StudyConfig& cfg);

}  // namespace sipvol
