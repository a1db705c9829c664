#include "sipvol/stats.hpp"

#include "sipvol/errors.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>

namespace sipvol {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_two_sided_p(double z) {
    double p = std::erfc(std::abs(z) / std::sqrt(2.0));
    return std::clamp(p, 0.0, 1.0);
}

double chi2_sf(double x, double dof) {
    if (!(dof > 0.0)) throw ConfigError("chi2_sf: dof must be positive");
    if (x <= 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    return std::clamp(boost::math::gamma_q(dof / 2.0, x / 2.0), 0.0, 1.0);
}

OlsFit ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double rel_tol) {
    if (X.rows() != y.size()) throw DataError("ols_fit: row count mismatch");
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();

    OlsFit fit;
    fit.kept.assign(static_cast<std::size_t>(p), false);
    fit.coef = Eigen::VectorXd::Zero(p);

    // Modified Gram-Schmidt with reorthogonalisation decides which columns stay.
    std::vector<Eigen::VectorXd> basis;
    std::vector<Eigen::Index> keep_idx;
    for (Eigen::Index j = 0; j < p; ++j) {
        Eigen::VectorXd v = X.col(j);
        const double norm0 = v.norm();
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : basis) v -= q.dot(v) * q;
        const double resid = v.norm();
        if (norm0 > 0.0 && resid > rel_tol * norm0) {
            basis.push_back(v / resid);
            keep_idx.push_back(j);
            fit.kept[static_cast<std::size_t>(j)] = true;
        } else {
            fit.dropped_any = true;
        }
    }
    fit.rank = static_cast<int>(keep_idx.size());
    if (keep_idx.empty()) {
        fit.fitted = Eigen::VectorXd::Zero(n);
        return fit;
    }

    Eigen::MatrixXd Xk(n, static_cast<Eigen::Index>(keep_idx.size()));
    for (std::size_t c = 0; c < keep_idx.size(); ++c) Xk.col(static_cast<Eigen::Index>(c)) = X.col(keep_idx[c]);
    Eigen::VectorXd beta = Xk.colPivHouseholderQr().solve(y);
    for (std::size_t c = 0; c < keep_idx.size(); ++c) fit.coef(keep_idx[c]) = beta(static_cast<Eigen::Index>(c));
    fit.fitted = Xk * beta;
    return fit;
}

}  // namespace sipvol
