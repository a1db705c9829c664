#pragma once

#include <Eigen/Dense>

#include <vector>

namespace sipvol {

double normal_cdf(double x);

/// Two-sided p-value of a standard normal statistic.
double normal_two_sided_p(double z);

/// Upper tail P(X > x) of a chi-square with `dof` degrees of freedom.
double chi2_sf(double x, double dof);

/// Least squares with greedy removal of collinear regressors.
///
/// Columns are visited left to right; a column is kept only if it is not
/// (numerically) in the span of the columns kept before it. Dropped columns
/// get a zero coefficient.
struct OlsFit {
    Eigen::VectorXd coef;
    std::vector<bool> kept;
    int rank = 0;
    Eigen::VectorXd fitted;
    bool dropped_any = false;
};

OlsFit ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double rel_tol = 1e-9);

}  // namespace sipvol
