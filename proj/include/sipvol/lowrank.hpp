#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace sipvol {

/// Day x intraday matrix of spot variances. The last row is the current day,
/// of which only the first n1 columns are treated as observed.
///
///          n1     n2
///      [ S11  |  S12 ]   D-1 history days
///      [ S21  |  ??? ]   current day
class VolMatrix {
public:
    VolMatrix(Eigen::MatrixXd data, int n1);
    VolMatrix(Eigen::MatrixXd data, int n1, std::vector<int> days, std::vector<double> grid);

    const Eigen::MatrixXd& data() const { return data_; }
    int days() const { return static_cast<int>(data_.rows()); }
    int n() const { return static_cast<int>(data_.cols()); }
    int n1() const { return n1_; }
    int n2() const { return n() - n1_; }
    const std::vector<int>& day_labels() const { return days_; }
    const std::vector<double>& grid() const { return grid_; }

    auto s11() const { return data_.topLeftCorner(days() - 1, n1_); }
    auto s12() const { return data_.topRightCorner(days() - 1, n2()); }
    auto s21() const { return data_.bottomLeftCorner(1, n1_); }
    /// Previous days only, (D-1) x n.
    auto history() const { return data_.topRows(days() - 1); }
    /// Observed part of all days, D x n1.
    auto observed_columns() const { return data_.leftCols(n1_); }

    VolMatrix with_split(int n1) const { return VolMatrix(data_, n1, days_, grid_); }

private:
    Eigen::MatrixXd data_;
    int n1_;
    std::vector<int> days_;
    std::vector<double> grid_;
};

/// Observed column count for a fraction omega of an n-point day, kept in [1, n-1].
int observed_columns_for(double omega, int n);

struct SvdFactors {
    Eigen::MatrixXd U;  // rows x r
    Eigen::VectorXd S;  // decreasing
    Eigen::MatrixXd V;  // cols x r

    Eigen::MatrixXd reconstruct() const { return U * S.asDiagonal() * V.transpose(); }
};

/// Leading r singular triplets. Signs are fixed so the largest-magnitude entry
/// of each right singular vector is positive.
SvdFactors truncated_svd(const Eigen::MatrixXd& M, int r);

/// All singular values, decreasing.
Eigen::VectorXd singular_values(const Eigen::MatrixXd& M);

enum class RankMethod { Ratio, Gap };

int select_rank(const Eigen::VectorXd& singular_values, int r_max, RankMethod method);

struct Prediction {
    std::string method;
    Eigen::VectorXd values;  // length n2
    int rank_used = 0;
    std::optional<double> conditioning;
    std::vector<std::string> flags;
};

struct SipOptions {
    double ridge = 0.0;
    double max_condition = 1e12;
};

Prediction sip_predict(const VolMatrix& vm, int r, const SipOptions& opts = {});

/// Same as sip_predict but with caller-supplied bases, so tests can inject
/// sign flips or alternative decompositions.
Prediction sip_predict_with_bases(const VolMatrix& vm, const Eigen::MatrixXd& U, const Eigen::MatrixXd& V,
                                  const SipOptions& opts = {});

Prediction pc_predict(const VolMatrix& vm, int r);
Prediction ave_predict(const VolMatrix& vm);
Prediction ar1_predict(const VolMatrix& vm);

/// Daily, weekly and monthly averages of per-day mean spot variance.
struct HarRegressors {
    Eigen::VectorXd rv_daily;    // rv_daily(i) = mean of row i
    Eigen::VectorXd diurnal;     // column means of the history rows
};

HarRegressors har_regressors(const VolMatrix& vm);

/// Design matrix and response of the pooled HAR-D regression; exposed for tests.
struct HarDesign {
    Eigen::MatrixXd X;       // columns: 1, RV_d, RV_w, RV_m, diurnal_j, c_{i,n1}
    Eigen::VectorXd y;
    Eigen::MatrixXd X_pred;  // one row per target column of the current day
};

HarDesign har_d_design(const VolMatrix& vm);
Prediction har_d_predict(const VolMatrix& vm);

}  // namespace sipvol

namespace sipvol {

enum class Method { Sip, Ave, Ar1, Pc, HarD };

std::string to_string(Method m);
/// Throws ConfigError for an unknown name.
Method parse_method(const std::string& name);
const std::vector<Method>& all_methods();

/// How SIP and PC pick their rank: a fixed value, or the singular-value ratio
/// or gap rule applied to the history block.
struct RankPolicy {
    enum class Kind { Fixed, Ratio, Gap };
    Kind kind = Kind::Ratio;
    int rank = 1;
    int r_max = 10;

    bool operator==(const RankPolicy&) const = default;
};

int resolve_rank(const VolMatrix& vm, const RankPolicy& policy);

/// Runs one predictor. SIP falls back to smaller ranks when the core matrix is
/// ill-conditioned and flags the prediction when it does.
Prediction predict(Method method, const VolMatrix& vm, const RankPolicy& policy, const SipOptions& opts = {});

}  // namespace sipvol
