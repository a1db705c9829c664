#include "sipvol/lowrank.hpp"

#include "sipvol/errors.hpp"
#include "sipvol/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace sipvol {

VolMatrix::VolMatrix(Eigen::MatrixXd data, int n1) : VolMatrix(std::move(data), n1, {}, {}) {}

VolMatrix::VolMatrix(Eigen::MatrixXd data, int n1, std::vector<int> days, std::vector<double> grid)
    : data_(std::move(data)), n1_(n1), days_(std::move(days)), grid_(std::move(grid)) {
    if (data_.rows() < 2) throw DataError("VolMatrix needs at least 2 days");
    if (n1_ < 1 || n1_ >= data_.cols()) throw ConfigError("VolMatrix: need 1 <= n1 < n");
    if (!data_.allFinite()) throw DataError("VolMatrix has non-finite entries");
    if ((data_.array() <= 0.0).any()) throw DataError("VolMatrix entries must be positive");
    if (days_.empty()) {
        days_.resize(static_cast<std::size_t>(data_.rows()));
        std::iota(days_.begin(), days_.end(), 1);
    }
    if (grid_.empty()) {
        for (Eigen::Index j = 1; j <= data_.cols(); ++j) grid_.push_back(static_cast<double>(j) / data_.cols());
    }
    if (days_.size() != static_cast<std::size_t>(data_.rows()) || grid_.size() != static_cast<std::size_t>(data_.cols()))
        throw DataError("VolMatrix label sizes do not match data");
}

int observed_columns_for(double omega, int n) {
    if (!(omega > 0.0 && omega < 1.0)) throw ConfigError("omega must be in (0, 1)");
    const int n1 = static_cast<int>(std::lround(omega * n));
    return std::clamp(n1, 1, n - 1);
}

namespace {

Eigen::BDCSVD<Eigen::MatrixXd> full_svd(const Eigen::MatrixXd& M) {
    return Eigen::BDCSVD<Eigen::MatrixXd>(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

}  // namespace

SvdFactors truncated_svd(const Eigen::MatrixXd& M, int r) {
    const int maxr = static_cast<int>(std::min(M.rows(), M.cols()));
    if (r < 1 || r > maxr) throw ConfigError("truncated_svd: rank " + std::to_string(r) + " out of range");
    if (!M.allFinite()) throw DataError("truncated_svd: non-finite entries");

    const auto svd = full_svd(M);
    SvdFactors f{svd.matrixU().leftCols(r), svd.singularValues().head(r), svd.matrixV().leftCols(r)};
    for (int k = 0; k < r; ++k) {
        Eigen::Index idx = 0;
        f.V.col(k).cwiseAbs().maxCoeff(&idx);
        if (f.V(idx, k) < 0.0) {
            f.V.col(k) *= -1.0;
            f.U.col(k) *= -1.0;
        }
    }
    return f;
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& M) {
    if (!M.allFinite()) throw DataError("singular_values: non-finite entries");
    return Eigen::BDCSVD<Eigen::MatrixXd>(M).singularValues();
}

int select_rank(const Eigen::VectorXd& sv, int r_max, RankMethod method) {
    if (r_max < 1 || r_max >= sv.size()) throw ConfigError("select_rank: need 1 <= r_max < number of singular values");
    if ((sv.array() < 0.0).any()) throw DataError("select_rank: negative singular value");
    int best = 1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int k = 1; k <= r_max; ++k) {
        const double hi = sv(k - 1);
        const double lo = sv(k);
        double score = 0.0;
        if (method == RankMethod::Ratio) {
            if (lo == 0.0) return k;
            score = hi / lo;
        } else {
            score = hi - lo;
        }
        if (score > best_score) {
            best_score = score;
            best = k;
        }
    }
    return best;
}

Prediction sip_predict_with_bases(const VolMatrix& vm, const Eigen::MatrixXd& U, const Eigen::MatrixXd& V,
                                  const SipOptions& opts) {
    const Eigen::Index r = U.cols();
    if (V.cols() != r) throw ConfigError("sip_predict: U and V rank differ");
    if (U.rows() != vm.days() - 1 || V.rows() != vm.n1()) throw ConfigError("sip_predict: basis dimensions do not match");

    Eigen::MatrixXd core = U.transpose() * vm.s11() * V;
    if (opts.ridge > 0.0) core += opts.ridge * Eigen::MatrixXd::Identity(r, r);
    const Eigen::VectorXd csv = Eigen::JacobiSVD<Eigen::MatrixXd>(core).singularValues();
    const double cond = csv(r - 1) > 0.0 ? csv(0) / csv(r - 1) : std::numeric_limits<double>::infinity();
    if (!(cond <= opts.max_condition))
        throw IllConditionedError("sip_predict: core matrix condition number " + std::to_string(cond) + " exceeds limit",
                                  cond);

    const Eigen::RowVectorXd left = vm.s21() * V;            // 1 x r
    const Eigen::MatrixXd right = U.transpose() * vm.s12();  // r x n2
    const Eigen::MatrixXd solved = core.partialPivLu().solve(right);

    Prediction p;
    p.method = "sip";
    p.values = (left * solved).transpose();
    p.rank_used = static_cast<int>(r);
    p.conditioning = cond;
    if (opts.ridge > 0.0) p.flags.push_back("ridge");
    return p;
}

Prediction sip_predict(const VolMatrix& vm, int r, const SipOptions& opts) {
    if (r < 1 || r > std::min(vm.days() - 1, vm.n1()))
        throw ConfigError("sip_predict: rank must satisfy 1 <= r <= min(D-1, n1)");
    // U from the (D-1) x n history block, V from the D x n1 observed block.
    const SvdFactors row_block = truncated_svd(vm.history(), r);
    const SvdFactors col_block = truncated_svd(vm.observed_columns(), r);
    return sip_predict_with_bases(vm, row_block.U, col_block.V, opts);
}

Prediction pc_predict(const VolMatrix& vm, int r) {
    const Eigen::MatrixXd hist = vm.history();
    if (r < 1 || r > std::min(hist.rows(), hist.cols())) throw ConfigError("pc_predict: rank out of range");
    const SvdFactors f = truncated_svd(hist, r);
    const Eigen::RowVectorXd last = f.U.bottomRows(1) * f.S.asDiagonal() * f.V.transpose();

    Prediction p;
    p.method = "pc";
    p.values = last.tail(vm.n2()).transpose();
    p.rank_used = r;
    return p;
}

Prediction ave_predict(const VolMatrix& vm) {
    Prediction p;
    p.method = "ave";
    p.values = vm.s12().colwise().mean().transpose();
    return p;
}

Prediction ar1_predict(const VolMatrix& vm) {
    const int hist = vm.days() - 1;
    if (hist < 2) throw DataError("ar1_predict: need at least 3 days");
    const auto s12 = vm.s12();

    Prediction p;
    p.method = "ar1";
    p.values.resize(vm.n2());
    int fallbacks = 0;
    for (int j = 0; j < vm.n2(); ++j) {
        const Eigen::VectorXd col = s12.col(j);
        const Eigen::VectorXd lagged = col.head(hist - 1);
        const Eigen::VectorXd resp = col.tail(hist - 1);
        const double mean_lag = lagged.mean();
        const double sxx = (lagged.array() - mean_lag).square().sum();
        if (!(sxx > 1e-14 * std::max(1.0, lagged.squaredNorm()))) {
            p.values(j) = col.mean();
            ++fallbacks;
            continue;
        }
        const double mean_resp = resp.mean();
        const double sxy = ((lagged.array() - mean_lag) * (resp.array() - mean_resp)).sum();
        const double beta = sxy / sxx;
        const double alpha = mean_resp - beta * mean_lag;
        p.values(j) = alpha + beta * col(hist - 1);
    }
    if (fallbacks > 0) p.flags.push_back("column_mean_fallback:" + std::to_string(fallbacks));
    return p;
}

HarRegressors har_regressors(const VolMatrix& vm) {
    HarRegressors h;
    h.rv_daily = vm.data().rowwise().mean();
    h.diurnal = vm.history().colwise().mean().transpose();
    return h;
}

namespace {

double trailing_mean(const Eigen::VectorXd& v, int end_exclusive, int len) {
    return v.segment(end_exclusive - len, len).mean();
}

}  // namespace

HarDesign har_d_design(const VolMatrix& vm) {
    const int D = vm.days();
    if (D < 24) throw DataError("har_d_predict: need at least 24 days (22-day monthly lag plus one training day)");
    const HarRegressors h = har_regressors(vm);
    const int n1 = vm.n1();
    const int n2 = vm.n2();
    const auto& c = vm.data();

    auto fill_row = [&](auto row, int day, int col) {  // row is a writable block
        row(0) = 1.0;
        row(1) = h.rv_daily(day - 1);
        row(2) = trailing_mean(h.rv_daily, day, 5);
        row(3) = trailing_mean(h.rv_daily, day, 22);
        row(4) = h.diurnal(col);
        row(5) = c(day, n1 - 1);
    };

    const int train_days = D - 1 - 22;
    HarDesign d;
    d.X.resize(static_cast<Eigen::Index>(train_days) * n2, 6);
    d.y.resize(static_cast<Eigen::Index>(train_days) * n2);
    Eigen::Index row = 0;
    for (int day = 22; day < D - 1; ++day) {
        for (int j = 0; j < n2; ++j, ++row) {
            fill_row(d.X.row(row), day, n1 + j);
            d.y(row) = c(day, n1 + j);
        }
    }
    d.X_pred.resize(n2, 6);
    for (int j = 0; j < n2; ++j) fill_row(d.X_pred.row(j), D - 1, n1 + j);
    return d;
}

Prediction har_d_predict(const VolMatrix& vm) {
    const HarDesign d = har_d_design(vm);
    const OlsFit fit = ols_fit(d.X, d.y);

    Prediction p;
    p.method = "har_d";
    p.values = d.X_pred * fit.coef;
    if (fit.dropped_any) p.flags.push_back("collinear_regressors_dropped");
    return p;
}

}  // namespace sipvol

namespace sipvol {

std::string to_string(Method m) {
    switch (m) {
        case Method::Sip: return "sip";
        case Method::Ave: return "ave";
        case Method::Ar1: return "ar1";
        case Method::Pc: return "pc";
        case Method::HarD: return "har_d";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    for (Method m : all_methods())
        if (to_string(m) == name) return m;
    throw ConfigError("unknown method '" + name + "' (expected sip, ave, ar1, pc or har_d)");
}

const std::vector<Method>& all_methods() {
    static const std::vector<Method> methods{Method::Sip, Method::Ave, Method::Ar1, Method::Pc, Method::HarD};
    return methods;
}

int resolve_rank(const VolMatrix& vm, const RankPolicy& policy) {
    if (policy.kind == RankPolicy::Kind::Fixed) return policy.rank;
    const Eigen::VectorXd sv = singular_values(vm.history());
    const int r_max = std::min(policy.r_max, static_cast<int>(sv.size()) - 1);
    if (r_max < 1) return 1;
    return select_rank(sv, r_max, policy.kind == RankPolicy::Kind::Ratio ? RankMethod::Ratio : RankMethod::Gap);
}

Prediction predict(Method method, const VolMatrix& vm, const RankPolicy& policy, const SipOptions& opts) {
    switch (method) {
        case Method::Ave: return ave_predict(vm);
        case Method::Ar1: return ar1_predict(vm);
        case Method::HarD: return har_d_predict(vm);
        case Method::Pc: {
            const int r = std::min(resolve_rank(vm, policy), std::min(vm.days() - 1, vm.n()));
            return pc_predict(vm, r);
        }
        case Method::Sip: {
            const int requested = resolve_rank(vm, policy);
            int r = std::min(requested, std::min(vm.days() - 1, vm.n1()));
            for (;; --r) {
                try {
                    Prediction p = sip_predict(vm, r, opts);
                    if (r != requested) p.flags.push_back("rank_reduced_from:" + std::to_string(requested));
                    return p;
                } catch (const IllConditionedError&) {
                    if (r <= 1) throw;
                }
            }
        }
    }
    throw ConfigError("predict: unhandled method");
}

}  // namespace sipvol
