#include "sipvol/errors.hpp"
#include "sipvol/lowrank.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

using namespace sipvol;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd uniform_matrix(int rows, int cols, std::mt19937_64& rng, double lo = 0.5, double hi = 2.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
    return m;
}

MatrixXd positive_low_rank(int rows, int cols, int rank, std::mt19937_64& rng) {
    return uniform_matrix(rows, rank, rng) * uniform_matrix(rank, cols, rng);
}

VectorXd pinv_oracle(const VolMatrix& vm) {
    const MatrixXd s11 = vm.s11();
    const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(s11);
    return (vm.s21() * cod.pseudoInverse() * vm.s12()).transpose();
}

double rel_err(const VectorXd& a, const VectorXd& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST_CASE("VolMatrix validation and blocks") {
    MatrixXd m(3, 4);
    m << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
    const VolMatrix vm(m, 1);
    CHECK(vm.s11().rows() == 2);
    CHECK(vm.s12().cols() == 3);
    CHECK(vm.s21()(0, 0) == 9);
    CHECK(vm.n2() == 3);
    CHECK_THROWS_AS(VolMatrix(m, 0), ConfigError);
    CHECK_THROWS_AS(VolMatrix(m, 4), ConfigError);
    CHECK_THROWS_AS(VolMatrix(m.topRows(1), 2), DataError);
    MatrixXd bad = m;
    bad(1, 1) = -1.0;
    CHECK_THROWS_AS(VolMatrix(bad, 2), DataError);
    bad(1, 1) = std::nan("");
    CHECK_THROWS_AS(VolMatrix(bad, 2), DataError);
    CHECK(observed_columns_for(0.1, 78) == 8);
    CHECK(observed_columns_for(0.5, 78) == 39);
    CHECK(observed_columns_for(0.9, 78) == 70);
    CHECK(observed_columns_for(0.001, 78) == 1);
}

TEST_CASE("truncated SVD") {
    SUBCASE("exact rank one outer product") {
        const VectorXd u = (VectorXd(3) << 1, 2, 3).finished();
        const VectorXd v = (VectorXd(4) << 4, 5, 6, 7).finished();
        const MatrixXd M = u * v.transpose();
        const SvdFactors f = truncated_svd(M, 1);
        CHECK(f.S(0) == doctest::Approx(42.0).epsilon(1e-14));
        CHECK((f.reconstruct() - M).norm() < 1e-12);
        CHECK(f.V.col(0).maxCoeff() > 0.0);
    }
    SUBCASE("identity") {
        const SvdFactors f = truncated_svd(MatrixXd::Identity(3, 3), 3);
        for (int i = 0; i < 3; ++i) CHECK(f.S(i) == doctest::Approx(1.0));
    }
    SUBCASE("Eckart-Young residual against an eigen-decomposition oracle") {
        std::mt19937_64 rng(1);
        const MatrixXd M = uniform_matrix(8, 6, rng, -1.0, 1.0);
        const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(M.transpose() * M);
        VectorXd lam = eig.eigenvalues();  // ascending
        std::sort(lam.data(), lam.data() + lam.size(), std::greater<>());
        const SvdFactors f = truncated_svd(M, 2);
        const double resid = (M - f.reconstruct()).squaredNorm();
        CHECK(resid == doctest::Approx(lam.tail(4).sum()).epsilon(1e-9));
        const VectorXd sv = singular_values(M);
        for (int i = 0; i < 6; ++i) CHECK(sv(i) == doctest::Approx(std::sqrt(lam(i))).epsilon(1e-9));
    }
    SUBCASE("rank out of range") {
        CHECK_THROWS_AS(truncated_svd(MatrixXd::Ones(3, 2), 3), ConfigError);
        CHECK_THROWS_AS(truncated_svd(MatrixXd::Ones(3, 2), 0), ConfigError);
    }
}

TEST_CASE("rank selection") {
    const VectorXd a = (VectorXd(3) << 20, 2, 1).finished();
    const VectorXd b = (VectorXd(3) << 5, 5, 0.1).finished();
    CHECK(select_rank(a, 2, RankMethod::Ratio) == 1);
    CHECK(select_rank(a, 2, RankMethod::Gap) == 1);
    CHECK(select_rank(b, 2, RankMethod::Ratio) == 2);
    const VectorXd zero_tail = (VectorXd(4) << 3, 2, 0, 0).finished();
    CHECK(select_rank(zero_tail, 3, RankMethod::Ratio) == 2);
    CHECK_THROWS_AS(select_rank(a, 3, RankMethod::Ratio), ConfigError);
}

TEST_CASE("SIP prediction: worked examples") {
    SUBCASE("rank one outer product") {
        const VectorXd u = (VectorXd(3) << 1, 2, 3).finished();
        const VectorXd v = (VectorXd(4) << 4, 5, 6, 7).finished();
        const VolMatrix vm(u * v.transpose(), 2);
        const Prediction p = sip_predict(vm, 1);
        REQUIRE(p.values.size() == 2);
        CHECK(p.values(0) == doctest::Approx(18.0).epsilon(1e-10));
        CHECK(p.values(1) == doctest::Approx(21.0).epsilon(1e-10));
        CHECK(p.rank_used == 1);
        REQUIRE(p.conditioning.has_value());
        CHECK(*p.conditioning == doctest::Approx(1.0));
    }
    SUBCASE("2x2") {
        MatrixXd m(2, 2);
        m << 1, 2, 2, 4;
        const Prediction p = sip_predict(VolMatrix(m, 1), 1);
        CHECK(p.values(0) == doctest::Approx(4.0).epsilon(1e-12));
    }
    SUBCASE("random rank two against the pseudo-inverse oracle") {
        std::mt19937_64 rng(2);
        const VolMatrix vm(positive_low_rank(6, 8, 2, rng), 5);
        const Prediction p = sip_predict(vm, 2);
        CHECK(rel_err(p.values, pinv_oracle(vm)) < 1e-8);
        const VectorXd truth = vm.data().bottomRightCorner(1, 3).transpose();
        CHECK(rel_err(p.values, truth) < 1e-8);
    }
    SUBCASE("rank too large") {
        std::mt19937_64 rng(3);
        const VolMatrix vm(uniform_matrix(4, 6, rng), 2);
        CHECK_THROWS_AS(sip_predict(vm, 3), ConfigError);
    }
}

TEST_CASE("SIP is invariant to basis sign flips and homogeneous of degree one") {
    std::mt19937_64 rng(4);
    const VolMatrix vm(positive_low_rank(10, 12, 3, rng) + 0.01 * uniform_matrix(10, 12, rng), 6);
    const Prediction base = sip_predict(vm, 3);
    const SvdFactors rows = truncated_svd(vm.history(), 3);
    const SvdFactors cols = truncated_svd(vm.observed_columns(), 3);
    MatrixXd U = rows.U, V = cols.V;
    U.col(1) *= -1.0;
    V.col(0) *= -1.0;
    V.col(2) *= -1.0;
    CHECK(rel_err(sip_predict_with_bases(vm, U, V).values, base.values) < 1e-10);

    const VolMatrix scaled(2.5 * vm.data(), 6);
    CHECK(rel_err(sip_predict(scaled, 3).values, 2.5 * base.values) < 1e-10);
}

TEST_CASE("ill-conditioned core") {
    // Nearly parallel row-basis columns make the core numerically singular.
    const VolMatrix vm(MatrixXd::Constant(3, 3, 1.0), 2);
    MatrixXd U(2, 2), V(2, 2);
    U << 1, 1, 1, 1 + 1e-15;
    V << 1, 0, 0, 1;
    CHECK_THROWS_AS(sip_predict_with_bases(vm, U.colwise().normalized(), V), IllConditionedError);

    // predict() retries with smaller rank and reports it.
    std::mt19937_64 rng(5);
    MatrixXd data = positive_low_rank(6, 6, 1, rng);
    const VolMatrix low(data, 3);
    RankPolicy fixed{RankPolicy::Kind::Fixed, 3, 10};
    const Prediction p = predict(Method::Sip, low, fixed);
    CHECK(p.rank_used < 3);
    CHECK(std::find(p.flags.begin(), p.flags.end(), "rank_reduced_from:3") != p.flags.end());
    const VectorXd truth = data.bottomRightCorner(1, 3).transpose();
    CHECK(rel_err(p.values, truth) < 1e-8);

    SipOptions ridge;
    ridge.ridge = 1e-8;
    const Prediction pr = sip_predict(low, 3, ridge);
    CHECK(std::find(pr.flags.begin(), pr.flags.end(), "ridge") != pr.flags.end());
}

TEST_CASE("PC prediction") {
    std::mt19937_64 rng(6);
    SUBCASE("identical history rows") {
        const VectorXd rho = uniform_matrix(7, 1, rng).col(0);
        MatrixXd m = rho.transpose().replicate(5, 1);
        m.row(4) *= 3.0;
        const Prediction p = pc_predict(VolMatrix(m, 3), 1);
        CHECK(rel_err(p.values, rho.tail(4)) < 1e-12);
    }
    SUBCASE("full rank reproduces the last history row") {
        const MatrixXd m = uniform_matrix(5, 7, rng);
        const VolMatrix vm(m, 3);
        const Prediction p = pc_predict(vm, 4);
        CHECK(rel_err(p.values, m.row(3).tail(4).transpose()) < 1e-12);
    }
    SUBCASE("rank two against a full SVD oracle") {
        const MatrixXd m = uniform_matrix(9, 7, rng);
        const VolMatrix vm(m, 2);
        const Eigen::JacobiSVD<MatrixXd> svd(vm.history(), Eigen::ComputeThinU | Eigen::ComputeThinV);
        const MatrixXd recon = svd.matrixU().leftCols(2) * svd.singularValues().head(2).asDiagonal() *
                               svd.matrixV().leftCols(2).transpose();
        CHECK(rel_err(pc_predict(vm, 2).values, recon.row(7).tail(5).transpose()) < 1e-10);
    }
}

TEST_CASE("AVE prediction") {
    MatrixXd m(3, 3);
    m << 1, 0.5, 0.5, 1, 1.5, 1.5, 1, 9, 9;
    const Prediction p = ave_predict(VolMatrix(m, 1));
    CHECK(p.values(0) == doctest::Approx(1.0));
    CHECK(p.values(1) == doctest::Approx(1.0));

    std::mt19937_64 rng(7);
    const MatrixXd r = uniform_matrix(6, 5, rng);
    const Prediction q = ave_predict(VolMatrix(r, 2));
    for (int j = 0; j < 3; ++j) {
        double acc = 0.0;
        for (int i = 0; i < 5; ++i) acc += r(i, 2 + j);
        CHECK(q.values(j) == doctest::Approx(acc / 5).epsilon(1e-14));
    }
}

TEST_CASE("AR(1) prediction") {
    SUBCASE("geometric column") {
        MatrixXd m(4, 2);
        m << 1, 2, 1, 4, 1, 8, 1, 1;
        const Prediction p = ar1_predict(VolMatrix(m, 1));
        CHECK(p.values(0) == doctest::Approx(16.0).epsilon(1e-12));
        CHECK(p.flags.empty());
    }
    SUBCASE("constant column falls back to its mean") {
        MatrixXd m = MatrixXd::Constant(5, 3, 0.7);
        const Prediction p = ar1_predict(VolMatrix(m, 1));
        CHECK(p.values(0) == doctest::Approx(0.7));
        CHECK(p.flags.front() == "column_mean_fallback:2");
    }
    SUBCASE("random column against the normal equations") {
        std::mt19937_64 rng(8);
        const MatrixXd m = uniform_matrix(12, 4, rng);
        const Prediction p = ar1_predict(VolMatrix(m, 2));
        for (int j = 0; j < 2; ++j) {
            const VectorXd col = m.col(2 + j).head(11);
            MatrixXd X(10, 2);
            X.col(0).setOnes();
            X.col(1) = col.head(10);
            const VectorXd beta = (X.transpose() * X).ldlt().solve(X.transpose() * col.tail(10));
            CHECK(p.values(j) == doctest::Approx(beta(0) + beta(1) * col(10)).epsilon(1e-10));
        }
    }
}

TEST_CASE("HAR-D prediction") {
    SUBCASE("too few days") {
        std::mt19937_64 rng(9);
        CHECK_THROWS_AS(har_d_predict(VolMatrix(uniform_matrix(23, 5, rng), 2)), DataError);
    }
    SUBCASE("constant matrix") {
        const Prediction p = har_d_predict(VolMatrix(MatrixXd::Constant(30, 6, 0.3), 3));
        for (int j = 0; j < 3; ++j) CHECK(p.values(j) == doctest::Approx(0.3).epsilon(1e-10));
        CHECK(p.flags.front() == "collinear_regressors_dropped");
    }
    SUBCASE("regressor definitions") {
        std::mt19937_64 rng(10);
        const MatrixXd m = uniform_matrix(30, 6, rng);
        const VolMatrix vm(m, 2);
        const HarRegressors h = har_regressors(vm);
        CHECK(h.rv_daily(4) == doctest::Approx(m.row(4).mean()));
        CHECK(h.diurnal(3) == doctest::Approx(m.col(3).head(29).mean()));
        const HarDesign d = har_d_design(vm);
        CHECK(d.X.rows() == 7 * 4);
        CHECK(d.X(0, 1) == doctest::Approx(h.rv_daily(21)));
        CHECK(d.X(0, 2) == doctest::Approx(h.rv_daily.segment(17, 5).mean()));
        CHECK(d.X(0, 3) == doctest::Approx(h.rv_daily.segment(0, 22).mean()));
        CHECK(d.X(0, 5) == doctest::Approx(m(22, 1)));
        CHECK(d.y(0) == doctest::Approx(m(22, 2)));
    }
    SUBCASE("random panel against the normal equations") {
        std::mt19937_64 rng(11);
        const VolMatrix vm(uniform_matrix(60, 8, rng), 4);
        const HarDesign d = har_d_design(vm);
        const VectorXd beta = (d.X.transpose() * d.X).ldlt().solve(d.X.transpose() * d.y);
        const Prediction p = har_d_predict(vm);
        CHECK(p.flags.empty());
        CHECK(rel_err(p.values, d.X_pred * beta) < 1e-8);
    }
}

TEST_CASE("method names and rank policy") {
    for (Method m : all_methods()) CHECK(parse_method(to_string(m)) == m);
    CHECK(to_string(Method::HarD) == "har_d");
    CHECK_THROWS_AS(parse_method("xgboost"), ConfigError);

    std::mt19937_64 rng(12);
    const VolMatrix vm(positive_low_rank(20, 10, 1, rng) + 1e-3 * uniform_matrix(20, 10, rng), 5);
    CHECK(resolve_rank(vm, RankPolicy{}) == 1);
    CHECK(resolve_rank(vm, RankPolicy{RankPolicy::Kind::Fixed, 4, 10}) == 4);
    const Prediction p = predict(Method::Sip, vm, RankPolicy{});
    CHECK(p.method == "sip");
    CHECK(p.values.size() == 5);
}
