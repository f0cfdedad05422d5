#include "statemem/linalg.hpp"
#include "statemem/random.hpp"

#include <doctest.h>

#include <Eigen/SVD>

#include <sstream>

using namespace statemem;

namespace {

MatrixXd random_matrix(Index r, Index c, Rng& rng)
{
    MatrixXd m(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) m(i, j) = rng.normal();
    return m;
}

double gram_error(const MatrixXd& q)
{
    return (q.transpose() * q - MatrixXd::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff();
}

void check_svd(const MatrixXd& m)
{
    const auto s = svd(m);
    const Index k = std::min(m.rows(), m.cols());
    REQUIRE(s.u.rows() == m.rows());
    REQUIRE(s.u.cols() == k);
    REQUIRE(s.v.rows() == m.cols());
    REQUIRE(s.v.cols() == k);
    REQUIRE(s.sigma.size() == k);
    CHECK((m - s.reconstruct()).norm() <= 1e-8 * std::max(1.0, m.norm()));
    CHECK(gram_error(s.u) < 1e-10);
    CHECK(gram_error(s.v) < 1e-10);
    for (Index i = 0; i < k; ++i) {
        CHECK(s.sigma(i) >= 0.0);
        if (i + 1 < k) CHECK(s.sigma(i) >= s.sigma(i + 1));
    }
}

}  // namespace

TEST_SUITE("linalg")
{
    TEST_CASE("svd of a diagonal matrix")
    {
        MatrixXd m = Eigen::Vector3d(3, 2, 1).asDiagonal();
        const auto s = svd(m);
        CHECK(s.sigma(0) == doctest::Approx(3).epsilon(1e-15));
        CHECK(s.sigma(1) == doctest::Approx(2).epsilon(1e-15));
        CHECK(s.sigma(2) == doctest::Approx(1).epsilon(1e-15));
        CHECK((s.u.cwiseAbs() - MatrixXd::Identity(3, 3)).norm() < 1e-14);
        CHECK((s.v.cwiseAbs() - MatrixXd::Identity(3, 3)).norm() < 1e-14);
    }

    TEST_CASE("svd of a zero matrix")
    {
        const auto s = svd(MatrixXd::Zero(3, 5));
        REQUIRE(s.sigma.size() == 3);
        CHECK(s.sigma.isZero(0.0));
        CHECK(gram_error(s.u) < 1e-12);
        CHECK(gram_error(s.v) < 1e-12);
    }

    TEST_CASE("svd of a random 6x4 matrix")
    {
        Rng rng(11);
        const MatrixXd m = random_matrix(6, 4, rng);
        const auto s = svd(m);
        CHECK((m - s.reconstruct()).norm() < 1e-10);
        CHECK(gram_error(s.u) < 1e-10);
        CHECK(gram_error(s.v) < 1e-10);
    }

    TEST_CASE("svd agrees with Eigen's JacobiSVD")
    {
        Rng rng(12);
        for (auto [r, c] : std::vector<std::pair<Index, Index>>{{1, 1}, {1, 7}, {7, 1}, {5, 5}, {9, 4}, {4, 9}, {30, 17}}) {
            const MatrixXd m = random_matrix(r, c, rng);
            const auto s = svd(m);
            Eigen::JacobiSVD<MatrixXd> ref(m);
            CHECK((s.sigma - ref.singularValues()).cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, m.norm()));
            check_svd(m);
        }
    }

    TEST_CASE("rank-deficient and wide inputs")
    {
        Rng rng(13);
        const MatrixXd a = random_matrix(8, 2, rng);
        const MatrixXd b = random_matrix(2, 6, rng);
        check_svd(a * b);           // rank 2, 8 x 6
        check_svd((a * b).transpose());
        MatrixXd dup(4, 3);
        dup << 1, 1, 0, 2, 2, 0, 3, 3, 0, 4, 4, 0;
        check_svd(dup);
        const auto s = svd(dup);
        CHECK(s.sigma(1) < 1e-12);
        CHECK(s.sigma(2) < 1e-12);
    }

    TEST_CASE("sign convention: largest entry of each u column is positive")
    {
        Rng rng(14);
        const MatrixXd m = random_matrix(7, 5, rng);
        const auto s = svd(m);
        for (Index j = 0; j < s.u.cols(); ++j) {
            Index arg = 0;
            s.u.col(j).cwiseAbs().maxCoeff(&arg);
            CHECK(s.u(arg, j) > 0.0);
        }
        const auto s2 = svd(-m);
        CHECK((s2.sigma - s.sigma).norm() < 1e-12);
        CHECK((s2.u - s.u).norm() < 1e-10);
        CHECK((s2.v + s.v).norm() < 1e-10);
    }

    TEST_CASE("operator-norm bound and transpose invariance")
    {
        Rng rng(15);
        for (int trial = 0; trial < 20; ++trial) {
            const MatrixXd m = random_matrix(1 + rng.index(12), 1 + rng.index(12), rng);
            const auto s = svd(m);
            const auto st = svd(m.transpose());
            CHECK((s.sigma - st.sigma).cwiseAbs().maxCoeff() < 1e-10);
            for (int k = 0; k < 5; ++k) {
                VectorXd x(m.cols());
                for (Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
                CHECK((m * x).norm() <= s.sigma(0) * x.norm() + 1e-10);
            }
        }
    }

    TEST_CASE("single precision instantiation")
    {
        Eigen::MatrixXf m(3, 2);
        m << 1, 2, 3, 4, 5, 6;
        const auto s = svd(m);
        CHECK((m - s.reconstruct()).norm() < 1e-4f);
    }

    TEST_CASE("non-finite input and sweep cap are errors")
    {
        MatrixXd m = MatrixXd::Ones(3, 3);
        m(1, 1) = std::nan("");
        CHECK_THROWS(svd(m));
        Rng rng(16);
        const MatrixXd r = random_matrix(10, 8, rng);
        try {
            svd(r, 0);
            FAIL("expected SvdError");
        } catch (const SvdError& e) {
            CHECK(std::string(e.what()).find("10x8") != std::string::npos);
        }
    }

    TEST_CASE("orthogonal projection")
    {
        const VectorXd d = Eigen::Vector3d(1, 2, 3);
        const MatrixXd v = MatrixXd::Identity(3, 2);
        CHECK((orthogonal_project(d, v) - Eigen::Vector3d(1, 2, 0)).norm() == 0.0);

        Rng rng(17);
        const auto s = svd(random_matrix(9, 6, rng));
        const MatrixXd vn = s.v.leftCols(3);
        VectorXd x(6);
        for (Index i = 0; i < 6; ++i) x(i) = rng.normal();
        const VectorXd p = orthogonal_project(x, vn);
        CHECK((orthogonal_project(p, vn) - p).cwiseAbs().maxCoeff() < 1e-12);

        // Double-loop oracle for V_n (V_n^T x).
        VectorXd coeff = VectorXd::Zero(3);
        for (Index j = 0; j < 3; ++j)
            for (Index i = 0; i < 6; ++i) coeff(j) += vn(i, j) * x(i);
        VectorXd expect = VectorXd::Zero(6);
        for (Index i = 0; i < 6; ++i)
            for (Index j = 0; j < 3; ++j) expect(i) += vn(i, j) * coeff(j);
        CHECK((p - expect).cwiseAbs().maxCoeff() < 1e-12);

        CHECK_THROWS(orthogonal_project(VectorXd::Ones(4), v));
        CHECK_THROWS(orthogonal_project(d, MatrixXd::Ones(3, 2)));
    }

    TEST_CASE("matrix text format round-trips exactly")
    {
        Rng rng(18);
        MatrixXd m = random_matrix(4, 3, rng);
        m(0, 0) = 1e-300;
        m(1, 1) = -123456789.123456789;
        std::stringstream ss;
        write_matrix(ss, m);
        const std::string text = ss.str();
        CHECK(text.substr(0, 4) == "4 3\n");
        const MatrixXd back = read_matrix(ss);
        CHECK(back == m);

        std::stringstream bad("2 2\n1 2\n3\n");
        CHECK_THROWS(read_matrix(bad));
        std::stringstream nonfinite("1 1\nnan\n");
        CHECK_THROWS(read_matrix(nonfinite));
    }
}
