#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iosfwd>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace statemem {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Mat<double>;
using VectorXd = Vec<double>;
using Index = Eigen::Index;

class SvdError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Thin SVD m = u * diag(sigma) * v^T with k = min(rows, cols) columns.
// sigma is nonincreasing; the largest-magnitude entry of each u column is
// positive.
template <typename Scalar>
struct SvdResult {
    Mat<Scalar> u;
    Vec<Scalar> sigma;
    Mat<Scalar> v;

    Index rank_k() const { return sigma.size(); }
    Mat<Scalar> reconstruct() const { return u * sigma.asDiagonal() * v.transpose(); }
};

namespace detail {

// Replace the zero columns listed in `missing` by unit vectors orthogonal to
// every other column. Standard basis vectors are tried in order.
template <typename Scalar>
void complete_orthonormal_basis(Mat<Scalar>& q, const std::vector<Index>& missing)
{
    std::vector<bool> filled(static_cast<std::size_t>(q.cols()), true);
    for (Index j : missing) filled[static_cast<std::size_t>(j)] = false;

    Index candidate = 0;
    for (Index j : missing) {
        bool placed = false;
        while (!placed && candidate < q.rows()) {
            Vec<Scalar> x = Vec<Scalar>::Unit(q.rows(), candidate++);
            for (int pass = 0; pass < 2; ++pass) {
                for (Index c = 0; c < q.cols(); ++c) {
                    if (!filled[static_cast<std::size_t>(c)]) continue;
                    x -= q.col(c).dot(x) * q.col(c);
                }
            }
            const Scalar norm = x.norm();
            if (norm > Scalar(0.5)) {
                q.col(j) = x / norm;
                filled[static_cast<std::size_t>(j)] = true;
                placed = true;
            }
        }
        if (!placed) throw SvdError("svd: failed to complete orthonormal basis");
    }
}

// One-sided Jacobi on a tall matrix (rows >= cols). Returns unsorted column
// norms; `a` is overwritten by U*Sigma and `v` accumulates the rotations.
template <typename Scalar>
void one_sided_jacobi(Mat<Scalar>& a, Mat<Scalar>& v, int max_sweeps, Index orig_rows, Index orig_cols)
{
    const Index n = a.cols();
    const Scalar tol = std::numeric_limits<Scalar>::epsilon() * static_cast<Scalar>(a.rows());
    v = Mat<Scalar>::Identity(n, n);
    if (n < 2) return;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (Index i = 0; i + 1 < n; ++i) {
            for (Index j = i + 1; j < n; ++j) {
                const Scalar alpha = a.col(i).squaredNorm();
                const Scalar beta = a.col(j).squaredNorm();
                const Scalar gamma = a.col(i).dot(a.col(j));
                if (alpha == Scalar(0) || beta == Scalar(0)) continue;
                if (std::abs(gamma) <= tol * std::sqrt(alpha) * std::sqrt(beta)) continue;

                rotated = true;
                const Scalar zeta = (beta - alpha) / (Scalar(2) * gamma);
                const Scalar t = (zeta >= Scalar(0) ? Scalar(1) : Scalar(-1)) /
                                 (std::abs(zeta) + std::hypot(Scalar(1), zeta));
                const Scalar c = Scalar(1) / std::hypot(Scalar(1), t);
                const Scalar s = c * t;

                for (Index r = 0; r < a.rows(); ++r) {
                    const Scalar x = a(r, i);
                    const Scalar y = a(r, j);
                    a(r, i) = c * x - s * y;
                    a(r, j) = s * x + c * y;
                }
                for (Index r = 0; r < n; ++r) {
                    const Scalar x = v(r, i);
                    const Scalar y = v(r, j);
                    v(r, i) = c * x - s * y;
                    v(r, j) = s * x + c * y;
                }
            }
        }
        if (!rotated) return;
    }
    throw SvdError("svd: no convergence after " + std::to_string(max_sweeps) + " Jacobi sweeps for " +
                   std::to_string(orig_rows) + "x" + std::to_string(orig_cols) + " matrix");
}

}  // namespace detail

template <typename Derived>
SvdResult<typename Derived::Scalar> svd(const Eigen::MatrixBase<Derived>& m, int max_sweeps = 100)
{
    using Scalar = typename Derived::Scalar;
    const Index rows = m.rows();
    const Index cols = m.cols();
    if (rows < 1 || cols < 1) throw std::invalid_argument("svd: empty matrix");
    if (!m.allFinite()) throw std::invalid_argument("svd: matrix has non-finite entries");

    // Work on the tall orientation so svd(M) and svd(M^T) share one code path.
    const bool wide = rows < cols;
    Mat<Scalar> a = wide ? Mat<Scalar>(m.transpose()) : Mat<Scalar>(m);
    Mat<Scalar> rot;
    detail::one_sided_jacobi(a, rot, max_sweeps, rows, cols);

    const Index k = a.cols();
    Vec<Scalar> norms(k);
    for (Index j = 0; j < k; ++j) norms(j) = a.col(j).norm();

    std::vector<Index> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return norms(x) > norms(y); });

    Mat<Scalar> left(a.rows(), k);
    Mat<Scalar> right(k, k);
    Vec<Scalar> sigma(k);
    std::vector<Index> zero_cols;
    for (Index j = 0; j < k; ++j) {
        const Index src = order[static_cast<std::size_t>(j)];
        Scalar s = norms(src);
        right.col(j) = rot.col(src);
        if (s <= std::numeric_limits<Scalar>::min()) {
            s = Scalar(0);
            left.col(j).setZero();
            zero_cols.push_back(j);
        } else {
            left.col(j) = a.col(src) / s;
        }
        sigma(j) = s;
    }
    if (!zero_cols.empty()) detail::complete_orthonormal_basis(left, zero_cols);

    SvdResult<Scalar> out;
    out.sigma = std::move(sigma);
    if (wide) {
        out.u = std::move(right);
        out.v = std::move(left);
    } else {
        out.u = std::move(left);
        out.v = std::move(right);
    }

    for (Index j = 0; j < k; ++j) {
        Index arg = 0;
        out.u.col(j).cwiseAbs().maxCoeff(&arg);
        if (out.u(arg, j) < Scalar(0)) {
            out.u.col(j) *= Scalar(-1);
            out.v.col(j) *= Scalar(-1);
        }
    }
    return out;
}

// y = V_n V_n^T d for a matrix whose columns are orthonormal.
template <typename DerivedD, typename DerivedV>
Vec<typename DerivedD::Scalar> orthogonal_project(const Eigen::MatrixBase<DerivedD>& d,
                                                  const Eigen::MatrixBase<DerivedV>& basis)
{
    using Scalar = typename DerivedD::Scalar;
    if (d.cols() != 1) throw std::invalid_argument("orthogonal_project: d must be a column vector");
    if (basis.rows() != d.rows())
        throw std::invalid_argument("orthogonal_project: basis has " + std::to_string(basis.rows()) +
                                    " rows, vector has " + std::to_string(d.rows()));
    const Mat<Scalar> gram = basis.transpose() * basis;
    const Scalar off = (gram - Mat<Scalar>::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
    if (basis.cols() > 0 && off > Scalar(1e-8))
        throw std::invalid_argument("orthogonal_project: basis columns are not orthonormal");
    return basis * (basis.transpose() * d);
}

// Plain-text matrix format: "rows cols" header, then one row per line.
void write_matrix(std::ostream& os, const MatrixXd& m);
MatrixXd read_matrix(std::istream& is);
void save_matrix(const std::string& path, const MatrixXd& m);
MatrixXd load_matrix(const std::string& path);

}  // namespace statemem
