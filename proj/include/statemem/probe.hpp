#pragma once

#include "statemem/embeddings.hpp"
#include "statemem/jacobian.hpp"
#include "statemem/linalg.hpp"

#include <string>
#include <utility>
#include <vector>

namespace statemem {

// (sum of the n largest singular values) / (sum of all); 0 if all are zero.
template <typename Derived>
typename Derived::Scalar selectivity_ratio(const Eigen::MatrixBase<Derived>& sigma, Index n)
{
    using Scalar = typename Derived::Scalar;
    if (n < 1 || n > sigma.size())
        throw std::invalid_argument("selectivity_ratio: n=" + std::to_string(n) + " outside [1, " +
                                    std::to_string(sigma.size()) + "]");
    const Scalar total = sigma.sum();
    if (total == Scalar(0)) return Scalar(0);
    return sigma.head(n).sum() / total;
}

// cos(d, H_n) = ||V_n^T d|| for unit d.
template <typename DerivedD, typename Scalar>
Scalar cos_property(const Eigen::MatrixBase<DerivedD>& d, const SvdResult<Scalar>& s, Index n)
{
    if (d.size() != s.v.rows()) throw std::invalid_argument("cos_property: dimension mismatch");
    if (n < 1 || n > s.v.cols())
        throw std::invalid_argument("cos_property: n=" + std::to_string(n) + " outside [1, " +
                                    std::to_string(s.v.cols()) + "]");
    return (s.v.leftCols(n).transpose() * d).norm();
}

inline double cos_property(const PropertyVector& d, const SvdResult<double>& s, Index n)
{
    return cos_property(d.d, s, n);
}

// m = ||G d|| / sigma_1(G) for unit d.
template <typename DerivedG, typename DerivedD>
typename DerivedG::Scalar relative_memory(const Eigen::MatrixBase<DerivedG>& g, const Eigen::MatrixBase<DerivedD>& d)
{
    using Scalar = typename DerivedG::Scalar;
    if (d.size() != g.cols()) throw std::invalid_argument("relative_memory: dimension mismatch");
    if (std::abs(d.norm() - Scalar(1)) > Scalar(1e-8)) throw std::invalid_argument("relative_memory: d is not unit norm");
    const auto s = svd(g);
    if (s.sigma(0) == Scalar(0)) throw std::invalid_argument("relative_memory: zero gradient matrix, memory undefined");
    return (g * d).norm() / s.sigma(0);
}

inline double relative_memory(const GradientMatrix& g, const PropertyVector& d) { return relative_memory(g.data, d.d); }

struct DelayRow {
    std::size_t tau = 0;
    double sigma1 = 0.0;
    double sum_sigma = 0.0;
    double ratio1 = 0.0;
    double ratio5 = 0.0;  // top-5 sum (or all, if fewer) over total
};

struct DelayCurve {
    std::vector<DelayRow> rows;
};

DelayCurve sv_curve(const std::vector<GradientMatrix>& matrices);

struct PropertyRow {
    std::size_t tau = 0;
    double m = 0.0;
    double cos_n = 0.0;
};

struct PropertyCurve {
    std::string property;
    Index n = 5;
    std::vector<PropertyRow> rows;
};

PropertyCurve track_property(const std::vector<GradientMatrix>& matrices, const PropertyVector& d, Index n);

struct ClassSvRow {
    std::string name;
    double sigma1 = 0.0;
    double normalized = 0.0;
};

std::vector<ClassSvRow> class_sv_table(const std::vector<std::pair<std::string, double>>& sigma1_by_class);

// Fixed-point rendering for display tables.
std::string format_fixed(double x, int decimals);
std::string render_class_table(const std::vector<ClassSvRow>& rows);

// CSV (LF line endings, full precision).
std::string delay_curve_csv(const DelayCurve& curve);
DelayCurve parse_delay_curve_csv(const std::string& text);
std::string property_curves_csv(const std::vector<PropertyCurve>& curves);
std::vector<PropertyCurve> parse_property_curves_csv(const std::string& text);
std::string class_table_csv(const std::vector<ClassSvRow>& rows);

}  // namespace statemem
