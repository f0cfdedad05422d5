#include "statemem/probe.hpp"

#include "statemem/io.hpp"

#include <cstdio>
#include <sstream>

namespace statemem {

namespace {

void check_delay_sequence(const std::vector<GradientMatrix>& matrices)
{
    if (matrices.empty()) throw std::invalid_argument("curve: no gradient matrices");
    for (std::size_t i = 0; i < matrices.size(); ++i) {
        if (matrices[i].tau != i) throw std::invalid_argument("curve: delays must be contiguous from 0");
        if (matrices[i].data.rows() != matrices[0].data.rows() || matrices[i].data.cols() != matrices[0].data.cols())
            throw std::invalid_argument("curve: gradient matrices differ in shape at delay " + std::to_string(i));
    }
}

std::vector<std::string> csv_lines(const std::string& text)
{
    std::vector<std::string> lines;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

}  // namespace

DelayCurve sv_curve(const std::vector<GradientMatrix>& matrices)
{
    check_delay_sequence(matrices);
    DelayCurve curve;
    for (const auto& g : matrices) {
        const auto s = svd(g.data);
        DelayRow row;
        row.tau = g.tau;
        row.sigma1 = s.sigma(0);
        row.sum_sigma = s.sigma.sum();
        row.ratio1 = selectivity_ratio(s.sigma, 1);
        row.ratio5 = selectivity_ratio(s.sigma, std::min<Index>(5, s.sigma.size()));
        curve.rows.push_back(row);
    }
    return curve;
}

PropertyCurve track_property(const std::vector<GradientMatrix>& matrices, const PropertyVector& d, Index n)
{
    check_delay_sequence(matrices);
    PropertyCurve curve;
    curve.property = d.name();
    curve.n = n;
    for (const auto& g : matrices) {
        const auto s = svd(g.data);
        if (s.sigma(0) == 0.0)
            throw std::invalid_argument("track_property: zero gradient matrix at delay " + std::to_string(g.tau));
        PropertyRow row;
        row.tau = g.tau;
        row.m = (g.data * d.d).norm() / s.sigma(0);
        row.cos_n = cos_property(d.d, s, n);
        curve.rows.push_back(row);
    }
    return curve;
}

std::vector<ClassSvRow> class_sv_table(const std::vector<std::pair<std::string, double>>& sigma1_by_class)
{
    if (sigma1_by_class.size() < 2) throw std::invalid_argument("class_sv_table: need at least two classes");
    double total = 0.0;
    for (const auto& [name, s] : sigma1_by_class) {
        if (s < 0.0) throw std::invalid_argument("class_sv_table: negative singular value for " + name);
        total += s;
    }
    if (total == 0.0) throw std::invalid_argument("class_sv_table: all singular values are zero");
    std::vector<ClassSvRow> rows;
    for (const auto& [name, s] : sigma1_by_class) rows.push_back({name, s, s / total});
    return rows;
}

std::string format_fixed(double x, int decimals)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
    return buf;
}

std::string render_class_table(const std::vector<ClassSvRow>& rows)
{
    std::size_t width = 5;
    for (const auto& r : rows) width = std::max(width, r.name.size());
    std::ostringstream os;
    os << "class" << std::string(width - 5 + 2, ' ') << "sigma1 (normalized)\n";
    for (const auto& r : rows)
        os << r.name << std::string(width - r.name.size() + 2, ' ') << format_fixed(r.sigma1, 2) << " ("
           << format_fixed(r.normalized, 2) << ")\n";
    return os.str();
}

std::string delay_curve_csv(const DelayCurve& curve)
{
    std::ostringstream os;
    os << "tau,sigma1,sum_sigma,ratio1,ratio5\n";
    for (const auto& r : curve.rows)
        os << r.tau << ',' << format_double(r.sigma1) << ',' << format_double(r.sum_sigma) << ','
           << format_double(r.ratio1) << ',' << format_double(r.ratio5) << '\n';
    return os.str();
}

DelayCurve parse_delay_curve_csv(const std::string& text)
{
    const auto lines = csv_lines(text);
    if (lines.empty() || lines[0] != "tau,sigma1,sum_sigma,ratio1,ratio5")
        throw std::runtime_error("delay curve csv: bad header");
    DelayCurve curve;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split(lines[i], ',');
        if (f.size() != 5) throw std::runtime_error("delay curve csv: line " + std::to_string(i + 1) + " needs 5 fields");
        curve.rows.push_back({std::stoull(f[0]), parse_double(f[1]), parse_double(f[2]), parse_double(f[3]),
                              parse_double(f[4])});
    }
    return curve;
}

std::string property_curves_csv(const std::vector<PropertyCurve>& curves)
{
    std::ostringstream os;
    os << "tau,m,cos_n,property,n\n";
    for (const auto& c : curves)
        for (const auto& r : c.rows)
            os << r.tau << ',' << format_double(r.m) << ',' << format_double(r.cos_n) << ',' << c.property << ','
               << c.n << '\n';
    return os.str();
}

std::vector<PropertyCurve> parse_property_curves_csv(const std::string& text)
{
    const auto lines = csv_lines(text);
    if (lines.empty() || lines[0] != "tau,m,cos_n,property,n") throw std::runtime_error("property curve csv: bad header");
    std::vector<PropertyCurve> curves;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split(lines[i], ',');
        if (f.size() != 5)
            throw std::runtime_error("property curve csv: line " + std::to_string(i + 1) + " needs 5 fields");
        const Index n = std::stol(f[4]);
        if (curves.empty() || curves.back().property != f[3] || curves.back().n != n)
            curves.push_back({f[3], n, {}});
        curves.back().rows.push_back({std::stoull(f[0]), parse_double(f[1]), parse_double(f[2])});
    }
    return curves;
}

std::string class_table_csv(const std::vector<ClassSvRow>& rows)
{
    std::ostringstream os;
    os << "class,sigma1,normalized\n";
    for (const auto& r : rows) os << r.name << ',' << format_double(r.sigma1) << ',' << format_double(r.normalized) << '\n';
    return os.str();
}

}  // namespace statemem
