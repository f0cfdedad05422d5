#include "statemem/linalg.hpp"

#include "statemem/io.hpp"

#include <fstream>
#include <sstream>

namespace statemem {

void write_matrix(std::ostream& os, const MatrixXd& m)
{
    os << m.rows() << ' ' << m.cols() << '\n';
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            if (c) os << ' ';
            os << format_double(m(r, c));
        }
        os << '\n';
    }
}

MatrixXd read_matrix(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("matrix: missing header");
    const auto header = split_whitespace(line);
    if (header.size() != 2) throw std::runtime_error("matrix: header must be 'rows cols'");
    const long rows = std::stol(header[0]);
    const long cols = std::stol(header[1]);
    if (rows < 0 || cols < 0) throw std::runtime_error("matrix: negative dimensions");

    MatrixXd m(rows, cols);
    for (long r = 0; r < rows; ++r) {
        if (!std::getline(is, line))
            throw std::runtime_error("matrix: expected " + std::to_string(rows) + " rows, got " + std::to_string(r));
        const auto fields = split_whitespace(line);
        if (static_cast<long>(fields.size()) != cols)
            throw std::runtime_error("matrix: row " + std::to_string(r) + " has " + std::to_string(fields.size()) +
                                     " entries, expected " + std::to_string(cols));
        for (long c = 0; c < cols; ++c) m(r, c) = parse_double(fields[static_cast<std::size_t>(c)]);
    }
    return m;
}

void save_matrix(const std::string& path, const MatrixXd& m)
{
    std::ostringstream os;
    write_matrix(os, m);
    write_file_atomic(path, os.str());
}

MatrixXd load_matrix(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_matrix(is);
}

}  // namespace statemem
