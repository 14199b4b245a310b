#pragma once

// MatrixMarket coordinate files for sparse matrices and a plain text format for
// dense ones ("rows cols" header followed by row-major values). Values are
// written with 17 significant digits so a write/read cycle is bit-exact.

#include <cctype>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>

#include "psketch/errors.hpp"
#include "psketch/numcore.hpp"

namespace psketch {

namespace detail {

inline std::string format_real(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string lowercase(std::string s)
{
    for (char& c : s)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

template <typename T>
bool parse_exact(std::istringstream& in, T& out)
{
    in >> out;
    return !in.fail();
}

inline bool only_whitespace_left(std::istringstream& in)
{
    std::string rest;
    in >> rest;
    return rest.empty();
}

} // namespace detail

inline void write_matrix_market(std::ostream& out, const SparseMatrix& m)
{
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << m.rows() << ' ' << m.cols() << ' ' << m.nnz() << '\n';
    for (std::size_t j = 0; j < m.cols(); ++j) {
        auto r = m.col_rows(j);
        auto v = m.col_values(j);
        for (std::size_t k = 0; k < r.size(); ++k)
            out << (r[k] + 1) << ' ' << (j + 1) << ' ' << detail::format_real(v[k]) << '\n';
    }
}

inline SparseMatrix read_matrix_market(std::istream& in)
{
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line))
        throw ParseError("empty input, expected MatrixMarket banner", 1);
    ++lineno;
    {
        std::istringstream banner(detail::lowercase(line));
        std::string tag, object, format, field, symmetry;
        banner >> tag >> object >> format >> field >> symmetry;
        if (tag != "%%matrixmarket" || object != "matrix")
            throw ParseError("missing %%MatrixMarket matrix banner", lineno);
        if (format != "coordinate")
            throw ParseError("only coordinate format is supported", lineno);
        if (field != "real" && field != "integer")
            throw ParseError("unsupported field '" + field + "'", lineno);
        if (symmetry != "general")
            throw ParseError("unsupported symmetry '" + symmetry + "'", lineno);
    }

    std::size_t rows = 0, cols = 0, nnz = 0;
    bool have_size = false;
    while (!have_size && std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '%')
            continue;
        std::istringstream ls(line);
        long long r, c, z;
        if (!detail::parse_exact(ls, r) || !detail::parse_exact(ls, c) || !detail::parse_exact(ls, z) ||
            !detail::only_whitespace_left(ls) || r < 0 || c < 0 || z < 0)
            throw ParseError("malformed size line", lineno);
        rows = static_cast<std::size_t>(r);
        cols = static_cast<std::size_t>(c);
        nnz = static_cast<std::size_t>(z);
        have_size = true;
    }
    if (!have_size)
        throw ParseError("missing size line", lineno + 1);

    std::vector<SparseMatrix::Triplet> trip;
    trip.reserve(nnz);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    while (trip.size() < nnz && std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '%')
            continue;
        std::istringstream ls(line);
        long long i, j;
        double v;
        if (!detail::parse_exact(ls, i) || !detail::parse_exact(ls, j) || !detail::parse_exact(ls, v) ||
            !detail::only_whitespace_left(ls))
            throw ParseError("malformed entry", lineno);
        if (i < 1 || j < 1 || static_cast<std::size_t>(i) > rows || static_cast<std::size_t>(j) > cols)
            throw ParseError("index (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range", lineno);
        if (!std::isfinite(v))
            throw ParseError("non-finite value", lineno);
        auto key = std::make_pair(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1));
        if (!seen.insert(key).second)
            throw ParseError("duplicate coordinate (" + std::to_string(i) + ", " + std::to_string(j) + ")", lineno);
        trip.push_back({key.first, key.second, v});
    }
    if (trip.size() != nnz)
        throw ParseError("expected " + std::to_string(nnz) + " entries, found " + std::to_string(trip.size()),
                         lineno + 1);
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") != std::string::npos && line[0] != '%')
            throw ParseError("trailing data after declared entries", lineno);
    }
    return SparseMatrix::from_triplets(rows, cols, std::move(trip));
}

inline void write_dense(std::ostream& out, const DenseMatrix& m)
{
    out << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j)
                out << ' ';
            out << detail::format_real(m(i, j));
        }
        out << '\n';
    }
}

inline DenseMatrix read_dense(std::istream& in)
{
    std::string line;
    std::size_t lineno = 0;
    std::size_t rows = 0, cols = 0;
    bool have_header = false;
    while (!have_header && std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        std::istringstream ls(line);
        long long r, c;
        if (!detail::parse_exact(ls, r) || !detail::parse_exact(ls, c) || !detail::only_whitespace_left(ls) || r < 0 ||
            c < 0)
            throw ParseError("malformed dense header, expected 'rows cols'", lineno);
        rows = static_cast<std::size_t>(r);
        cols = static_cast<std::size_t>(c);
        have_header = true;
    }
    if (!have_header)
        throw ParseError("missing dense header", 1);
    std::vector<double> data;
    data.reserve(rows * cols);
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) {
            if (data.size() == rows * cols)
                throw ParseError("more values than rows*cols", lineno);
            std::size_t used = 0;
            double v;
            try {
                v = std::stod(tok, &used);
            } catch (const std::exception&) {
                throw ParseError("bad number '" + tok + "'", lineno);
            }
            if (used != tok.size() || !std::isfinite(v))
                throw ParseError("bad number '" + tok + "'", lineno);
            data.push_back(v);
        }
    }
    if (data.size() != rows * cols)
        throw ParseError("expected " + std::to_string(rows * cols) + " values, found " + std::to_string(data.size()),
                         lineno);
    return DenseMatrix(rows, cols, std::move(data));
}

inline SparseMatrix read_matrix_market(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw ArgumentError("cannot open " + path);
    return read_matrix_market(f);
}

inline void write_matrix_market(const std::string& path, const SparseMatrix& m)
{
    std::ofstream f(path);
    if (!f)
        throw ArgumentError("cannot write " + path);
    write_matrix_market(f, m);
}

inline DenseMatrix read_dense(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw ArgumentError("cannot open " + path);
    return read_dense(f);
}

inline void write_dense(const std::string& path, const DenseMatrix& m)
{
    std::ofstream f(path);
    if (!f)
        throw ArgumentError("cannot write " + path);
    write_dense(f, m);
}

} // namespace psketch
