#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "psketch/errors.hpp"

namespace psketch {

/// Exponent of an l_p norm, restricted to [1, 2], together with its dual exponent.
class PNorm {
public:
    explicit PNorm(double p) : p_(p)
    {
        if (!(p >= 1.0 && p <= 2.0))
            throw ArgumentError("p must lie in [1, 2], got " + std::to_string(p));
    }

    double p() const noexcept { return p_; }

    /// q with 1/p + 1/q = 1; +infinity when p = 1.
    double dual() const noexcept
    {
        return p_ == 1.0 ? std::numeric_limits<double>::infinity() : p_ / (p_ - 1.0);
    }

private:
    double p_;
};

/// l_q norm for any q >= 1 including +infinity. No range restriction on q.
inline double vector_norm(std::span<const double> v, double q)
{
    double amax = 0.0;
    for (double x : v) {
        if (!std::isfinite(x))
            throw DomainError("non-finite entry in norm input");
        amax = std::max(amax, std::abs(x));
    }
    if (std::isinf(q))
        return amax;
    if (amax == 0.0)
        return 0.0;
    if (q == 1.0) {
        double s = 0.0;
        for (double x : v)
            s += std::abs(x);
        return s;
    }
    // Scale by the largest magnitude so heavy-tailed inputs cannot overflow.
    double s = 0.0;
    if (q == 2.0) {
        for (double x : v) {
            const double t = x / amax;
            s += t * t;
        }
        return amax * std::sqrt(s);
    }
    for (double x : v)
        s += std::pow(std::abs(x) / amax, q);
    return amax * std::pow(s, 1.0 / q);
}

/// (sum |v_i|^p)^(1/p).
inline double lp_norm(std::span<const double> v, PNorm p) { return vector_norm(v, p.p()); }

/// Checks ||v||_q <= ||v||_p <= n^(1/p - 1/q) ||v||_q with relative slack 1e-12.
inline bool norm_sandwich_check(std::span<const double> v, double p, double q)
{
    if (p > q)
        throw ArgumentError("norm_sandwich_check requires p <= q");
    PNorm pp(p);
    PNorm qq(q);
    const double np = lp_norm(v, pp);
    const double nq = lp_norm(v, qq);
    const double n = static_cast<double>(v.size());
    const double factor = v.empty() ? 1.0 : std::pow(n, 1.0 / p - 1.0 / q);
    constexpr double slack = 1e-12;
    return nq <= np * (1.0 + slack) && np <= factor * nq * (1.0 + slack);
}

/// Row-major dense matrix of doubles.
class DenseMatrix {
public:
    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data))
    {
        if (data_.size() != rows_ * cols_)
            throw ArgumentError("dense data length does not equal rows*cols");
        if (!all_finite())
            throw DomainError("dense matrix contains non-finite values");
    }

    static DenseMatrix identity(std::size_t n)
    {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            m(i, i) = 1.0;
        return m;
    }

    /// A single column vector.
    static DenseMatrix column(std::span<const double> v)
    {
        return DenseMatrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

    std::vector<double> col(std::size_t j) const
    {
        std::vector<double> c(rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            c[i] = (*this)(i, j);
        return c;
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool all_finite() const noexcept
    {
        return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
    }

    DenseMatrix transposed() const
    {
        DenseMatrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j)
                t(j, i) = (*this)(i, j);
        return t;
    }

    DenseMatrix scaled(double c) const
    {
        DenseMatrix m = *this;
        for (double& x : m.data_)
            x *= c;
        return m;
    }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Compressed sparse column matrix. Row indices are strictly increasing within a
/// column and no explicit zeros are stored.
class SparseMatrix {
public:
    struct Triplet {
        std::size_t row;
        std::size_t col;
        double value;
    };

    SparseMatrix() = default;

    /// Empty (all-zero) matrix.
    SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), col_ptr_(cols + 1, 0) {}

    /// Takes ownership of CSC arrays after checking every invariant.
    SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> col_ptr,
                 std::vector<std::uint32_t> row_idx, std::vector<double> values)
        : rows_(rows), cols_(cols), col_ptr_(std::move(col_ptr)), row_idx_(std::move(row_idx)), values_(std::move(values))
    {
        validate();
    }

    /// Builds from unordered triplets. Duplicate coordinates are rejected and zero
    /// values are dropped.
    static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> t)
    {
        std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
            return std::tie(a.col, a.row) < std::tie(b.col, b.row);
        });
        std::vector<std::size_t> ptr(cols + 1, 0);
        std::vector<std::uint32_t> ri;
        std::vector<double> vals;
        ri.reserve(t.size());
        vals.reserve(t.size());
        for (std::size_t k = 0; k < t.size(); ++k) {
            if (t[k].row >= rows || t[k].col >= cols)
                throw ArgumentError("triplet index out of range");
            if (k > 0 && t[k].row == t[k - 1].row && t[k].col == t[k - 1].col)
                throw ArgumentError("duplicate triplet coordinate");
            if (t[k].value == 0.0)
                continue;
            ++ptr[t[k].col + 1];
            ri.push_back(static_cast<std::uint32_t>(t[k].row));
            vals.push_back(t[k].value);
        }
        std::partial_sum(ptr.begin(), ptr.end(), ptr.begin());
        return SparseMatrix(rows, cols, std::move(ptr), std::move(ri), std::move(vals));
    }

    static SparseMatrix identity(std::size_t n)
    {
        std::vector<std::size_t> ptr(n + 1);
        std::vector<std::uint32_t> ri(n);
        std::iota(ptr.begin(), ptr.end(), std::size_t{0});
        std::iota(ri.begin(), ri.end(), std::uint32_t{0});
        return SparseMatrix(n, n, std::move(ptr), std::move(ri), std::vector<double>(n, 1.0));
    }

    static SparseMatrix from_dense(const DenseMatrix& a)
    {
        std::vector<Triplet> t;
        for (std::size_t i = 0; i < a.rows(); ++i)
            for (std::size_t j = 0; j < a.cols(); ++j)
                if (a(i, j) != 0.0)
                    t.push_back({i, j, a(i, j)});
        return from_triplets(a.rows(), a.cols(), std::move(t));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t nnz() const noexcept { return values_.size(); }

    std::size_t col_nnz(std::size_t j) const noexcept { return col_ptr_[j + 1] - col_ptr_[j]; }

    std::span<const std::uint32_t> col_rows(std::size_t j) const noexcept
    {
        return {row_idx_.data() + col_ptr_[j], col_nnz(j)};
    }
    std::span<const double> col_values(std::size_t j) const noexcept
    {
        return {values_.data() + col_ptr_[j], col_nnz(j)};
    }

    std::span<const std::size_t> col_ptr() const noexcept { return col_ptr_; }
    std::span<const std::uint32_t> row_indices() const noexcept { return row_idx_; }
    std::span<const double> values() const noexcept { return values_; }

    DenseMatrix to_dense() const
    {
        DenseMatrix d(rows_, cols_);
        for (std::size_t j = 0; j < cols_; ++j) {
            auto r = col_rows(j);
            auto v = col_values(j);
            for (std::size_t k = 0; k < r.size(); ++k)
                d(r[k], j) = v[k];
        }
        return d;
    }

    friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

private:
    void validate() const
    {
        if (col_ptr_.size() != cols_ + 1 || col_ptr_.front() != 0 || col_ptr_.back() != row_idx_.size() ||
            row_idx_.size() != values_.size())
            throw ArgumentError("inconsistent CSC array sizes");
        for (std::size_t j = 0; j < cols_; ++j) {
            if (col_ptr_[j] > col_ptr_[j + 1])
                throw ArgumentError("column pointers must be nondecreasing");
            for (std::size_t k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k) {
                if (row_idx_[k] >= rows_)
                    throw ArgumentError("row index out of range in column " + std::to_string(j));
                if (k > col_ptr_[j] && row_idx_[k] <= row_idx_[k - 1])
                    throw ArgumentError("row indices not strictly increasing in column " + std::to_string(j));
                if (values_[k] == 0.0)
                    throw ArgumentError("explicit zero stored in column " + std::to_string(j));
                if (!std::isfinite(values_[k]))
                    throw DomainError("non-finite sparse value in column " + std::to_string(j));
            }
        }
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> col_ptr_{0};
    std::vector<std::uint32_t> row_idx_;
    std::vector<double> values_;
};

/// S * A for sparse S and dense A. Work is nnz(S) * A.cols(); each output entry
/// accumulates in ascending column order of S, so results are reproducible.
inline DenseMatrix spmm_apply(const SparseMatrix& s, const DenseMatrix& a)
{
    if (s.cols() != a.rows())
        throw ArgumentError("spmm_apply: S.cols (" + std::to_string(s.cols()) + ") != A.rows (" +
                            std::to_string(a.rows()) + ")");
    DenseMatrix out(s.rows(), a.cols());
    for (std::size_t i = 0; i < s.cols(); ++i) {
        auto rows = s.col_rows(i);
        auto vals = s.col_values(i);
        auto arow = a.row(i);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            auto orow = out.row(rows[k]);
            const double v = vals[k];
            for (std::size_t j = 0; j < arow.size(); ++j)
                orow[j] += v * arow[j];
        }
    }
    return out;
}

/// S * A for sparse S and sparse A, returned dense.
inline DenseMatrix spmm_apply(const SparseMatrix& s, const SparseMatrix& a)
{
    if (s.cols() != a.rows())
        throw ArgumentError("spmm_apply: S.cols != A.rows");
    DenseMatrix out(s.rows(), a.cols());
    for (std::size_t j = 0; j < a.cols(); ++j) {
        auto ar = a.col_rows(j);
        auto av = a.col_values(j);
        for (std::size_t k = 0; k < ar.size(); ++k) {
            auto sr = s.col_rows(ar[k]);
            auto sv = s.col_values(ar[k]);
            for (std::size_t t = 0; t < sr.size(); ++t)
                out(sr[t], j) += sv[t] * av[k];
        }
    }
    return out;
}

/// Plain dense product, i-k-j loop order.
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b)
{
    if (a.cols() != b.rows())
        throw ArgumentError("matmul: inner dimensions differ");
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto crow = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0)
                continue;
            auto brow = b.row(k);
            for (std::size_t j = 0; j < brow.size(); ++j)
                crow[j] += aik * brow[j];
        }
    }
    return c;
}

inline std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x)
{
    if (a.cols() != x.size())
        throw ArgumentError("matvec: dimension mismatch");
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto r = a.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j)
            s += r[j] * x[j];
        y[i] = s;
    }
    return y;
}

/// Entrywise l_p norm of a matrix.
inline double entrywise_norm(const DenseMatrix& a, double p) { return vector_norm(a.data(), p); }

} // namespace psketch
