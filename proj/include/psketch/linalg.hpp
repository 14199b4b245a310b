#pragma once

// Small dense factorizations used by the conditioning, distortion and regression
// code. Householder QR is hand-rolled so that the sign convention (positive
// diagonal of R) and the operation order are fixed; singular values come from
// Eigen.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "psketch/errors.hpp"
#include "psketch/numcore.hpp"

namespace psketch {

/// Thin Householder QR of an m x n matrix with m >= n. R has a nonnegative diagonal.
class HouseholderQR {
public:
    explicit HouseholderQR(const DenseMatrix& a) : m_(a.rows()), n_(a.cols())
    {
        if (m_ < n_)
            throw ArgumentError("HouseholderQR needs rows >= cols");
        // Column-major working copy; columns are contiguous for the reflections.
        work_.assign(m_ * n_, 0.0);
        for (std::size_t i = 0; i < m_; ++i)
            for (std::size_t j = 0; j < n_; ++j)
                work_[j * m_ + i] = a(i, j);
        beta_.assign(n_, 0.0);
        diag_.assign(n_, 0.0);
        sign_.assign(n_, 1.0);
        for (std::size_t k = 0; k < n_; ++k) {
            double* x = &work_[k * m_];
            double amax = 0.0;
            for (std::size_t i = k; i < m_; ++i)
                amax = std::max(amax, std::abs(x[i]));
            if (amax == 0.0) {
                diag_[k] = 0.0;
                continue;
            }
            double s = 0.0;
            for (std::size_t i = k; i < m_; ++i) {
                const double t = x[i] / amax;
                s += t * t;
            }
            const double norm = amax * std::sqrt(s);
            const double alpha = x[k] > 0.0 ? -norm : norm;
            // v = x - alpha e_k, stored in place; beta = 2 / (v^T v)
            x[k] -= alpha;
            double vtv = 0.0;
            for (std::size_t i = k; i < m_; ++i)
                vtv += x[i] * x[i];
            beta_[k] = vtv > 0.0 ? 2.0 / vtv : 0.0;
            diag_[k] = alpha;
            for (std::size_t j = k + 1; j < n_; ++j) {
                double* c = &work_[j * m_];
                double dot = 0.0;
                for (std::size_t i = k; i < m_; ++i)
                    dot += x[i] * c[i];
                dot *= beta_[k];
                for (std::size_t i = k; i < m_; ++i)
                    c[i] -= dot * x[i];
            }
        }
        for (std::size_t k = 0; k < n_; ++k)
            sign_[k] = diag_[k] < 0.0 ? -1.0 : 1.0;
    }

    std::size_t rows() const noexcept { return m_; }
    std::size_t cols() const noexcept { return n_; }

    /// Upper-triangular n x n factor with nonnegative diagonal.
    DenseMatrix r() const
    {
        DenseMatrix r(n_, n_);
        for (std::size_t i = 0; i < n_; ++i) {
            r(i, i) = sign_[i] * diag_[i];
            for (std::size_t j = i + 1; j < n_; ++j)
                r(i, j) = sign_[i] * work_[j * m_ + i];
        }
        return r;
    }

    /// Smallest |R_kk| relative to the largest. Zero means exactly rank deficient.
    double diagonal_ratio() const
    {
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (double d : diag_) {
            lo = std::min(lo, std::abs(d));
            hi = std::max(hi, std::abs(d));
        }
        return hi == 0.0 ? 0.0 : lo / hi;
    }

    bool full_rank(double rtol = 1e-12) const { return n_ == 0 || diagonal_ratio() > rtol; }

    /// Q^T b (length m), with the same sign convention as r().
    std::vector<double> apply_qt(std::span<const double> b) const
    {
        if (b.size() != m_)
            throw ArgumentError("apply_qt: length mismatch");
        std::vector<double> y(b.begin(), b.end());
        for (std::size_t k = 0; k < n_; ++k) {
            if (beta_[k] == 0.0)
                continue;
            const double* v = &work_[k * m_];
            double dot = 0.0;
            for (std::size_t i = k; i < m_; ++i)
                dot += v[i] * y[i];
            dot *= beta_[k];
            for (std::size_t i = k; i < m_; ++i)
                y[i] -= dot * v[i];
        }
        for (std::size_t k = 0; k < n_; ++k)
            y[k] *= sign_[k];
        return y;
    }

    /// Thin Q (m x n) with orthonormal columns.
    DenseMatrix thin_q() const
    {
        DenseMatrix q(m_, n_);
        std::vector<double> e(m_);
        for (std::size_t j = 0; j < n_; ++j) {
            std::fill(e.begin(), e.end(), 0.0);
            e[j] = sign_[j];
            for (std::size_t kk = n_; kk-- > 0;) {
                if (beta_[kk] == 0.0)
                    continue;
                const double* v = &work_[kk * m_];
                double dot = 0.0;
                for (std::size_t i = kk; i < m_; ++i)
                    dot += v[i] * e[i];
                dot *= beta_[kk];
                for (std::size_t i = kk; i < m_; ++i)
                    e[i] -= dot * v[i];
            }
            for (std::size_t i = 0; i < m_; ++i)
                q(i, j) = e[i];
        }
        return q;
    }

    /// Least-squares solution of min ||A x - b||_2. Requires full column rank.
    std::vector<double> solve(std::span<const double> b) const
    {
        if (!full_rank())
            throw ConditioningError("least-squares system is rank deficient");
        auto y = apply_qt(b);
        y.resize(n_);
        return solve_upper(r(), y);
    }

    static std::vector<double> solve_upper(const DenseMatrix& r, std::vector<double> y)
    {
        const std::size_t n = r.cols();
        for (std::size_t i = n; i-- > 0;) {
            double s = y[i];
            for (std::size_t j = i + 1; j < n; ++j)
                s -= r(i, j) * y[j];
            y[i] = s / r(i, i);
        }
        return y;
    }

private:
    std::size_t m_, n_;
    std::vector<double> work_;
    std::vector<double> beta_;
    std::vector<double> diag_;
    std::vector<double> sign_;
};

/// Right-multiplies by the inverse of an upper-triangular matrix: returns A R^-1.
inline DenseMatrix solve_right_upper(const DenseMatrix& a, const DenseMatrix& r)
{
    const std::size_t n = r.cols();
    if (a.cols() != n || r.rows() != n)
        throw ArgumentError("solve_right_upper: dimension mismatch");
    DenseMatrix u(a.rows(), n);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ar = a.row(i);
        auto ur = u.row(i);
        // Solve u_row R = a_row by forward substitution over columns.
        for (std::size_t j = 0; j < n; ++j) {
            double s = ar[j];
            for (std::size_t k = 0; k < j; ++k)
                s -= ur[k] * r(k, j);
            ur[j] = s / r(j, j);
        }
    }
    return u;
}

/// Singular values in descending order.
inline std::vector<double> singular_values(const DenseMatrix& a)
{
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMat> m(a.data().data(), static_cast<Eigen::Index>(a.rows()),
                               static_cast<Eigen::Index>(a.cols()));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    return std::vector<double>(s.data(), s.data() + s.size());
}

/// Numerical rank with the usual max(m, n) * eps * sigma_max threshold.
inline std::size_t numerical_rank(const DenseMatrix& a)
{
    if (a.rows() == 0 || a.cols() == 0)
        return 0;
    const auto s = singular_values(a);
    const double tol =
        static_cast<double>(std::max(a.rows(), a.cols())) * std::numeric_limits<double>::epsilon() * s.front();
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [&](double x) { return x > tol; }));
}

} // namespace psketch
