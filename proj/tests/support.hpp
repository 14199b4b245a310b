#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into the library's numerics.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "psketch/calibration.hpp"
#include "psketch/numcore.hpp"

namespace oracle {

inline double lp(const std::vector<double>& v, double p)
{
    long double s = 0;
    for (double x : v)
        s += std::pow(std::abs(static_cast<long double>(x)), static_cast<long double>(p));
    return static_cast<double>(std::pow(s, 1.0L / p));
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

/// Dense m x n matrix as row-major vector from a std::mt19937_64 stream.
inline psketch::DenseMatrix random_dense(std::size_t m, std::size_t n, unsigned seed)
{
    std::mt19937_64 g(seed);
    std::normal_distribution<double> N;
    std::vector<double> v(m * n);
    for (auto& x : v)
        x = N(g);
    return psketch::DenseMatrix(m, n, v);
}

inline Eigen::MatrixXd to_eigen(const psketch::DenseMatrix& a)
{
    Eigen::MatrixXd m(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a(i, j);
    return m;
}

inline Eigen::MatrixXd to_eigen(const psketch::SparseMatrix& s)
{
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(s.rows(), s.cols());
    for (std::size_t j = 0; j < s.cols(); ++j) {
        auto r = s.col_rows(j);
        auto v = s.col_values(j);
        for (std::size_t k = 0; k < r.size(); ++k)
            m(r[k], static_cast<Eigen::Index>(j)) = v[k];
    }
    return m;
}

/// Largest entrywise relative difference, scaled by the largest magnitude in b.
inline double max_rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

/// Extreme singular values of Pi Q where Q spans col(A), via Eigen's Householder QR.
inline std::pair<double, double> l2_extremes(const Eigen::MatrixXd& pi, const Eigen::MatrixXd& a)
{
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(pi * q);
    auto s = svd.singularValues();
    return {s(s.size() - 1), s(0)};
}

/// Binomial standard error of a frequency estimate with true probability q.
inline double binomial_se(double q, double trials) { return std::sqrt(q * (1 - q) / trials); }

inline const psketch::CalibrationConstants& constants()
{
    static const psketch::CalibrationConstants c = psketch::CalibrationConstants::load(psketch::default_calibration_path());
    return c;
}

} // namespace oracle
