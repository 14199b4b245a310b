#pragma once

// Samplers for Cauchy, symmetric p-stable, truncated and Gaussian variables.
//
// Symmetric p-stable draws use the Chambers-Mallows-Stuck transform with the
// standard scale convention: characteristic function exp(-|t|^p). Under that
// convention p = 1 is the standard Cauchy law and p = 2 is N(0, 2).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "psketch/errors.hpp"
#include "psketch/rng.hpp"

namespace psketch {

struct StableParams {
    double p = 1.0;
    double scale = 1.0;

    StableParams() = default;
    StableParams(double p_, double scale_ = 1.0) : p(p_), scale(scale_) { validate(); }

    void validate() const
    {
        if (!(p >= 1.0 && p <= 2.0))
            throw ArgumentError("stable index p must lie in [1, 2], got " + std::to_string(p));
        if (!(scale > 0.0) || !std::isfinite(scale))
            throw ArgumentError("stable scale must be positive and finite");
    }
};

struct TruncationParams {
    double alpha;

    explicit TruncationParams(double a) : alpha(a)
    {
        if (!(a > 0.0) || !std::isfinite(a))
            throw ArgumentError("truncation threshold alpha must be positive");
    }
};

/// Inverse CDF of the standard Cauchy law on (0, 1).
inline double cauchy_inverse_cdf(double u) { return std::tan(std::numbers::pi * (u - 0.5)); }

inline double cauchy_cdf(double x) { return 0.5 + std::atan(x) / std::numbers::pi; }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double draw_cauchy(RngStream& stream) { return cauchy_inverse_cdf(stream.uniform()); }

/// One symmetric p-stable draw at unit scale.
inline double draw_pstable(double p, RngStream& stream)
{
    if (p == 1.0)
        return draw_cauchy(stream);
    const double v = std::numbers::pi * (stream.uniform() - 0.5);
    const double w = stream.exponential();
    const double cv = std::cos(v);
    return std::sin(p * v) / std::pow(cv, 1.0 / p) * std::pow(std::cos(v - p * v) / w, (1.0 - p) / p);
}

inline std::vector<double> sample_cauchy(RngStream& stream, std::size_t count)
{
    if (count == 0)
        throw ArgumentError("sample count must be at least 1");
    std::vector<double> out(count);
    for (double& x : out)
        x = draw_cauchy(stream);
    return out;
}

inline std::vector<double> sample_pstable(const StableParams& params, RngStream& stream, std::size_t count)
{
    params.validate();
    if (count == 0)
        throw ArgumentError("sample count must be at least 1");
    std::vector<double> out(count);
    for (double& x : out)
        x = params.scale * draw_pstable(params.p, stream);
    return out;
}

inline std::vector<double> sample_gaussian(RngStream& stream, std::size_t count)
{
    std::vector<double> out(count);
    for (double& x : out)
        x = stream.gaussian();
    return out;
}

/// Raises |x| to at least alpha, keeping the sign (zero maps to +alpha).
inline double truncate(double x, const TruncationParams& t)
{
    if (x >= 0.0 && x <= t.alpha)
        return t.alpha;
    if (x < 0.0 && x >= -t.alpha)
        return -t.alpha;
    return x;
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_distance(std::vector<double> a, std::vector<double> b)
{
    if (a.empty() || b.empty())
        throw ArgumentError("ks_distance needs two nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x)
            ++i;
        while (j < b.size() && b[j] <= x)
            ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

/// One-sample KS statistic against a continuous CDF.
template <typename Cdf>
double ks_distance_to(std::vector<double> a, Cdf cdf)
{
    std::sort(a.begin(), a.end());
    const double n = static_cast<double>(a.size());
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double f = cdf(a[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

/// Empirical quantile by nearest rank on a sorted sample.
inline double sorted_quantile(const std::vector<double>& sorted, double level)
{
    if (sorted.empty())
        throw ArgumentError("quantile of empty sample");
    const double pos = std::clamp(level, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

/// Asymptotic tail constant c_p of Pr[X_p > t] ~ c_p t^-p for the unit-scale
/// symmetric law: Gamma(p) sin(pi p / 2) / pi. Used as an independent check on
/// the Monte-Carlo calibration.
inline double stable_tail_constant(double p)
{
    return std::tgamma(p) * std::sin(std::numbers::pi * p / 2.0) / std::numbers::pi;
}

} // namespace psketch
