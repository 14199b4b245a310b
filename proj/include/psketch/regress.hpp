#pragma once

// Small-scale l_p regression: an IRLS solver, sketch-and-solve, and the
// sketch -> precondition -> sample pipeline.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "psketch/conditioning.hpp"
#include "psketch/embeddings.hpp"
#include "psketch/errors.hpp"
#include "psketch/linalg.hpp"
#include "psketch/matrix_io.hpp"
#include "psketch/numcore.hpp"
#include "psketch/rng.hpp"

namespace psketch {

struct RegressionProblem {
    DenseMatrix a;
    std::vector<double> b;
    double p = 1.0;

    std::size_t n() const { return a.rows(); }
    std::size_t d() const { return a.cols(); }

    void validate(bool check_rank = true) const
    {
        (void)PNorm{p};
        if (b.size() != a.rows())
            throw ArgumentError("regression: b has " + std::to_string(b.size()) + " entries but A has " +
                                std::to_string(a.rows()) + " rows");
        if (a.rows() < a.cols() || a.cols() == 0)
            throw ArgumentError("regression: need n >= d >= 1");
        for (double v : b)
            if (!std::isfinite(v))
                throw DomainError("regression: b has non-finite entries");
        if (check_rank && !HouseholderQR(a).full_rank())
            throw ConditioningError("regression: A is rank deficient");
    }
};

struct RegressionResult {
    std::vector<double> x_hat;
    double cost = 0.0; // ||A x_hat - b||_p on the original problem
    std::string method;
    std::size_t iterations = 0;
    std::uint64_t seed = 0;
    bool converged = false;
    std::vector<double> smoothed_costs; // IRLS objective per iterate
    std::size_t sampled_rows = 0;       // precondition_sample_solve only
};

inline void to_json(nlohmann::json& j, const RegressionResult& r)
{
    j = nlohmann::json{{"x_hat", r.x_hat},         {"cost", r.cost},           {"method", r.method},
                       {"iterations", r.iterations}, {"seed", r.seed},         {"converged", r.converged},
                       {"sampled_rows", r.sampled_rows}};
}

inline constexpr double kIrlsSmoothing = 1e-8;

/// (sum_i w_i |r_i|^p)^{1/p} of the residual A x - b.
inline double regression_cost(const DenseMatrix& a, std::span<const double> b, std::span<const double> x, double p,
                              const std::vector<double>* weights = nullptr)
{
    auto r = matvec(a, x);
    for (std::size_t i = 0; i < r.size(); ++i) {
        r[i] -= b[i];
        if (weights)
            r[i] *= std::pow((*weights)[i], 1.0 / p);
    }
    return vector_norm(r, p);
}

/// sum_i w_i integral_0^{|r_i|} t (t + gamma)^{p-2} dt, the objective IRLS decreases.
inline double smoothed_cost(std::span<const double> r, double p, const std::vector<double>* weights = nullptr,
                            double gamma = kIrlsSmoothing)
{
    auto phi = [&](double s) {
        if (p == 1.0)
            return s - gamma * std::log(s);
        return std::pow(s, p) / p - gamma * std::pow(s, p - 1.0) / (p - 1.0);
    };
    const double base = phi(gamma);
    double total = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double v = phi(std::abs(r[i]) + gamma) - base;
        total += weights ? (*weights)[i] * v : v;
    }
    return total;
}

struct IrlsOptions {
    double tol = 1e-10;
    std::size_t max_iter = 500;
};

namespace detail {

/// argmin sum_i w_i (a_i x - b_i)^2 by QR of sqrt(w) A.
inline std::vector<double> weighted_least_squares(const DenseMatrix& a, std::span<const double> b,
                                                  const std::vector<double>& w)
{
    DenseMatrix sa(a.rows(), a.cols());
    std::vector<double> sb(b.size());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double s = std::sqrt(w[i]);
        for (std::size_t j = 0; j < a.cols(); ++j)
            sa(i, j) = s * a(i, j);
        sb[i] = s * b[i];
    }
    return HouseholderQR(sa).solve(sb);
}

inline std::vector<double> residual(const DenseMatrix& a, std::span<const double> b, std::span<const double> x)
{
    auto r = matvec(a, x);
    for (std::size_t i = 0; i < r.size(); ++i)
        r[i] -= b[i];
    return r;
}

} // namespace detail

/// IRLS with weights (|r_i| + gamma)^{p-2}. Optional per-row cost weights w_i give
/// the objective sum_i w_i |r_i|^p. Non-convergence is reported, not thrown.
inline RegressionResult irls_solve(const RegressionProblem& prob, const std::optional<std::vector<double>>& weights = {},
                                   const IrlsOptions& opt = {})
{
    prob.validate(false);
    if (!(opt.tol > 0.0))
        throw ArgumentError("irls tolerance must be positive");
    const std::size_t n = prob.n();
    const double p = prob.p;
    std::vector<double> w = weights.value_or(std::vector<double>(n, 1.0));
    if (w.size() != n)
        throw ArgumentError("irls: weight vector length differs from n");
    for (double v : w)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw ArgumentError("irls: weights must be finite and nonnegative");
    const std::vector<double>* wp = weights ? &w : nullptr;

    RegressionResult res;
    res.method = "irls";
    res.x_hat = detail::weighted_least_squares(prob.a, prob.b, w);
    auto r = detail::residual(prob.a, prob.b, res.x_hat);
    double phi = smoothed_cost(r, p, wp);
    double cost = regression_cost(prob.a, prob.b, res.x_hat, p, wp);
    res.smoothed_costs.push_back(phi);
    std::vector<double> omega(n);
    for (std::size_t it = 1; it <= opt.max_iter; ++it) {
        for (std::size_t i = 0; i < n; ++i)
            omega[i] = w[i] * std::pow(std::abs(r[i]) + kIrlsSmoothing, p - 2.0);
        auto x = detail::weighted_least_squares(prob.a, prob.b, omega);
        auto rn = detail::residual(prob.a, prob.b, x);
        const double phin = smoothed_cost(rn, p, wp);
        res.iterations = it;
        if (phin > phi) {
            // Rounding-level increase: the majorizer step can no longer make progress.
            res.converged = phin <= phi * (1.0 + 1e-12);
            break;
        }
        const double costn = regression_cost(prob.a, prob.b, x, p, wp);
        const double change = std::abs(cost - costn) / std::max(cost, std::numeric_limits<double>::min());
        res.x_hat = std::move(x);
        r = std::move(rn);
        phi = phin;
        cost = costn;
        res.smoothed_costs.push_back(phi);
        if (change < opt.tol) {
            res.converged = true;
            break;
        }
    }
    if (opt.max_iter == 0)
        res.converged = false;
    res.cost = regression_cost(prob.a, prob.b, res.x_hat, p, wp);
    return res;
}

namespace detail {

inline EmbeddingSpec fit_spec(EmbeddingSpec spec, const RegressionProblem& prob, std::uint64_t seed)
{
    spec.n = prob.n();
    spec.d = prob.d();
    spec.seed = seed;
    if (spec.family != Family::countsketch && spec.family != Family::osnap && spec.family != Family::identity)
        spec.p = prob.p;
    return spec;
}

} // namespace detail

/// Solves min ||Pi A x - Pi b||_p and reports the cost on the original problem.
inline RegressionResult sketch_solve(const RegressionProblem& prob, const EmbeddingSpec& spec, std::uint64_t seed,
                                     const IrlsOptions& opt = {})
{
    prob.validate(false);
    const Embedding e = build(detail::fit_spec(spec, prob, seed));
    RegressionProblem sk{apply(e, prob.a), apply(e, std::span<const double>(prob.b)), prob.p};
    if (sk.a.rows() < sk.a.cols() || !HouseholderQR(sk.a).full_rank())
        throw ConditioningError("sketched matrix is rank deficient; re-run with a different seed");
    RegressionResult res = irls_solve(sk, std::nullopt, opt);
    res.method = "sketch_solve";
    res.seed = seed;
    res.cost = regression_cost(prob.a, prob.b, res.x_hat, prob.p);
    return res;
}

/// Default sample size t = 40 d ln d (at least d).
inline std::size_t default_sample_size(std::size_t d)
{
    const double t = 40.0 * static_cast<double>(d) * std::log(static_cast<double>(d));
    return std::max<std::size_t>(d, static_cast<std::size_t>(std::ceil(t)));
}

/// Sketch to get a well-conditioned basis U = A R^-1, keep row i independently with
/// q_i = min(1, t ||U_i||_p^p / ||U||_p^p), rescale kept rows by q_i^{-1/p}, solve.
inline RegressionResult precondition_sample_solve(const RegressionProblem& prob, const EmbeddingSpec& spec,
                                                  std::size_t t, std::uint64_t seed, const IrlsOptions& opt = {})
{
    prob.validate(false);
    const std::size_t n = prob.n(), d = prob.d();
    const double p = prob.p;
    if (t < d)
        throw ArgumentError("sample size t must be at least d");
    const DenseMatrix u = well_conditioned_basis(prob.a, p, spec, derive_seed(seed, "precondition"));

    std::vector<double> q(n, 1.0);
    if (t < n) {
        std::vector<double> mass(n);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (double v : u.row(i))
                s += std::pow(std::abs(v), p);
            mass[i] = s;
            total += s;
        }
        for (std::size_t i = 0; i < n; ++i)
            q[i] = std::min(1.0, static_cast<double>(t) * mass[i] / total);
    }

    RngStream keep(seed, "sample.rows");
    std::vector<std::size_t> kept;
    std::vector<double> scale;
    for (std::size_t i = 0; i < n; ++i) {
        if (q[i] >= 1.0) {
            kept.push_back(i);
            scale.push_back(1.0);
        } else if (q[i] > 0.0 && keep.uniform() < q[i]) {
            kept.push_back(i);
            scale.push_back(std::pow(q[i], -1.0 / p));
        }
    }
    if (kept.size() < d)
        throw ConditioningError("sampled only " + std::to_string(kept.size()) + " rows; re-run with a different seed");
    RegressionProblem sub{DenseMatrix(kept.size(), d), std::vector<double>(kept.size()), p};
    for (std::size_t k = 0; k < kept.size(); ++k) {
        const std::size_t i = kept[k];
        for (std::size_t j = 0; j < d; ++j)
            sub.a(k, j) = scale[k] * prob.a(i, j);
        sub.b[k] = scale[k] * prob.b[i];
    }
    if (!HouseholderQR(sub.a).full_rank())
        throw ConditioningError("sampled rows are rank deficient; re-run with a different seed");
    RegressionResult res = irls_solve(sub, std::nullopt, opt);
    res.method = "precondition_sample_solve";
    res.seed = seed;
    res.sampled_rows = kept.size();
    res.cost = regression_cost(prob.a, prob.b, res.x_hat, p);
    return res;
}

/// Gaussian A and x*, b = A x* + Laplace noise of unit scale.
inline RegressionProblem make_regression_problem(std::size_t n, std::size_t d, double p, std::uint64_t seed)
{
    if (n < d || d == 0)
        throw ArgumentError("regression problem needs n >= d >= 1");
    RngStream as(seed, "regress.A"), xs(seed, "regress.x"), es(seed, "regress.noise");
    RegressionProblem prob{DenseMatrix(n, d), std::vector<double>(n), p};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            prob.a(i, j) = as.gaussian();
    std::vector<double> x(d);
    for (auto& v : x)
        v = xs.gaussian();
    prob.b = matvec(prob.a, x);
    for (auto& v : prob.b)
        v += es.laplace();
    return prob;
}

/// A from MatrixMarket (.mtx) or dense text; b as a dense n x 1 file.
inline RegressionProblem load_regression_problem(const std::string& a_path, const std::string& b_path, double p)
{
    const bool mtx = a_path.size() >= 4 && a_path.compare(a_path.size() - 4, 4, ".mtx") == 0;
    DenseMatrix a = mtx ? read_matrix_market(a_path).to_dense() : read_dense(a_path);
    const DenseMatrix bm = read_dense(b_path);
    if (bm.cols() != 1)
        throw ArgumentError("b must be a single column");
    RegressionProblem prob{std::move(a), bm.col(0), p};
    prob.validate();
    return prob;
}

} // namespace psketch
