#pragma once

// Distortion measurement. For p = 2 the exact value comes from singular values
// of Pi Q. For other p we search witness directions x and report the extreme
// ratios ||Pi A x||_p / ||A x||_p found, which bound the true distortion from
// below.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "psketch/embeddings.hpp"
#include "psketch/errors.hpp"
#include "psketch/linalg.hpp"
#include "psketch/numcore.hpp"
#include "psketch/rng.hpp"

namespace psketch {

struct Witness {
    std::vector<double> x;
    double ratio = 0.0;
    std::string kind;
    std::size_t index = 0; // position in the evaluation sequence
};

struct DistortionReport {
    double p = 2.0;
    double min_ratio = 0.0;
    double max_ratio = 0.0;
    double kappa_hat = 1.0;
    bool exact = false; // false: kappa_hat is a lower bound from witnesses
    std::map<std::string, std::size_t> witness_counts;
    std::size_t skipped = 0; // witnesses with A x = 0
    Witness contraction;
    Witness dilation;
    std::vector<Witness> top_contractions; // smallest ratios first
    std::vector<Witness> top_dilations;    // largest ratios first
};

inline void to_json(nlohmann::json& j, const Witness& w)
{
    j = nlohmann::json{{"x", w.x}, {"ratio", w.ratio}, {"kind", w.kind}, {"index", w.index}};
}

inline void to_json(nlohmann::json& j, const DistortionReport& r)
{
    j = nlohmann::json{{"p", r.p},
                       {"min_ratio", r.min_ratio},
                       {"max_ratio", r.max_ratio},
                       {"kappa_hat", r.kappa_hat},
                       {"estimate", r.exact ? "exact" : "empirical lower bound"},
                       {"witness_counts", r.witness_counts},
                       {"skipped", r.skipped},
                       {"contraction_witness", r.contraction},
                       {"dilation_witness", r.dilation}};
}

// ---------------------------------------------------------------------------
// Net directions

/// Points on the surface of the cube [-1, 1]^d at spacing <= eps / d^{1/p},
/// normalized to unit l_p norm. Any unit y lies within eps of some point.
inline std::vector<std::vector<double>> net_directions(std::size_t d, double p, double eps)
{
    if (d == 0)
        throw ArgumentError("net_directions needs d >= 1");
    if (!(eps > 0.0))
        throw ArgumentError("net granularity eps must be positive");
    if (d > 3 || std::pow(3.0 / eps, static_cast<double>(d)) > 1e7)
        throw ResourceError("net too large: needs d <= 3 and (3/eps)^d <= 1e7");
    if (d == 1)
        return {{1.0}, {-1.0}};
    const double h = eps / std::pow(static_cast<double>(d), 1.0 / p);
    const auto m = static_cast<std::size_t>(std::ceil(2.0 / h));
    std::vector<std::vector<double>> out;
    std::vector<std::size_t> idx(d, 0);
    std::vector<double> y(d);
    for (;;) {
        bool on_surface = false;
        for (std::size_t k = 0; k < d; ++k) {
            y[k] = -1.0 + 2.0 * static_cast<double>(idx[k]) / static_cast<double>(m);
            on_surface = on_surface || idx[k] == 0 || idx[k] == m;
        }
        if (on_surface) {
            const double nrm = vector_norm(y, p);
            std::vector<double> v(y);
            for (auto& t : v)
                t /= nrm;
            out.push_back(std::move(v));
        }
        std::size_t k = 0;
        while (k < d && ++idx[k] > m)
            idx[k++] = 0;
        if (k == d)
            break;
    }
    return out;
}

inline std::vector<std::vector<double>> net_directions(const DenseMatrix& u, double p, double eps)
{
    return net_directions(u.cols(), p, eps);
}

// ---------------------------------------------------------------------------
// Witness search over x of ||N x||_{qn} / ||D x||_{qd}

struct SearchOptions {
    bool coordinates = true;
    bool gaussian = true;
    bool sparse = true;
    bool net = true;
    bool hill_climb = true;
    bool track_min = true;
    bool track_max = true;
    double net_eps = 0.0; // 0: 0.1 for d <= 2, 0.3 for d = 3
    std::size_t hill_iterations = 100;
    std::size_t top_k = 5;
};

struct SearchResult {
    Witness min, max;
    std::vector<Witness> top_min, top_max;
    std::map<std::string, std::size_t> counts;
    std::size_t skipped = 0;
    std::size_t seeds = 0;
};

class RatioSearch {
public:
    RatioSearch(const DenseMatrix& num, double q_num, const DenseMatrix& den, double q_den, SearchOptions opt = {})
        : d_(num.cols()), rn_(num.rows()), rd_(den.rows()), qn_(q_num), qd_(q_den), opt_(opt)
    {
        if (den.cols() != d_)
            throw ArgumentError("witness search: column counts differ");
        if (d_ == 0)
            throw ArgumentError("witness search needs d >= 1");
        ncol_ = column_major(num);
        dcol_ = column_major(den);
    }

    /// ratio at x, or NaN when the denominator vanishes.
    double ratio(std::span<const double> x) const
    {
        std::vector<double> yn(rn_, 0.0), yd(rd_, 0.0);
        for (std::size_t k = 0; k < d_; ++k)
            axpy(x[k], k, yn, yd);
        return ratio_of(yn, yd);
    }

    SearchResult run(std::size_t budget, std::uint64_t seed) const
    {
        SearchResult res;
        res.min.ratio = std::numeric_limits<double>::infinity();
        res.max.ratio = -std::numeric_limits<double>::infinity();
        const RngStream root(seed, "witness");
        std::vector<std::vector<double>> net;
        if (opt_.net && d_ <= 3) {
            const double eps = opt_.net_eps > 0.0 ? opt_.net_eps : (d_ <= 2 ? 0.1 : 0.3);
            net = net_directions(d_, qd_ == std::numeric_limits<double>::infinity() ? 2.0 : qd_, eps);
        }
        const std::size_t coords = opt_.coordinates ? d_ : 0;
        std::size_t eval_index = 0;
        for (std::size_t k = 0; k < budget; ++k) {
            std::vector<double> x(d_, 0.0);
            std::string kind;
            RngStream s = root.child(static_cast<std::uint64_t>(k));
            if (k < coords) {
                x[k] = 1.0;
                kind = "coordinate";
            } else if (k - coords < net.size()) {
                x = net[k - coords];
                kind = "net";
            } else {
                kind = random_witness(k - coords - net.size(), s, x);
            }
            ++res.seeds;
            const double r = ratio(x);
            if (std::isnan(r)) {
                ++res.skipped;
                continue;
            }
            ++res.counts[kind];
            Witness w{x, r, kind, eval_index++};
            const bool new_max = opt_.track_max && r > res.max.ratio;
            const bool new_min = opt_.track_min && r < res.min.ratio;
            offer(res, w);
            if (opt_.hill_climb && new_max)
                refine(res, w, +1.0, eval_index);
            if (opt_.hill_climb && new_min)
                refine(res, w, -1.0, eval_index);
        }
        return res;
    }

private:
    static std::vector<double> column_major(const DenseMatrix& a)
    {
        std::vector<double> c(a.rows() * a.cols());
        for (std::size_t i = 0; i < a.rows(); ++i)
            for (std::size_t j = 0; j < a.cols(); ++j)
                c[j * a.rows() + i] = a(i, j);
        return c;
    }

    void axpy(double t, std::size_t k, std::vector<double>& yn, std::vector<double>& yd) const
    {
        if (t == 0.0)
            return;
        const double* cn = ncol_.data() + k * rn_;
        const double* cd = dcol_.data() + k * rd_;
        for (std::size_t i = 0; i < rn_; ++i)
            yn[i] += t * cn[i];
        for (std::size_t i = 0; i < rd_; ++i)
            yd[i] += t * cd[i];
    }

    double ratio_of(const std::vector<double>& yn, const std::vector<double>& yd) const
    {
        const double den = vector_norm(yd, qd_);
        if (den == 0.0)
            return std::numeric_limits<double>::quiet_NaN();
        return vector_norm(yn, qn_) / den;
    }

    std::string random_witness(std::size_t j, RngStream& s, std::vector<double>& x) const
    {
        // Cycle gaussian, 2-sparse, gaussian, 1-sparse among enabled kinds.
        static const char* cycle[] = {"gaussian", "sparse2", "gaussian", "sparse1"};
        std::string kind = cycle[j % 4];
        if (!opt_.sparse || d_ == 1)
            kind = "gaussian";
        if (!opt_.gaussian && opt_.sparse)
            kind = (j % 2 == 0 || d_ == 1) ? "sparse1" : "sparse2";
        if (!opt_.gaussian && !opt_.sparse)
            throw ArgumentError("witness budget exceeds the enabled deterministic witnesses");
        if (kind == "gaussian") {
            for (auto& t : x)
                t = s.gaussian();
        } else if (kind == "sparse1") {
            x[s.uniform_index(d_)] = s.gaussian();
        } else {
            const std::size_t a = s.uniform_index(d_);
            std::size_t b = s.uniform_index(d_ - 1);
            if (b >= a)
                ++b;
            x[a] = s.gaussian();
            x[b] = s.gaussian();
        }
        return kind;
    }

    void offer(SearchResult& res, const Witness& w) const
    {
        if (opt_.track_max && w.ratio > res.max.ratio)
            res.max = w;
        if (opt_.track_min && w.ratio < res.min.ratio)
            res.min = w;
        auto insert = [&](std::vector<Witness>& top, auto better) {
            auto it = std::find_if(top.begin(), top.end(), [&](const Witness& o) { return better(w.ratio, o.ratio); });
            if (static_cast<std::size_t>(it - top.begin()) >= opt_.top_k)
                return;
            top.insert(it, w);
            if (top.size() > opt_.top_k)
                top.pop_back();
        };
        if (opt_.track_max)
            insert(res.top_max, [](double a, double b) { return a > b; });
        if (opt_.track_min)
            insert(res.top_min, [](double a, double b) { return a < b; });
    }

    /// Coordinate-wise ascent of dir * ratio from w; accepts strict improvements only.
    void refine(SearchResult& res, const Witness& w, double dir, std::size_t& eval_index) const
    {
        std::vector<double> x = w.x;
        std::vector<double> yn(rn_, 0.0), yd(rd_, 0.0);
        for (std::size_t k = 0; k < d_; ++k)
            axpy(x[k], k, yn, yd);
        double best = w.ratio;
        double xmax = 0.0;
        for (double t : x)
            xmax = std::max(xmax, std::abs(t));
        std::vector<double> step(d_, 0.25 * xmax);
        std::vector<double> tn(rn_), td(rd_);
        bool moved = false;
        for (std::size_t it = 0; it < opt_.hill_iterations; ++it) {
            const std::size_t k = it % d_;
            bool improved = false;
            for (double sgn : {1.0, -1.0}) {
                const double delta = sgn * step[k];
                tn = yn;
                td = yd;
                const double* cn = ncol_.data() + k * rn_;
                const double* cd = dcol_.data() + k * rd_;
                for (std::size_t i = 0; i < rn_; ++i)
                    tn[i] += delta * cn[i];
                for (std::size_t i = 0; i < rd_; ++i)
                    td[i] += delta * cd[i];
                const double r = ratio_of(tn, td);
                if (!std::isnan(r) && dir * r > dir * best) {
                    best = r;
                    x[k] += delta;
                    yn.swap(tn);
                    yd.swap(td);
                    improved = true;
                    break;
                }
            }
            step[k] *= improved ? 1.5 : 0.5;
            moved = moved || improved;
        }
        if (!moved)
            return;
        // Record the ratio recomputed from scratch so the witness replays exactly.
        const double r = ratio(x);
        ++res.counts["hill_climb"];
        offer(res, Witness{x, r, "hill_climb", eval_index++});
    }

    std::size_t d_, rn_, rd_;
    double qn_, qd_;
    SearchOptions opt_;
    std::vector<double> ncol_, dcol_;
};

// ---------------------------------------------------------------------------
// Distortion reports

/// Exact l2 distortion from the singular values of Pi Q, where A = Q R.
/// Takes Pi A and A; Pi Q = (Pi A) R^-1.
inline DistortionReport exact_l2_distortion(const DenseMatrix& pia, const DenseMatrix& a)
{
    if (pia.cols() != a.cols())
        throw ArgumentError("exact_l2_distortion: Pi A and A have different column counts");
    if (a.rows() < a.cols())
        throw ConditioningError("A has fewer rows than columns");
    HouseholderQR qr(a);
    if (!qr.full_rank())
        throw ConditioningError("A is rank deficient");
    const DenseMatrix r = qr.r();
    const DenseMatrix piq = solve_right_upper(pia, r);

    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMat> m(piq.data().data(), static_cast<Eigen::Index>(piq.rows()),
                               static_cast<Eigen::Index>(piq.cols()));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const std::size_t d = a.cols();

    DistortionReport rep;
    rep.p = 2.0;
    rep.exact = true;
    // With fewer sketch rows than d the smallest singular value is zero.
    rep.max_ratio = s.size() > 0 ? s(0) : 0.0;
    rep.min_ratio = static_cast<std::size_t>(s.size()) == d ? s(s.size() - 1) : 0.0;
    rep.kappa_hat = rep.min_ratio > 0.0 ? rep.max_ratio / rep.min_ratio : std::numeric_limits<double>::infinity();
    auto witness = [&](Eigen::Index col, double ratio) {
        std::vector<double> v(d);
        for (std::size_t k = 0; k < d; ++k)
            v[k] = svd.matrixV()(static_cast<Eigen::Index>(k), col);
        Witness w;
        w.x = HouseholderQR::solve_upper(r, v); // x = R^-1 v gives Q v = A x
        w.ratio = ratio;
        w.kind = "singular_vector";
        return w;
    };
    rep.dilation = witness(0, rep.max_ratio);
    rep.contraction = witness(static_cast<Eigen::Index>(d) - 1, rep.min_ratio);
    rep.witness_counts["singular_vector"] = 2;
    return rep;
}

inline DistortionReport exact_l2_distortion(const Embedding& e, const DenseMatrix& a)
{
    return exact_l2_distortion(apply(e, a), a);
}

struct DistortionOptions {
    std::size_t budget = 1000;
    std::uint64_t seed = 0;
    SearchOptions search;
};

/// Extreme ratios ||Pi A x||_p / ||A x||_p over witness directions, given Pi A.
inline DistortionReport empirical_lp_distortion(const DenseMatrix& pia, const DenseMatrix& a, double p,
                                                const DistortionOptions& opt = {})
{
    PNorm pn(p);
    if (opt.budget < 2 * a.cols())
        throw ArgumentError("witness budget must be at least 2d");
    RatioSearch search(pia, pn.p(), a, pn.p(), opt.search);
    SearchResult res = search.run(opt.budget, opt.seed);
    DistortionReport rep;
    rep.p = p;
    rep.exact = false;
    rep.witness_counts = res.counts;
    rep.skipped = res.skipped;
    if (res.top_max.empty())
        throw DegenerateInputError("every witness direction has A x = 0");
    rep.max_ratio = res.max.ratio;
    rep.min_ratio = res.min.ratio;
    rep.kappa_hat = rep.min_ratio > 0.0 ? rep.max_ratio / rep.min_ratio : std::numeric_limits<double>::infinity();
    rep.dilation = res.max;
    rep.contraction = res.min;
    rep.top_dilations = res.top_max;
    rep.top_contractions = res.top_min;
    return rep;
}

inline DistortionReport empirical_lp_distortion(const Embedding& e, const DenseMatrix& a, double p,
                                                const DistortionOptions& opt = {})
{
    return empirical_lp_distortion(apply(e, a), a, p, opt);
}

inline DistortionReport empirical_lp_distortion(const Embedding& e, const SparseMatrix& a, double p,
                                                const DistortionOptions& opt = {})
{
    return empirical_lp_distortion(apply(e, a), a.to_dense(), p, opt);
}

/// Recomputes ||Pi A x||_p / ||A x||_p for a recorded witness.
inline double replay_ratio(const DenseMatrix& pia, const DenseMatrix& a, double p, std::span<const double> x)
{
    const auto num = matvec(pia, x);
    const auto den = matvec(a, x);
    return vector_norm(num, p) / vector_norm(den, p);
}

} // namespace psketch
