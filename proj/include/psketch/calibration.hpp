#pragma once

// Monte-Carlo calibration of the existential constants in the p-stable tail
// bounds, their on-disk form, and the tail-event estimators that use them.
//
//   C_p     : Pr[ ||a X||_p in [C^-1 ||a||_p, C ||a||_p] ] >= 0.99, X standard Gaussian
//   U_p     : Pr[ sum |X_i|^p <= U n ln n ] >= 1 - ln ln n / ln n for every n >= 3
//   L_p     : Pr[ sum |X_i|^p >= L n ln(n / ln T) ] >= 1 - 1/T for large n, T
//   alpha_p : alpha |C| stochastically dominates |X_p|^p
//   c_p     : Pr[X_p > t] ~ c_p t^-p
//   omega   : CountSketch bucket load on d^2 coordinates is at most omega d ln d

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "psketch/errors.hpp"
#include "psketch/numcore.hpp"
#include "psketch/rng.hpp"
#include "psketch/stable.hpp"

namespace psketch {

/// A calibrated value with its Monte-Carlo interval.
struct Estimate {
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

struct StableConstants {
    double p = 1.0;
    Estimate C, U, L, alpha, c, omega;
    std::uint64_t trials = 0;
    std::uint64_t seed = 0;
};

inline constexpr int kCalibrationVersion = 1;

class CalibrationConstants {
public:
    void set(const StableConstants& k) { table_[key(k.p)] = k; }

    bool has(double p) const { return table_.count(key(p)) != 0; }

    const StableConstants& at(double p) const
    {
        auto it = table_.find(key(p));
        if (it == table_.end())
            throw ArgumentError("no calibrated constants for p = " + std::to_string(p));
        return it->second;
    }

    std::vector<double> calibrated_p() const
    {
        std::vector<double> out;
        for (auto& [k, v] : table_)
            out.push_back(v.p);
        return out;
    }

    nlohmann::json to_json() const
    {
        nlohmann::json j = nlohmann::json::object();
        for (auto& [k, v] : table_) {
            auto est = [](const Estimate& e) { return nlohmann::json::array({e.lo, e.hi}); };
            j[format_p(v.p)] = {{"C_p", v.C.value},         {"C_p_ci", est(v.C)},         {"U_p", v.U.value},
                                {"U_p_ci", est(v.U)},       {"L_p", v.L.value},           {"L_p_ci", est(v.L)},
                                {"alpha_p", v.alpha.value}, {"alpha_p_ci", est(v.alpha)}, {"c_p", v.c.value},
                                {"c_p_ci", est(v.c)},       {"omega", v.omega.value},     {"omega_ci", est(v.omega)},
                                {"trials", v.trials},       {"seed", v.seed},             {"version", kCalibrationVersion}};
        }
        return j;
    }

    static CalibrationConstants from_json(const nlohmann::json& j)
    {
        CalibrationConstants out;
        if (!j.is_object())
            throw ArgumentError("calibration file must hold a JSON object keyed by p");
        for (auto it = j.begin(); it != j.end(); ++it) {
            const auto& e = it.value();
            if (!e.is_object())
                throw ArgumentError("calibration entry " + it.key() + " is not an object");
            if (e.value("version", 0) != kCalibrationVersion)
                throw ArgumentError("calibration entry " + it.key() + " has an unsupported version");
            try {
                out.set(parse_entry(it.key(), e));
            } catch (const nlohmann::json::exception& ex) {
                throw ArgumentError("calibration entry " + it.key() + ": " + ex.what());
            } catch (const std::invalid_argument&) {
                throw ArgumentError("calibration key " + it.key() + " is not a number");
            }
        }
        return out;
    }

    static CalibrationConstants load(const std::string& path)
    {
        std::ifstream f(path);
        if (!f)
            throw ArgumentError("cannot open calibration file " + path);
        try {
            return from_json(nlohmann::json::parse(f));
        } catch (const nlohmann::json::parse_error& e) {
            throw ArgumentError("calibration file " + path + " is not valid JSON: " + e.what());
        }
    }

    void save(const std::string& path) const
    {
        std::ofstream f(path);
        if (!f)
            throw ArgumentError("cannot write calibration file " + path);
        f << to_json().dump(2) << '\n';
    }

private:
    static StableConstants parse_entry(const std::string& key, const nlohmann::json& e)
    {
        StableConstants k;
        k.p = std::stod(key);
        auto read = [&](const char* name, const char* ci) {
            Estimate est;
            est.value = e.at(name).get<double>();
            est.lo = e.at(ci).at(0).get<double>();
            est.hi = e.at(ci).at(1).get<double>();
            if (!(est.value > 0.0) || !(est.lo <= est.hi))
                throw ArgumentError(std::string("calibration value ") + name + " must be positive with lo <= hi");
            return est;
        };
        k.C = read("C_p", "C_p_ci");
        k.U = read("U_p", "U_p_ci");
        k.L = read("L_p", "L_p_ci");
        k.alpha = read("alpha_p", "alpha_p_ci");
        k.c = read("c_p", "c_p_ci");
        k.omega = read("omega", "omega_ci");
        if (!(k.C.value > 1.0))
            throw ArgumentError("calibrated C_p must exceed 1");
        k.trials = e.at("trials").get<std::uint64_t>();
        k.seed = e.at("seed").get<std::uint64_t>();
        return k;
    }

    static long key(double p) { return std::lround(p * 1000.0); }
    static std::string format_p(double p)
    {
        std::ostringstream os;
        os << p;
        return os.str();
    }

    std::map<long, StableConstants> table_;
};

// ---------------------------------------------------------------------------
// Monte-Carlo primitives

/// sum_i |X_i|^p over n i.i.d. unit p-stable draws (standard Cauchy at p = 1).
inline double stable_power_sum(double p, std::size_t n, RngStream& s)
{
    double sum = 0.0;
    if (p == 1.0) {
        for (std::size_t i = 0; i < n; ++i)
            sum += std::abs(draw_cauchy(s));
    } else {
        for (std::size_t i = 0; i < n; ++i)
            sum += std::pow(std::abs(draw_pstable(p, s)), p);
    }
    return sum;
}

inline double upper_tail_target(std::size_t n)
{
    const double ln = std::log(static_cast<double>(n));
    return 1.0 - std::log(ln) / ln;
}

inline double lower_tail_scale(std::size_t n, double T)
{
    const double nn = static_cast<double>(n);
    return nn * std::log(nn / std::log(T));
}

namespace detail {

/// Order-statistic interval for a quantile at level q from a sorted sample.
inline Estimate quantile_with_ci(const std::vector<double>& sorted, double q)
{
    const double n = static_cast<double>(sorted.size());
    const double half = 2.0 * std::sqrt(n * q * (1.0 - q)) / n;
    return {sorted_quantile(sorted, q), sorted_quantile(sorted, q - half), sorted_quantile(sorted, q + half)};
}

/// Smallest C with Pr[R < 1/C] + Pr[R > C] <= miss on a sorted positive sample.
inline double two_sided_ratio_bound(const std::vector<double>& sorted, double miss)
{
    auto misses = [&](double c) {
        const auto below = std::lower_bound(sorted.begin(), sorted.end(), 1.0 / c) - sorted.begin();
        const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), c);
        return static_cast<double>(below + above) / static_cast<double>(sorted.size());
    };
    double lo = 1.0, hi = 2.0;
    while (misses(hi) > miss)
        hi *= 2.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (misses(mid) > miss ? lo : hi) = mid;
    }
    return hi;
}

} // namespace detail

/// Grid of n values over which U_p must hold ("for any n >= 3").
inline std::vector<std::size_t> default_upper_grid()
{
    return {3, 4, 5, 6, 8, 10, 16, 32, 100, 316, 1000, 3162, 10000};
}

/// U_p as the largest (1 - ln ln n / ln n)-quantile of sum/(n ln n) over the grid.
inline Estimate calibrate_upper(double p, RngStream stream, std::size_t trials,
                                const std::vector<std::size_t>& grid = default_upper_grid())
{
    Estimate best{0.0, 0.0, 0.0};
    for (std::size_t n : grid) {
        RngStream s = stream.child(n);
        std::vector<double> r(trials);
        const double scale = static_cast<double>(n) * std::log(static_cast<double>(n));
        for (auto& x : r)
            x = stable_power_sum(p, n, s) / scale;
        std::sort(r.begin(), r.end());
        const Estimate e = detail::quantile_with_ci(r, upper_tail_target(n));
        if (e.value > best.value)
            best = e;
    }
    return best;
}

/// L_p as the smallest (1/T)-quantile of sum/(n ln(n/ln T)) over n and T grids.
inline Estimate calibrate_lower(double p, RngStream stream, std::size_t trials,
                                const std::vector<std::size_t>& n_grid = {1000, 3162, 10000},
                                const std::vector<double>& t_grid = {100.0, 1000.0})
{
    Estimate best{std::numeric_limits<double>::infinity(), 0.0, 0.0};
    for (std::size_t n : n_grid) {
        RngStream s = stream.child(n);
        std::vector<double> sums(trials);
        for (auto& x : sums)
            x = stable_power_sum(p, n, s);
        for (double T : t_grid) {
            std::vector<double> r(sums);
            const double scale = lower_tail_scale(n, T);
            for (auto& x : r)
                x /= scale;
            std::sort(r.begin(), r.end());
            const Estimate e = detail::quantile_with_ci(r, 1.0 / T);
            if (e.value < best.value)
                best = e;
        }
    }
    return best;
}

/// C_p over a family of coefficient vectors, including the single-coordinate and
/// fully dependent cases, which are the widest.
inline Estimate calibrate_weighted_gaussian(double p, RngStream stream, std::size_t trials)
{
    struct Case {
        std::vector<double> a;
        bool dependent;
    };
    std::vector<Case> cases;
    cases.push_back({{1.0}, false});
    for (std::size_t k : {2u, 4u, 16u, 256u})
        cases.push_back({std::vector<double>(k, 1.0), false});
    cases.push_back({std::vector<double>(16, 1.0), true});
    {
        RngStream ga = stream.child("coefficients");
        std::vector<double> a(64);
        for (auto& x : a)
            x = ga.gaussian();
        cases.push_back({a, false});
    }
    Estimate best{0.0, 0.0, 0.0};
    std::size_t idx = 0;
    for (const auto& c : cases) {
        const double an = vector_norm(c.a, p);
        std::vector<double> halves[2];
        RngStream s = stream.child(idx++);
        for (std::size_t t = 0; t < trials; ++t) {
            double sum = 0.0;
            const double shared = c.dependent ? s.gaussian() : 0.0;
            for (double ai : c.a) {
                const double x = c.dependent ? shared : s.gaussian();
                sum += std::pow(std::abs(ai * x), p);
            }
            halves[t % 2].push_back(std::pow(sum, 1.0 / p) / an);
        }
        std::vector<double> all = halves[0];
        all.insert(all.end(), halves[1].begin(), halves[1].end());
        for (auto* v : {&halves[0], &halves[1], &all})
            std::sort(v->begin(), v->end());
        const double v0 = detail::two_sided_ratio_bound(halves[0], 0.01);
        const double v1 = detail::two_sided_ratio_bound(halves[1], 0.01);
        const double va = detail::two_sided_ratio_bound(all, 0.01);
        if (va > best.value)
            best = {va, std::min(v0, v1), std::max(v0, v1)};
    }
    return best;
}

/// alpha_p = sup_u Q_{|X_p|^p}(u) / Q_{|C|}(u), the Cauchy quantile taken exactly.
inline Estimate calibrate_dominance(double p, RngStream stream, std::size_t draws)
{
    if (p == 1.0)
        return {1.0, 1.0, 1.0};
    std::vector<double> halves[2];
    for (std::size_t i = 0; i < draws; ++i)
        halves[i % 2].push_back(std::pow(std::abs(draw_pstable(p, stream)), p));
    auto sup_ratio = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        const double n = static_cast<double>(v.size());
        double best = 0.0;
        // Stay 50 order statistics away from the maximum to keep the ratio stable.
        const double top = 1.0 - 50.0 / n;
        for (int k = 1; k <= 2000; ++k) {
            const double u = top * k / 2000.0;
            const double qc = std::tan(std::numbers::pi * u / 2.0);
            best = std::max(best, sorted_quantile(v, u) / qc);
        }
        return best;
    };
    std::vector<double> all = halves[0];
    all.insert(all.end(), halves[1].begin(), halves[1].end());
    const double a0 = sup_ratio(halves[0]);
    const double a1 = sup_ratio(halves[1]);
    const double aa = sup_ratio(all);
    return {aa, std::min(a0, a1), std::max(a0, a1)};
}

/// c_p from the symmetric tail frequency Pr[|X| > t] / 2 scaled by t^p.
inline Estimate calibrate_tail_constant(double p, RngStream stream, std::size_t draws, double t = 100.0)
{
    std::size_t hits = 0;
    for (std::size_t i = 0; i < draws; ++i)
        hits += std::abs(draw_pstable(p, stream)) > t;
    const double f = static_cast<double>(hits) / static_cast<double>(draws);
    const double se = std::sqrt(f * (1.0 - f) / static_cast<double>(draws));
    const double k = 0.5 * std::pow(t, p);
    return {k * f, k * (f - 2.0 * se), k * (f + 2.0 * se)};
}

/// omega = max over trials and d of (max CountSketch bucket load on d^2 coordinates) / (d ln d).
inline Estimate calibrate_bucket_load(RngStream stream, std::size_t trials,
                                      const std::vector<std::size_t>& d_grid = {4, 8, 16, 32})
{
    double best = 0.0, typical = 0.0;
    for (std::size_t d : d_grid) {
        RngStream s = stream.child(d);
        const std::size_t m = d * d;
        std::vector<std::size_t> load(m);
        std::vector<double> ratios;
        for (std::size_t t = 0; t < trials; ++t) {
            std::fill(load.begin(), load.end(), 0);
            for (std::size_t i = 0; i < m; ++i)
                ++load[s.uniform_index(m)];
            const double r = static_cast<double>(*std::max_element(load.begin(), load.end())) /
                             (static_cast<double>(d) * std::log(static_cast<double>(d)));
            ratios.push_back(r);
        }
        std::sort(ratios.begin(), ratios.end());
        best = std::max(best, ratios.back());
        typical = std::max(typical, sorted_quantile(ratios, 0.5));
    }
    return {best, typical, best};
}

struct CalibrationBudget {
    std::size_t tail_trials = 20000;
    std::size_t gaussian_trials = 200000;
    std::size_t dominance_draws = 1000000;
    std::size_t tail_constant_draws = 10000000;
    std::size_t bucket_trials = 2000;
};

inline StableConstants calibrate(double p, std::uint64_t seed, const CalibrationBudget& b = {})
{
    StableParams(p).validate();
    if (!(p < 2.0))
        throw ArgumentError("tail constants are calibrated for 1 <= p < 2");
    RngStream root(seed, "calibration");
    const std::uint64_t tag = static_cast<std::uint64_t>(std::lround(p * 1000.0));
    RngStream ps = root.child(tag);
    StableConstants k;
    k.p = p;
    k.seed = seed;
    k.trials = b.tail_trials;
    k.U = calibrate_upper(p, ps.child("upper"), b.tail_trials);
    k.L = calibrate_lower(p, ps.child("lower"), b.tail_trials);
    k.C = calibrate_weighted_gaussian(p, ps.child("gaussian"), b.gaussian_trials);
    k.alpha = calibrate_dominance(p, ps.child("dominance"), b.dominance_draws);
    k.c = calibrate_tail_constant(p, ps.child("tail"), b.tail_constant_draws);
    k.omega = calibrate_bucket_load(root.child("omega"), b.bucket_trials);
    return k;
}

// ---------------------------------------------------------------------------
// Tail-event reports

enum class TailKind { cauchy_sum_upper, pstable_sum_lower, weighted_gaussian };

inline TailKind tail_kind_from_string(const std::string& s)
{
    if (s == "cauchy_sum_upper")
        return TailKind::cauchy_sum_upper;
    if (s == "pstable_sum_lower")
        return TailKind::pstable_sum_lower;
    if (s == "weighted_gaussian")
        return TailKind::weighted_gaussian;
    throw ArgumentError("unknown tail kind '" + s + "'");
}

inline std::string to_string(TailKind k)
{
    switch (k) {
    case TailKind::cauchy_sum_upper: return "cauchy_sum_upper";
    case TailKind::pstable_sum_lower: return "pstable_sum_lower";
    case TailKind::weighted_gaussian: return "weighted_gaussian";
    }
    return "?";
}

struct TailOptions {
    double T = 100.0;                      // pstable_sum_lower
    std::optional<std::vector<double>> a;  // weighted_gaussian coefficients; default e_1 in R^n
    std::optional<double> C;               // overrides the calibrated C_p
    bool dependent = false;                // weighted_gaussian: one shared Gaussian for all coordinates
};

struct TailReport {
    TailKind kind;
    std::size_t n = 0;
    double p = 1.0;
    std::size_t trials = 0;
    std::size_t successes = 0;
    double probability = 0.0;  // empirical event frequency
    double std_error = 0.0;    // binomial standard error of probability
    double target = 0.0;       // probability the lemma guarantees
    double bound = 0.0;        // statistic threshold tested (C for weighted_gaussian)

    /// Frequency at least target minus k standard errors of a Bernoulli(target) mean.
    bool meets_target(double k = 2.0) const
    {
        const double se = std::sqrt(target * (1.0 - target) / static_cast<double>(trials));
        return probability >= target - k * se;
    }
};

/// One tail event: the statistic, the threshold it is compared with, and the outcome.
struct TailDraw {
    double statistic = 0.0;
    double bound = 0.0;
    bool event = false;
};

/// Parameters of a tail experiment after validation.
struct TailSetup {
    TailKind kind;
    std::size_t n = 0;
    double p = 1.0;
    double bound = 0.0;
    double target = 0.0;
    std::vector<double> a; // weighted_gaussian only
    double a_norm = 1.0;
    bool dependent = false;
};

inline TailSetup make_tail_setup(TailKind kind, std::size_t n, double p, const CalibrationConstants& constants,
                                 const TailOptions& opt = {})
{
    if (n < 3)
        throw ArgumentError("tail experiments need n >= 3");
    StableParams(p).validate();
    TailSetup t;
    t.kind = kind;
    t.n = n;
    t.p = p;
    switch (kind) {
    case TailKind::cauchy_sum_upper:
        if (!(p < 2.0))
            throw ArgumentError("cauchy_sum_upper needs p < 2");
        t.bound = constants.at(p).U.value * static_cast<double>(n) * std::log(static_cast<double>(n));
        t.target = upper_tail_target(n);
        break;
    case TailKind::pstable_sum_lower:
        if (!(p < 2.0))
            throw ArgumentError("pstable_sum_lower needs p < 2");
        if (!(opt.T > std::exp(1.0)) || std::log(opt.T) >= static_cast<double>(n))
            throw ArgumentError("pstable_sum_lower needs e < T and ln T < n");
        t.bound = constants.at(p).L.value * lower_tail_scale(n, opt.T);
        t.target = 1.0 - 1.0 / opt.T;
        break;
    case TailKind::weighted_gaussian: {
        t.a = opt.a.value_or(std::vector<double>{});
        if (t.a.empty()) {
            t.a.assign(n, 0.0);
            t.a[0] = 1.0;
        }
        t.n = t.a.size();
        t.bound = opt.C ? *opt.C : constants.at(p).C.value;
        if (!(t.bound > 1.0))
            throw ArgumentError("weighted_gaussian needs C > 1");
        t.a_norm = vector_norm(t.a, p);
        if (t.a_norm == 0.0)
            throw ArgumentError("weighted_gaussian needs a nonzero coefficient vector");
        t.target = 0.99;
        t.dependent = opt.dependent;
        break;
    }
    }
    return t;
}

/// weighted_gaussian reports ||a X||_p / ||a||_p against [1/C, C]; the sums report
/// sum |X_i|^p against their thresholds.
inline TailDraw draw_tail_event(const TailSetup& t, RngStream& stream)
{
    TailDraw r;
    r.bound = t.bound;
    switch (t.kind) {
    case TailKind::cauchy_sum_upper:
        r.statistic = stable_power_sum(t.p, t.n, stream);
        r.event = r.statistic <= t.bound;
        break;
    case TailKind::pstable_sum_lower:
        r.statistic = stable_power_sum(t.p, t.n, stream);
        r.event = r.statistic >= t.bound;
        break;
    case TailKind::weighted_gaussian: {
        double sum = 0.0;
        const double shared = t.dependent ? stream.gaussian() : 0.0;
        for (double ai : t.a) {
            if (ai == 0.0)
                continue;
            const double x = t.dependent ? shared : stream.gaussian();
            sum += std::pow(std::abs(ai * x), t.p);
        }
        r.statistic = std::pow(sum, 1.0 / t.p) / t.a_norm;
        r.event = r.statistic >= 1.0 / t.bound && r.statistic <= t.bound;
        break;
    }
    }
    return r;
}

inline TailReport mc_tail_report(TailKind kind, std::size_t n, double p, std::size_t trials, RngStream stream,
                                 const CalibrationConstants& constants, const TailOptions& opt = {})
{
    if (trials < 100)
        throw ArgumentError("tail reports need at least 100 trials");
    const TailSetup setup = make_tail_setup(kind, n, p, constants, opt);
    TailReport r;
    r.kind = kind;
    r.n = setup.n;
    r.p = p;
    r.trials = trials;
    r.bound = setup.bound;
    r.target = setup.target;
    for (std::size_t t = 0; t < trials; ++t)
        r.successes += draw_tail_event(setup, stream).event;
    r.probability = static_cast<double>(r.successes) / static_cast<double>(trials);
    r.std_error = std::sqrt(r.probability * (1.0 - r.probability) / static_cast<double>(trials));
    return r;
}

/// Calibration file: $PSKETCH_CALIBRATION, else the path compiled in, else a
/// path relative to the working directory.
inline std::string default_calibration_path()
{
    if (const char* env = std::getenv("PSKETCH_CALIBRATION"); env && *env)
        return env;
#ifdef PSKETCH_CALIBRATION_FILE
    return PSKETCH_CALIBRATION_FILE;
#else
    return "data/calibration_constants.json";
#endif
}

} // namespace psketch
