#pragma once

// Experiment configs, per-trial execution, parameter sweeps and CSV reports.
//
// Every row is produced by run_trial(config, trial) from the seed
// derive_seed(config.seed, trial) alone, so rows can be replayed individually
// and results do not depend on the number of worker threads.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "json.hpp"

#include "psketch/calibration.hpp"
#include "psketch/distortion.hpp"
#include "psketch/embeddings.hpp"
#include "psketch/errors.hpp"
#include "psketch/hardgen.hpp"
#include "psketch/linalg.hpp"
#include "psketch/regress.hpp"

namespace psketch {

inline constexpr int kCsvSchemaVersion = 1;

enum class ExperimentKind { distort, tails, hardstress, rankdrop, regress, sweep };

inline std::string to_string(ExperimentKind k)
{
    switch (k) {
    case ExperimentKind::distort: return "distort";
    case ExperimentKind::tails: return "tails";
    case ExperimentKind::hardstress: return "hardstress";
    case ExperimentKind::rankdrop: return "rankdrop";
    case ExperimentKind::regress: return "regress";
    case ExperimentKind::sweep: return "sweep";
    }
    return "?";
}

inline ExperimentKind experiment_kind_from_string(const std::string& s)
{
    for (auto k : {ExperimentKind::distort, ExperimentKind::tails, ExperimentKind::hardstress, ExperimentKind::rankdrop,
                   ExperimentKind::regress, ExperimentKind::sweep})
        if (to_string(k) == s)
            return k;
    throw ValidationError("unknown experiment kind '" + s + "'");
}

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::distort;
    std::optional<EmbeddingSpec> embedding;
    double p = 1.0;
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t n_per_d = 0;           // hard instances: n = n_per_d * d when n is 0
    std::string instance = "gaussian"; // gaussian | hard
    bool uneven_blocks = false;
    std::size_t trials = 1;
    std::uint64_t seed = 0;
    std::string out;
    std::optional<unsigned> threads;

    std::size_t budget = 1000; // distort, hardstress
    bool exact_l2 = false;

    std::string tail = "cauchy_sum_upper";
    double T = 100.0;
    std::optional<double> C;
    std::string calibration; // empty: default_calibration_path()

    std::string method = "precondition_sample"; // irls | sketch_solve | precondition_sample
    std::optional<std::size_t> sample_size;

    ExperimentKind over = ExperimentKind::distort; // sweep
    std::map<std::string, std::vector<double>> grid;

    std::size_t instance_n() const { return n != 0 ? n : n_per_d * d; }

    /// Embedding spec with n, d, p filled from the instance.
    EmbeddingSpec embedding_for_instance() const
    {
        EmbeddingSpec s = embedding.value_or(EmbeddingSpec{});
        s.n = instance_n();
        s.d = d;
        return s;
    }

    std::vector<std::string> problems() const;
    void validate() const
    {
        auto errs = problems();
        if (errs.empty())
            return;
        std::string msg = "invalid experiment config:";
        for (auto& e : errs)
            msg += "\n  - " + e;
        throw ValidationError(msg);
    }
};

inline const std::vector<std::string>& sweep_keys()
{
    static const std::vector<std::string> k = {"d",   "n",     "n_per_d",   "p",    "B",      "eps",
                                               "alpha", "row_const", "rows", "budget", "sample_size"};
    return k;
}

inline std::vector<std::string> ExperimentConfig::problems() const
{
    std::vector<std::string> out;
    if (trials < 1)
        out.push_back("trials must be at least 1");
    if (kind == ExperimentKind::sweep) {
        if (over == ExperimentKind::sweep)
            out.push_back("sweep.over cannot be sweep");
        if (grid.empty())
            out.push_back("sweep.grid must name at least one parameter");
        for (auto& [k, v] : grid) {
            if (std::find(sweep_keys().begin(), sweep_keys().end(), k) == sweep_keys().end())
                out.push_back("sweep.grid key '" + k + "' is not a sweepable parameter");
            if (v.empty())
                out.push_back("sweep.grid." + k + " is empty");
        }
        return out;
    }
    if (!(p >= 1.0 && p <= 2.0))
        out.push_back("p must lie in [1, 2]");
    const bool needs_instance = kind != ExperimentKind::tails;
    const bool needs_embedding = kind == ExperimentKind::distort || kind == ExperimentKind::hardstress ||
                                 kind == ExperimentKind::rankdrop ||
                                 (kind == ExperimentKind::regress && method != "irls");
    if (needs_instance) {
        if (d < 1)
            out.push_back("d must be at least 1");
        if (instance_n() < d)
            out.push_back("n must be at least d");
        const bool hard = instance == "hard" || kind == ExperimentKind::hardstress;
        if (instance != "gaussian" && instance != "hard")
            out.push_back("instance must be gaussian or hard");
        if (hard) {
            HardInstanceSpec h{instance_n(), d, 0, uneven_blocks};
            for (auto& e : h.problems())
                out.push_back("hard instance: " + e);
        }
    }
    if (needs_embedding) {
        if (!embedding)
            out.push_back(to_string(kind) + " needs an embedding spec");
        else
            for (auto& e : embedding_for_instance().problems())
                out.push_back("embedding: " + e);
    }
    if ((kind == ExperimentKind::distort || kind == ExperimentKind::hardstress) && !exact_l2 && budget < 2 * d)
        out.push_back("budget must be at least 2d");
    if (exact_l2 && kind != ExperimentKind::distort)
        out.push_back("exact_l2 applies to distort only");
    if (kind == ExperimentKind::tails) {
        if (tail != "cauchy_sum_upper" && tail != "pstable_sum_lower" && tail != "weighted_gaussian")
            out.push_back("tail must be cauchy_sum_upper, pstable_sum_lower or weighted_gaussian");
        if (n < 3)
            out.push_back("tails needs n >= 3");
        if (C && !(*C > 1.0))
            out.push_back("C must exceed 1");
    }
    if (kind == ExperimentKind::regress) {
        if (method != "irls" && method != "sketch_solve" && method != "precondition_sample")
            out.push_back("method must be irls, sketch_solve or precondition_sample");
        if (sample_size && *sample_size < d)
            out.push_back("sample_size must be at least d");
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

inline ExperimentConfig config_from_json(const nlohmann::json& j)
{
    static const std::vector<std::string> known = {
        "kind",  "embedding", "p",       "n",   "d",           "n_per_d",     "instance", "uneven_blocks",
        "trials", "seed",     "out",     "threads", "budget",  "exact_l2",    "tail",     "T",
        "C",     "calibration", "method", "sample_size", "sweep"};
    std::vector<std::string> errs;
    if (!j.is_object())
        throw ValidationError("config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            errs.push_back("unknown config field '" + it.key() + "'");
    ExperimentConfig c;
    auto field = [&](const char* name, auto& dst) {
        if (!j.contains(name))
            return;
        try {
            dst = j.at(name).get<std::decay_t<decltype(dst)>>();
        } catch (const std::exception& e) {
            errs.push_back(std::string("field '") + name + "': " + e.what());
        }
    };
    try {
        if (!j.contains("kind"))
            errs.push_back("missing field 'kind'");
        else
            c.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
    } catch (const std::exception& e) {
        errs.push_back(e.what());
    }
    field("p", c.p);
    field("n", c.n);
    field("d", c.d);
    field("n_per_d", c.n_per_d);
    field("instance", c.instance);
    field("uneven_blocks", c.uneven_blocks);
    field("trials", c.trials);
    field("seed", c.seed);
    field("out", c.out);
    if (j.contains("threads")) {
        unsigned t = 0;
        field("threads", t);
        c.threads = t;
    }
    field("budget", c.budget);
    field("exact_l2", c.exact_l2);
    field("tail", c.tail);
    field("T", c.T);
    if (j.contains("C")) {
        double v = 0;
        field("C", v);
        c.C = v;
    }
    field("calibration", c.calibration);
    field("method", c.method);
    if (j.contains("sample_size")) {
        std::size_t v = 0;
        field("sample_size", v);
        c.sample_size = v;
    }
    if (j.contains("embedding")) {
        try {
            EmbeddingSpec s = j.at("embedding").get<EmbeddingSpec>();
            if (!j.at("embedding").contains("p"))
                s.p = c.p;
            c.embedding = s;
        } catch (const std::exception& e) {
            errs.push_back(std::string("embedding: ") + e.what());
        }
    }
    if (j.contains("sweep")) {
        const auto& sw = j.at("sweep");
        try {
            for (auto it = sw.begin(); it != sw.end(); ++it)
                if (it.key() != "over" && it.key() != "grid")
                    errs.push_back("unknown sweep field '" + it.key() + "'");
            c.over = experiment_kind_from_string(sw.at("over").get<std::string>());
            c.grid = sw.at("grid").get<std::map<std::string, std::vector<double>>>();
        } catch (const std::exception& e) {
            errs.push_back(std::string("sweep: ") + e.what());
        }
    }
    if (!errs.empty()) {
        std::string msg = "invalid experiment config:";
        for (auto& e : errs)
            msg += "\n  - " + e;
        throw ValidationError(msg);
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw ValidationError("cannot open config " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// CSV

inline const std::vector<std::string>& csv_columns()
{
    static const std::vector<std::string> c = {
        "schema_version", "kind",      "config",    "trial",     "seed",  "family",    "p",
        "n",              "d",         "rows",      "row_const", "B",     "eps",       "alpha",
        "budget",         "min_ratio", "max_ratio", "kappa_hat", "rank",  "statistic", "bound",
        "event",          "cost",      "optimum",   "cost_ratio", "iterations", "error"};
    return c;
}

struct CsvRow {
    std::map<std::string, std::string> f;

    void set(const std::string& k, const std::string& v) { f[k] = v; }
    void set(const std::string& k, double v) { f[k] = detail::format_real(v); }
    void set_count(const std::string& k, std::uint64_t v) { f[k] = std::to_string(v); }
    bool failed() const { return f.count("error") && !f.at("error").empty(); }
};

struct CsvReport {
    std::vector<CsvRow> rows;

    std::size_t failed_rows() const
    {
        return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](auto& r) { return r.failed(); }));
    }

    static std::string quote(const std::string& s)
    {
        if (s.find_first_of(",\"\n\r") == std::string::npos)
            return s;
        std::string q = "\"";
        for (char ch : s) {
            if (ch == '"')
                q += '"';
            q += ch;
        }
        return q + '"';
    }

    static std::string line(const CsvRow& r)
    {
        std::string out;
        const auto& cols = csv_columns();
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (i)
                out += ',';
            auto it = r.f.find(cols[i]);
            if (it != r.f.end())
                out += quote(it->second);
        }
        return out;
    }

    std::string str() const
    {
        std::string out;
        const auto& cols = csv_columns();
        for (std::size_t i = 0; i < cols.size(); ++i)
            out += (i ? "," : "") + cols[i];
        out += '\n';
        for (auto& r : rows)
            out += line(r) + '\n';
        return out;
    }

    /// Writes to a temporary file next to path, then renames it into place.
    void write_atomic(const std::string& path) const
    {
        namespace fs = std::filesystem;
        const fs::path target(path);
        const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
        {
            std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
            if (!f)
                throw ArgumentError("cannot write " + tmp.string());
            f << str();
            f.flush();
            if (!f)
                throw ArgumentError("write failed for " + tmp.string());
        }
        std::error_code ec;
        fs::rename(tmp, target, ec);
        if (ec) {
            fs::remove(tmp);
            throw ArgumentError("cannot rename into " + path + ": " + ec.message());
        }
    }
};

// ---------------------------------------------------------------------------
// Execution

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Each index is
/// handled exactly once; callers write results into slot i.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn fn)
{
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++)
                fn(i);
        });
    for (auto& th : pool)
        th.join();
}

/// --threads, else $PSKETCH_THREADS, else the number of logical cores.
inline unsigned resolve_threads(std::optional<unsigned> requested)
{
    if (requested && *requested > 0)
        return *requested;
    if (const char* env = std::getenv("PSKETCH_THREADS"); env && *env) {
        try {
            const long v = std::stol(env);
            if (v > 0)
                return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {

inline DenseMatrix gaussian_matrix(std::size_t n, std::size_t d, std::uint64_t seed)
{
    RngStream s(seed, "instance.gaussian");
    DenseMatrix a(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            a(i, j) = s.gaussian();
    return a;
}

inline void describe_embedding(CsvRow& row, const EmbeddingSpec& s, std::size_t rows)
{
    row.set("family", std::string(to_string(s.family)));
    row.set_count("rows", rows);
    row.set("row_const", s.row_const);
    if (s.B)
        row.set("B", *s.B);
    if (s.eps)
        row.set("eps", *s.eps);
    if (s.alpha)
        row.set("alpha", *s.alpha);
}

inline const CalibrationConstants& cached_constants(const std::string& path)
{
    static std::mutex mu;
    static std::map<std::string, CalibrationConstants> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(path);
    if (it == cache.end())
        it = cache.emplace(path, CalibrationConstants::load(path)).first;
    return it->second;
}

} // namespace detail

/// The row for one trial. Library errors become an error column.
inline CsvRow run_trial(const ExperimentConfig& c, std::size_t trial, std::size_t config_index = 0)
{
    const std::uint64_t seed = derive_seed(c.seed, static_cast<std::uint64_t>(trial));
    CsvRow row;
    row.set_count("schema_version", kCsvSchemaVersion);
    row.set("kind", to_string(c.kind));
    row.set_count("config", config_index);
    row.set_count("trial", trial);
    row.set_count("seed", seed);
    row.set("p", c.p);
    try {
        const std::uint64_t inst_seed = derive_seed(seed, "instance");
        const std::uint64_t emb_seed = derive_seed(seed, "embedding");
        const std::size_t n = c.instance_n();
        if (c.kind != ExperimentKind::tails) {
            row.set_count("n", n);
            row.set_count("d", c.d);
        }
        switch (c.kind) {
        case ExperimentKind::distort:
        case ExperimentKind::hardstress: {
            const bool hard = c.kind == ExperimentKind::hardstress || c.instance == "hard";
            const DenseMatrix a = hard ? generate_hard({n, c.d, inst_seed, c.uneven_blocks}).matrix.to_dense()
                                       : detail::gaussian_matrix(n, c.d, inst_seed);
            EmbeddingSpec spec = c.embedding_for_instance();
            spec.seed = emb_seed;
            const Embedding e = build(spec);
            detail::describe_embedding(row, spec, e.rows());
            const DenseMatrix pia = apply(e, a);
            DistortionReport rep;
            if (c.exact_l2) {
                rep = exact_l2_distortion(pia, a);
            } else {
                row.set_count("budget", c.budget);
                rep = empirical_lp_distortion(pia, a, c.p, {c.budget, derive_seed(seed, "witness"), {}});
            }
            row.set("min_ratio", rep.min_ratio);
            row.set("max_ratio", rep.max_ratio);
            row.set("kappa_hat", rep.kappa_hat);
            break;
        }
        case ExperimentKind::rankdrop: {
            const DenseMatrix a = detail::gaussian_matrix(n, c.d, inst_seed);
            EmbeddingSpec spec = c.embedding_for_instance();
            spec.seed = emb_seed;
            const Embedding e = build(spec);
            detail::describe_embedding(row, spec, e.rows());
            const std::size_t rank = numerical_rank(apply(e, a));
            row.set_count("rank", rank);
            row.set_count("event", rank < c.d ? 1 : 0);
            break;
        }
        case ExperimentKind::tails: {
            const std::string path = c.calibration.empty() ? default_calibration_path() : c.calibration;
            TailOptions opt;
            opt.T = c.T;
            opt.C = c.C;
            const TailSetup setup = make_tail_setup(tail_kind_from_string(c.tail), c.n, c.p,
                                                    detail::cached_constants(path), opt);
            RngStream s(seed, "tails");
            const TailDraw t = draw_tail_event(setup, s);
            row.set("family", c.tail);
            row.set_count("n", setup.n);
            row.set("statistic", t.statistic);
            row.set("bound", t.bound);
            row.set_count("event", t.event ? 1 : 0);
            break;
        }
        case ExperimentKind::regress: {
            const RegressionProblem prob = make_regression_problem(n, c.d, c.p, inst_seed);
            const RegressionResult opt = irls_solve(prob);
            RegressionResult res;
            if (c.method == "irls") {
                res = opt;
                row.set("family", std::string("irls"));
            } else {
                EmbeddingSpec spec = c.embedding_for_instance();
                detail::describe_embedding(row, spec, build(detail::fit_spec(spec, prob, emb_seed)).rows());
                if (c.method == "sketch_solve") {
                    res = sketch_solve(prob, spec, emb_seed);
                } else {
                    const std::size_t t = c.sample_size.value_or(default_sample_size(c.d));
                    res = precondition_sample_solve(prob, spec, t, emb_seed);
                    row.set_count("budget", t);
                }
            }
            row.set("cost", res.cost);
            row.set("optimum", opt.cost);
            row.set("cost_ratio", res.cost / opt.cost);
            row.set_count("iterations", res.iterations);
            break;
        }
        case ExperimentKind::sweep: throw ArgumentError("sweep rows are produced by sweep()");
        }
    } catch (const Error& e) {
        row.set("error", e.what());
    }
    return row;
}

inline CsvReport run_experiment(const ExperimentConfig& c, std::size_t config_index = 0)
{
    if (c.kind == ExperimentKind::sweep)
        throw ValidationError("use sweep() for sweep configs");
    c.validate();
    CsvReport rep;
    rep.rows.resize(c.trials);
    parallel_for(c.trials, resolve_threads(c.threads),
                 [&](std::size_t t) { rep.rows[t] = run_trial(c, t, config_index); });
    return rep;
}

inline constexpr double kSweepGuard = 1e6;

/// Every grid point as a config, in lexicographic order of (key, value index).
inline std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& c)
{
    c.validate();
    double product = 1.0;
    for (auto& [k, v] : c.grid)
        product *= static_cast<double>(v.size());
    if (product > kSweepGuard)
        throw ResourceError("sweep grid has " + detail::format_real(product) + " points, above the 1e6 guard");
    std::vector<ExperimentConfig> out;
    std::vector<std::pair<std::string, std::vector<double>>> axes(c.grid.begin(), c.grid.end());
    std::vector<std::size_t> idx(axes.size(), 0);
    for (;;) {
        ExperimentConfig e = c;
        e.kind = c.over;
        e.grid.clear();
        for (std::size_t a = 0; a < axes.size(); ++a) {
            const std::string& k = axes[a].first;
            const double v = axes[a].second[idx[a]];
            const auto count = static_cast<std::size_t>(std::llround(v));
            if (k == "d")
                e.d = count;
            else if (k == "n")
                e.n = count;
            else if (k == "n_per_d")
                e.n_per_d = count;
            else if (k == "p") {
                e.p = v;
                if (e.embedding)
                    e.embedding->p = v;
            } else if (k == "budget")
                e.budget = count;
            else if (k == "sample_size")
                e.sample_size = count;
            else {
                EmbeddingSpec s = e.embedding.value_or(EmbeddingSpec{});
                if (k == "B")
                    s.B = v;
                else if (k == "eps")
                    s.eps = v;
                else if (k == "alpha")
                    s.alpha = v;
                else if (k == "row_const")
                    s.row_const = v;
                else if (k == "rows")
                    s.rows = count;
                e.embedding = s;
            }
        }
        out.push_back(std::move(e));
        std::size_t a = 0;
        while (a < axes.size() && ++idx[a] == axes[a].second.size())
            idx[a++] = 0;
        if (a == axes.size())
            break;
    }
    std::vector<std::string> errs;
    for (std::size_t i = 0; i < out.size(); ++i)
        for (auto& e : out[i].problems())
            errs.push_back("grid point " + std::to_string(i) + ": " + e);
    if (!errs.empty()) {
        std::string msg = "invalid sweep:";
        for (auto& e : errs)
            msg += "\n  - " + e;
        throw ValidationError(msg);
    }
    return out;
}

inline CsvReport sweep(const ExperimentConfig& c)
{
    const auto configs = expand_sweep(c);
    CsvReport rep;
    rep.rows.resize(configs.size() * c.trials);
    parallel_for(rep.rows.size(), resolve_threads(c.threads), [&](std::size_t i) {
        const std::size_t k = i / c.trials, t = i % c.trials;
        rep.rows[i] = run_trial(configs[k], t, k);
    });
    return rep;
}

inline CsvReport run_any(const ExperimentConfig& c)
{
    return c.kind == ExperimentKind::sweep ? sweep(c) : run_experiment(c);
}

/// Replays `count` rows chosen by a seeded draw and returns the indices that differ.
inline std::vector<std::size_t> verify_rows(const ExperimentConfig& c, const CsvReport& rep, std::size_t count = 5)
{
    std::vector<ExperimentConfig> configs =
        c.kind == ExperimentKind::sweep ? expand_sweep(c) : std::vector<ExperimentConfig>{c};
    RngStream pick(c.seed, "verify");
    std::vector<std::size_t> bad;
    for (std::size_t k = 0; k < std::min(count, rep.rows.size()); ++k) {
        const std::size_t i = pick.uniform_index(rep.rows.size());
        const std::size_t ci = i / c.trials, t = i % c.trials;
        if (CsvReport::line(run_trial(configs[ci], t, ci)) != CsvReport::line(rep.rows[i]))
            bad.push_back(i);
    }
    return bad;
}

} // namespace psketch
