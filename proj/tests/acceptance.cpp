// Acceptance checks, one per criterion. Prints one PASS/FAIL line per criterion
// and exits nonzero if any selected criterion fails.
//
//   acceptance [--criterion N] [--cli PATH] [--configs DIR]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "psketch/calibration.hpp"
#include "psketch/distortion.hpp"
#include "psketch/embeddings.hpp"
#include "psketch/experiment.hpp"
#include "psketch/hardgen.hpp"
#include "psketch/regress.hpp"
#include "psketch/stable.hpp"
#include "support.hpp"

using namespace psketch;

namespace {

// Pinned tolerances and thresholds.
constexpr double kOracleRelTol = 1e-12;      // 1
constexpr std::size_t kOracleSpecs = 50;     // 1
constexpr std::size_t kOracleMaxN = 400;     // 1
constexpr double kSampledSeMultiple = 4.0;   // 2
constexpr double kStabilityKs = 0.02;        // 3
constexpr std::size_t kStabilitySamples = 100000;
constexpr std::size_t kStabilityVectors = 10;
constexpr double kL2Distortion = 3.0;        // 4
constexpr int kL2Required = 90;              // of 100
constexpr double kComposedFactor = 10.0;     // 5: kappa_hat <= 10 d
constexpr int kComposedRequired = 90;        // of 100
constexpr double kTruncAlpha = 0.1;          // 5
constexpr double kTailSeMultiple = 2.0;      // 6
constexpr double kTrendFactor = 0.05;        // 7: 0.05 d / log^2 r
constexpr std::size_t kTrendTrials = 100;    // 7
constexpr double kRankDropFew = 0.3;         // 8
constexpr double kRankDropMany = 0.02;       // 8
constexpr double kSampleCostFactor = 1.1;    // 9
constexpr int kSampleRequired = 80;          // of 100
constexpr double kSketchCostFactor = 10.0;   // 9: times d

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 4)
{
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

Family family_at(std::size_t i)
{
    static const Family all[] = {Family::countsketch,      Family::osnap,     Family::sparse_stable,
                                 Family::composed_cs,      Family::composed_osnap, Family::sampled_composed,
                                 Family::truncated,        Family::dense_stable,   Family::identity};
    return all[i % 9];
}

// 1. apply() against an independent dense product of the materialized operator.
Outcome oracle_equivalence()
{
    std::mt19937_64 g(1);
    double worst = 0;
    for (std::size_t i = 0; i < kOracleSpecs; ++i) {
        EmbeddingSpec s;
        s.family = family_at(i);
        s.d = 1 + g() % 6;
        s.n = s.d + g() % (kOracleMaxN - s.d + 1);
        s.p = s.family == Family::countsketch || s.family == Family::osnap ? 2.0 : 1.0 + 0.25 * static_cast<double>(g() % 4);
        s.seed = g();
        if (s.needs_B())
            s.B = 3.0 + static_cast<double>(g() % 6);
        if (s.needs_eps())
            s.eps = 0.05 + 0.9 * static_cast<double>(g() % 100) / 100.0;
        if (s.needs_alpha())
            s.alpha = 0.01 + 0.2 * static_cast<double>(g() % 100) / 100.0;
        if (s.needs_rows())
            s.rows = 2 + g() % 200;
        const Embedding e = build(s);
        const DenseMatrix a = oracle::random_dense(s.n, 1 + g() % 4, static_cast<unsigned>(g()));
        const Eigen::MatrixXd want = oracle::to_eigen(materialize(e)) * oracle::to_eigen(a);
        worst = std::max(worst, oracle::max_rel_diff(oracle::to_eigen(apply(e, a)), want));
        worst = std::max(worst, oracle::max_rel_diff(oracle::to_eigen(apply(e, SparseMatrix::from_dense(a))), want));
    }
    return {worst <= kOracleRelTol, std::to_string(kOracleSpecs) + " specs, max relative difference " + fmt(worst)};
}

// 2. Exhaustive per-column nnz scans.
Outcome sparsity_contracts()
{
    const std::size_t n = 100000, d = 8;
    std::vector<std::string> bad;
    auto scan = [&](const char* name, const Embedding& e, std::size_t lo, std::size_t hi) {
        const SparseMatrix m = materialize(e);
        for (std::size_t j = 0; j < m.cols(); ++j)
            if (m.col_nnz(j) < lo || m.col_nnz(j) > hi) {
                bad.push_back(name);
                return m;
            }
        return m;
    };
    scan("countsketch", build_countsketch(n, d, 1.0, 1), 1, 1);
    scan("sparse_stable", build_sparse_stable(n, d, 1.0, 64, 2), 1, 1);
    scan("truncated", build_truncated(n, d, 1.0, 0.1, 1.0, 3), 1, 1);
    const std::size_t s = rows_for::osnap_sparsity(d, 4.0);
    scan("osnap", build_osnap(n, d, 4.0, 1.0, 4), s, s);
    scan("composed_cs", build_composed(n, d, 1.0, Family::countsketch, std::nullopt, 1.0, 5), 1, 2);
    scan("composed_osnap", build_composed(n, d, 1.0, Family::osnap, 4.0, 1.0, 6), s, s + 1);
    const double eps = 0.1;
    const SparseMatrix sm = scan("sampled_composed", build_sampled_composed(n, d, 1.0, eps, 1.0, 7), 1, 2);
    const double mean = static_cast<double>(sm.nnz()) / static_cast<double>(n);
    const double tol = kSampledSeMultiple * std::sqrt(eps / static_cast<double>(n));
    if (std::abs(mean - (1 + eps)) > tol)
        bad.push_back("sampled mean");
    std::string detail = "osnap s=" + std::to_string(s) + ", sampled mean nnz " + fmt(mean, 6) + " (1.1 +- " + fmt(tol) + ")";
    for (auto& b : bad)
        detail += "; violated: " + b;
    return {bad.empty(), detail};
}

// 3. sum a_i X_i against ||a||_p X, two-sample KS.
Outcome p_stability()
{
    double worst = 0;
    std::mt19937_64 g(3);
    for (double p : {1.0, 1.25, 1.5, 1.75}) {
        for (std::size_t v = 0; v < kStabilityVectors; ++v) {
            std::vector<double> a(2 + g() % 10);
            std::normal_distribution<double> N;
            for (auto& x : a)
                x = N(g);
            const double an = oracle::lp(a, p);
            RngStream s(derive_seed(3, v), "stability");
            std::vector<double> lhs(kStabilitySamples), rhs(kStabilitySamples);
            for (std::size_t i = 0; i < kStabilitySamples; ++i) {
                double sum = 0;
                for (double ai : a)
                    sum += ai * draw_pstable(p, s);
                lhs[i] = sum;
                rhs[i] = an * draw_pstable(p, s);
            }
            worst = std::max(worst, ks_distance(lhs, rhs));
        }
    }
    return {worst < kStabilityKs, "40 vectors, max KS " + fmt(worst)};
}

// 4. Exact l2 distortion of countsketch and OSNAP.
Outcome l2_distortion()
{
    const std::size_t n = 10000, d = 10;
    int cs_ok = 0, os_ok = 0;
    double cs_worst = 0, os_worst = 0;
    for (std::uint64_t t = 0; t < 100; ++t) {
        const DenseMatrix a = detail::gaussian_matrix(n, d, derive_seed(4, t));
        const double k1 = exact_l2_distortion(build_countsketch(n, d, 10.0, derive_seed(40, t)), a).kappa_hat;
        const double k2 = exact_l2_distortion(build_osnap(n, d, 8.0, 20.0, derive_seed(41, t)), a).kappa_hat;
        cs_ok += k1 <= kL2Distortion;
        os_ok += k2 <= kL2Distortion;
        cs_worst = std::max(cs_worst, k1);
        os_worst = std::max(os_worst, k2);
    }
    return {cs_ok >= kL2Required && os_ok >= kL2Required,
            "countsketch " + std::to_string(cs_ok) + "/100 (max " + fmt(cs_worst) + "), osnap " + std::to_string(os_ok) +
                "/100 (max " + fmt(os_worst) + ")"};
}

// 5. Empirical l1 distortion of the composed and truncated families.
Outcome composed_distortion()
{
    const std::size_t n = std::size_t{1} << 14;
    auto count = [&](std::size_t d, double limit, auto make) {
        int ok = 0;
        double worst = 0;
        for (std::uint64_t t = 0; t < 100; ++t) {
            const DenseMatrix a = detail::gaussian_matrix(n, d, derive_seed(5, t));
            const Embedding e = make(d, derive_seed(50, t));
            DistortionOptions o;
            o.budget = 1000;
            o.seed = derive_seed(51, t);
            const double k = empirical_lp_distortion(apply(e, a), a, 1.0, o).kappa_hat;
            ok += k <= limit;
            worst = std::max(worst, k);
        }
        return std::pair{ok, worst};
    };
    const double l4 = std::log(4.0);
    const auto [cs, cs_w] = count(8, kComposedFactor * 8, [&](std::size_t d, std::uint64_t s) {
        return build_composed(n, d, 1.0, Family::countsketch, std::nullopt, 1.0, s);
    });
    const auto [os, os_w] = count(8, kComposedFactor * 8, [&](std::size_t d, std::uint64_t s) {
        return build_composed(n, d, 1.0, Family::osnap, 8.0, 1.0, s);
    });
    const auto [tr, tr_w] = count(4, kComposedFactor * 4 * l4 * l4, [&](std::size_t d, std::uint64_t s) {
        return build_truncated(n, d, 1.0, kTruncAlpha, 1.0, s);
    });
    return {cs >= kComposedRequired && os >= kComposedRequired && tr >= kComposedRequired,
            "composed_cs " + std::to_string(cs) + "/100 (max " + fmt(cs_w) + " vs 80), composed_osnap " +
                std::to_string(os) + "/100 (max " + fmt(os_w) + " vs 80), truncated " + std::to_string(tr) +
                "/100 (max " + fmt(tr_w) + " vs " + fmt(kComposedFactor * 4 * l4 * l4) + ")"};
}

// 6. Upper and lower tail frequencies against the stated probabilities.
Outcome tail_lemmas()
{
    const auto& k = oracle::constants();
    const auto up = mc_tail_report(TailKind::cauchy_sum_upper, 10000, 1.0, 10000, RngStream(6, "upper"), k);
    const auto lo = mc_tail_report(TailKind::pstable_sum_lower, 10000, 1.0, 10000, RngStream(6, "lower"), k);
    return {up.meets_target(kTailSeMultiple) && lo.meets_target(kTailSeMultiple),
            "upper " + fmt(up.probability) + " vs " + fmt(up.target) + ", lower " + fmt(lo.probability) + " vs " +
                fmt(lo.target) + " (U_1=" + fmt(k.at(1.0).U.value) + ", L_1=" + fmt(k.at(1.0).L.value) + ")"};
}

// 7. Mean kappa_hat on hard instances against d.
Outcome lower_bound_trend()
{
    bool ok = true;
    double prev = 0;
    std::string detail;
    for (std::size_t d : {8u, 16u, 32u}) {
        HardInstanceSpec hs{512 * d, d, 0, true};
        double sum = 0;
        std::size_t rows = 0;
        for (std::uint64_t t = 0; t < kTrendTrials; ++t) {
            hs.seed = derive_seed(7, t);
            const DenseMatrix a = generate_hard(hs).matrix.to_dense();
            const Embedding e = build_composed(hs.n, d, 1.0, Family::countsketch, std::nullopt, 1.0, derive_seed(70, t));
            rows = e.rows();
            DistortionOptions o;
            o.budget = 1000;
            o.seed = derive_seed(71, t);
            sum += empirical_lp_distortion(apply(e, a), a, 1.0, o).kappa_hat;
        }
        const double mean = sum / static_cast<double>(kTrendTrials);
        const double lr = std::log(static_cast<double>(rows));
        const double threshold = kTrendFactor * static_cast<double>(d) / (lr * lr);
        ok = ok && mean >= prev && mean > threshold;
        prev = mean;
        detail += (detail.empty() ? "" : ", ") + std::string("d=") + std::to_string(d) + " mean " + fmt(mean) +
                  " (threshold " + fmt(threshold) + ")";
    }
    return {ok, detail};
}

// 8. Rank of Pi A for a square Gaussian A under one-nonzero-per-column sketches.
Outcome rank_drop()
{
    const std::size_t d = 30;
    auto freq = [&](std::size_t r) {
        ExperimentConfig c;
        c.kind = ExperimentKind::rankdrop;
        c.n = d;
        c.d = d;
        c.trials = 200;
        c.seed = 8;
        c.threads = 1;
        EmbeddingSpec s;
        s.family = Family::countsketch;
        s.rows = r;
        c.embedding = s;
        const auto rep = run_experiment(c);
        double events = 0;
        for (const auto& row : rep.rows)
            events += std::stod(row.f.at("event"));
        return events / 200.0;
    };
    const std::size_t few = (d * d + 9) / 10, many = 10 * d * d;
    const double f1 = freq(few), f2 = freq(many);
    return {f1 >= kRankDropFew && f2 <= kRankDropMany, "r=" + std::to_string(few) + ": " + fmt(f1) + " (need >= 0.3), r=" +
                                                          std::to_string(many) + ": " + fmt(f2) + " (need <= 0.02)"};
}

// 9. Sketch-precondition-sample and sketch-and-solve costs against full IRLS.
Outcome regression_pipeline()
{
    const std::size_t n = 10000, d = 8;
    const std::size_t t = static_cast<std::size_t>(std::ceil(40.0 * d * std::log(static_cast<double>(d))));
    EmbeddingSpec spec;
    spec.family = Family::composed_cs;
    int sample_ok = 0, sketch_ok = 0;
    double worst_sample = 0, worst_sketch = 0;
    for (std::uint64_t k = 0; k < 100; ++k) {
        const auto prob = make_regression_problem(n, d, 1.0, derive_seed(9, k));
        const double opt = irls_solve(prob).cost;
        const double c1 = precondition_sample_solve(prob, spec, t, derive_seed(90, k)).cost / opt;
        const double c2 = sketch_solve(prob, spec, derive_seed(91, k)).cost / opt;
        sample_ok += c1 <= kSampleCostFactor;
        sketch_ok += c2 <= kSketchCostFactor * d;
        worst_sample = std::max(worst_sample, c1);
        worst_sketch = std::max(worst_sketch, c2);
    }
    return {sample_ok >= kSampleRequired && sketch_ok == 100,
            "t=" + std::to_string(t) + ", sampled <= 1.1 opt in " + std::to_string(sample_ok) + "/100 (max ratio " +
                fmt(worst_sample) + "), sketch_solve <= 80 opt in " + std::to_string(sketch_ok) + "/100 (max ratio " +
                fmt(worst_sketch) + ")"};
}

// 10. Every sample config run twice through the CLI, with different thread counts.
Outcome determinism(const std::string& cli, const std::string& configs)
{
    namespace fs = std::filesystem;
    if (cli.empty() || !fs::exists(cli))
        return {false, "CLI binary not found (pass --cli)"};
    const std::map<std::string, std::string> sub = {{"distort", "distort"}, {"tails", "tails"},
                                                    {"hardstress", "hardgen"}, {"rankdrop", "rankdrop"},
                                                    {"regress", "regress"},   {"sweep", "sweep"}};
    auto slurp = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        std::stringstream ss;
        ss << f.rdbuf();
        return ss.str();
    };
    const fs::path tmp = fs::temp_directory_path() / ("psketch_acc_" + std::to_string(::getpid()));
    fs::create_directories(tmp);
    std::size_t checked = 0;
    std::vector<std::string> bad;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(configs))
        if (e.path().extension() == ".json")
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        const auto cfg = load_config(f.string());
        const std::string cmd = sub.at(to_string(cfg.kind));
        std::string outs[2];
        for (int run = 0; run < 2; ++run) {
            const fs::path out = tmp / (f.stem().string() + "." + std::to_string(run) + ".csv");
            const std::string line = "\"" + cli + "\" " + cmd + " --config \"" + f.string() + "\" --out \"" +
                                     out.string() + "\" --threads " + (run == 0 ? "1" : "2");
            if (std::system(line.c_str()) != 0) {
                bad.push_back(f.filename().string() + " (exit status)");
                break;
            }
            outs[run] = slurp(out);
        }
        if (outs[0].empty() || outs[0] != outs[1])
            bad.push_back(f.filename().string());
        ++checked;
    }
    fs::remove_all(tmp);
    std::string detail = std::to_string(checked) + " configs replayed";
    for (auto& b : bad)
        detail += "; differs: " + b;
    return {checked > 0 && bad.empty(), detail};
}

} // namespace

int main(int argc, char** argv)
{
    int only = 0;
    std::string cli, configs;
#ifdef PSKETCH_CLI_PATH
    cli = PSKETCH_CLI_PATH;
#endif
#ifdef PSKETCH_CONFIG_DIR
    configs = PSKETCH_CONFIG_DIR;
#endif
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--criterion" && i + 1 < argc)
            only = std::stoi(argv[++i]);
        else if (a == "--cli" && i + 1 < argc)
            cli = argv[++i];
        else if (a == "--configs" && i + 1 < argc)
            configs = argv[++i];
        else {
            std::cerr << "usage: acceptance [--criterion N] [--cli PATH] [--configs DIR]\n";
            return 2;
        }
    }
    const std::vector<std::pair<int, std::function<Outcome()>>> all = {
        {1, oracle_equivalence},  {2, sparsity_contracts}, {3, p_stability},
        {4, l2_distortion},       {5, composed_distortion}, {6, tail_lemmas},
        {7, lower_bound_trend},   {8, rank_drop},           {9, regression_pipeline},
        {10, [&] { return determinism(cli, configs); }},
    };
    bool all_pass = true;
    for (const auto& [id, fn] : all) {
        if (only != 0 && id != only)
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << o.detail << " [" << fmt(secs, 3)
                  << " s]" << std::endl;
        all_pass = all_pass && o.pass;
    }
    return all_pass ? 0 : 1;
}
